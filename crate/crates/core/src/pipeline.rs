//! The composed streaming pipeline: frames in, vitals out.
//!
//! Per frame: update the running window; for each emitted window run POS
//! extraction, motion suppression, band limiting, dominant-frequency
//! selection and the narrow band-pass; normalize and overlap-add into the
//! BVP stream; finalize the region no future window can reach. At the end of
//! the stream, peaks are detected over the finalized BVP and the vitals
//! report is assembled. Windows that fail to lock (no in-band component, or
//! a peak that does not stand out from the in-band background) contribute
//! nothing and are counted in the diagnostics.

use crate::beats::{self, F0History, PeakParams};
use crate::bvp::{self, BvpError, BvpStream};
use crate::pos;
use crate::spectral::{self, SpectralError};
use crate::trace::FrameSample;
use crate::vitals::{self, VitalsReport};
use crate::window::{SignalWindow, SlidingWindow, WindowConfig};
use serde::{Deserialize, Serialize};

fn default_window_seconds() -> f64 {
    8.53
}
fn default_hop_samples() -> usize {
    1
}
fn default_gap_reset_seconds() -> f64 {
    2.0
}
fn default_band_low_hz() -> f64 {
    spectral::BAND_LOW_HZ
}
fn default_band_high_hz() -> f64 {
    spectral::BAND_HIGH_HZ
}
fn default_narrow_bandwidth_hz() -> f64 {
    spectral::NARROW_BANDWIDTH_HZ
}
fn default_hr_window_seconds() -> f64 {
    15.0
}
fn default_true() -> bool {
    true
}
fn default_min_peak_dominance() -> f64 {
    3.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_window_seconds")]
    pub window_seconds: f64,
    #[serde(default = "default_hop_samples")]
    pub hop_samples: usize,
    #[serde(default = "default_gap_reset_seconds")]
    pub gap_reset_seconds: f64,
    #[serde(default = "default_band_low_hz")]
    pub band_low_hz: f64,
    #[serde(default = "default_band_high_hz")]
    pub band_high_hz: f64,
    #[serde(default = "default_narrow_bandwidth_hz")]
    pub narrow_bandwidth_hz: f64,
    #[serde(default = "default_hr_window_seconds")]
    pub hr_window_seconds: f64,
    /// Rolling HRV span; absent means the whole recording.
    #[serde(default)]
    pub hrv_window_seconds: Option<f64>,
    /// Ablation switch for the rhythmic motion noise suppression stage.
    #[serde(default = "default_true")]
    pub motion_suppression: bool,
    /// Minimum ratio of the dominant bin to the mean in-band magnitude for a
    /// window to count as a pulse lock; rejects flat noise spectra.
    #[serde(default = "default_min_peak_dominance")]
    pub min_peak_dominance: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl PipelineConfig {
    fn window_config(&self) -> WindowConfig {
        WindowConfig {
            window_seconds: self.window_seconds,
            hop_samples: self.hop_samples,
            gap_reset_seconds: self.gap_reset_seconds,
        }
    }
}

/// Stream-level counters surfaced in the results document.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub frames_in: u64,
    pub windows_emitted: u64,
    /// Windows skipped because no in-band pulse stood out.
    pub windows_no_lock: u64,
    /// Windows skipped for zero variance after filtering.
    pub windows_zero_variance: u64,
    /// Windows skipped because the colour channels could not be normalized.
    pub windows_pos_failed: u64,
    /// Windows whose source frame rate cannot carry the full heart-rate band.
    pub low_rate_windows: u64,
    /// Windows dropped due to a mid-stream target-rate change.
    pub windows_rate_mismatch: u64,
    /// Intervals discarded by the physiological IBI gate.
    pub gating_events: u64,
    /// HR windows suppressed because the measured rate fell outside the
    /// configured band (an edge-bin lock leaking an out-of-band pulse).
    pub hr_windows_out_of_band: u64,
    pub buffer_resets: u64,
}

/// Accumulated wall-clock nanoseconds per stage (zero on wasm).
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub window_ns: u64,
    pub pos_ns: u64,
    pub spectral_ns: u64,
    pub bvp_ns: u64,
    pub beats_ns: u64,
    pub vitals_ns: u64,
}

impl StageTimings {
    pub fn total_ns(&self) -> u64 {
        self.window_ns
            + self.pos_ns
            + self.spectral_ns
            + self.bvp_ns
            + self.beats_ns
            + self.vitals_ns
    }
}

#[cfg(not(target_arch = "wasm32"))]
fn timed<T>(acc: &mut u64, f: impl FnOnce() -> T) -> T {
    let start = std::time::Instant::now();
    let out = f();
    *acc += start.elapsed().as_nanos() as u64;
    out
}

#[cfg(target_arch = "wasm32")]
fn timed<T>(_acc: &mut u64, f: impl FnOnce() -> T) -> T {
    f()
}

/// Everything the pipeline knows at the end of a stream.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: VitalsReport,
    pub bvp: Option<BvpStream>,
    pub diagnostics: Diagnostics,
    pub timings: StageTimings,
    /// Per-window dominant frequency history, `(t_start_ms, f0_hz)`.
    pub f0_history: Vec<(f64, f64)>,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    window: SlidingWindow,
    bvp: Option<BvpStream>,
    f0_history: F0History,
    f0_entries: Vec<(f64, f64)>,
    diagnostics: Diagnostics,
    timings: StageTimings,
    last_frame_t: f64,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Self {
        let window = SlidingWindow::new(cfg.window_config());
        Self {
            cfg,
            window,
            bvp: None,
            f0_history: F0History::default(),
            f0_entries: Vec::new(),
            diagnostics: Diagnostics::default(),
            timings: StageTimings::default(),
            last_frame_t: 0.0,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    /// Feed one validated frame through every stage it completes.
    pub fn push_frame(&mut self, sample: FrameSample) {
        self.diagnostics.frames_in += 1;
        self.last_frame_t = sample.t_ms;
        let t_now = sample.t_ms;
        let windows = timed(&mut self.timings.window_ns, || self.window.push(sample));
        self.diagnostics.buffer_resets = self.window.resets();
        for w in windows {
            self.process_window(w);
        }
        timed(&mut self.timings.bvp_ns, || {
            if let Some(stream) = self.bvp.as_mut() {
                stream.finalize_region(t_now, self.cfg.window_seconds);
            }
        });
    }

    fn process_window(&mut self, w: SignalWindow) {
        self.diagnostics.windows_emitted += 1;
        if w.source_rate_hz < 2.0 * self.cfg.band_high_hz {
            self.diagnostics.low_rate_windows += 1;
        }

        let raw = match timed(&mut self.timings.pos_ns, || {
            pos::pos_extract(&w.r, &w.g, &w.b, w.fs, w.t_start_ms)
        }) {
            Ok(raw) => raw,
            Err(_) => {
                self.diagnostics.windows_pos_failed += 1;
                return;
            }
        };

        let cfg = &self.cfg;
        let filtered = timed(&mut self.timings.spectral_ns, || {
            let rppg_spec = spectral::amplitude_spectrum(&raw.values, w.fs)?;
            let suppressed = if cfg.motion_suppression {
                let pitch = spectral::amplitude_spectrum(&w.pitch, w.fs)?;
                let roll = spectral::amplitude_spectrum(&w.roll, w.fs)?;
                let yaw = spectral::amplitude_spectrum(&w.yaw, w.fs)?;
                let motion = spectral::combine_motion_spectra(&pitch, &roll, &yaw)?;
                spectral::suppress_motion(&rppg_spec, &motion, cfg.band_low_hz, cfg.band_high_hz)?
            } else {
                rppg_spec
            };
            let limited = spectral::band_limit(&suppressed, cfg.band_low_hz, cfg.band_high_hz);
            let f0 = spectral::dominant_frequency(&limited)?;
            if spectral::peak_dominance(&limited) < cfg.min_peak_dominance {
                return Err(SpectralError::EmptySpectrum);
            }
            Ok(spectral::narrow_bandpass(&raw, f0, cfg.narrow_bandwidth_hz))
        });
        let filtered = match filtered {
            Ok(f) => f,
            Err(_) => {
                self.diagnostics.windows_no_lock += 1;
                return;
            }
        };

        let ok = timed(&mut self.timings.bvp_ns, || {
            let normalized = match bvp::normalize_window(&filtered) {
                Ok(n) => n,
                Err(BvpError::ZeroVariance) => return Err(BvpError::ZeroVariance),
                Err(e) => return Err(e),
            };
            let stream = self
                .bvp
                .get_or_insert_with(|| BvpStream::new(normalized.fs));
            if (stream.fs() - normalized.fs).abs() > f64::EPSILON {
                return Err(BvpError::NegativePlacement);
            }
            stream.overlap_add(&normalized)
        });
        match ok {
            Ok(()) => {
                self.f0_history.push(filtered.t_start_ms, filtered.f0_hz);
                self.f0_entries.push((filtered.t_start_ms, filtered.f0_hz));
            }
            Err(BvpError::ZeroVariance) => self.diagnostics.windows_zero_variance += 1,
            Err(BvpError::NegativePlacement) => self.diagnostics.windows_rate_mismatch += 1,
        }
    }

    /// Close the stream: finalize the whole BVP, detect beats over it and
    /// assemble the report. The HR grid is anchored at t = 0, the stream
    /// origin of the trace format.
    pub fn finish(mut self) -> PipelineOutput {
        let mut beat_times = Vec::new();
        if let Some(stream) = self.bvp.as_mut() {
            stream.finalize_all();
            let values = stream.reported(0, stream.len());
            let t0 = stream.t0_ms().unwrap_or(0.0);
            let fs = stream.fs();
            let history = &self.f0_history;
            beat_times = timed(&mut self.timings.beats_ns, || {
                beats::detect_peaks(&values, fs, t0, history, PeakParams::default())
            });
        }

        let report = timed(&mut self.timings.vitals_ns, || {
            let (seq, gated) = beats::extract_ibis(&beat_times).expect("detector output is sorted");
            self.diagnostics.gating_events = gated;
            let mut report = vitals::build_report(
                &seq,
                0.0,
                self.last_frame_t,
                self.cfg.hr_window_seconds,
                self.cfg.hrv_window_seconds,
            );
            // A window whose measured rate lies outside the analysis band can
            // only come from a band-edge lock onto an out-of-band pulse (the
            // narrow filter's passband reaches half its width past the edge).
            // Those are suppressed rather than reported as confident HR.
            let (lo_bpm, hi_bpm) = (self.cfg.band_low_hz * 60.0, self.cfg.band_high_hz * 60.0);
            let before = report.hr_series.len();
            report
                .hr_series
                .retain(|w| w.bpm >= lo_bpm && w.bpm <= hi_bpm);
            self.diagnostics.hr_windows_out_of_band = (before - report.hr_series.len()) as u64;
            report
        });

        PipelineOutput {
            report,
            bvp: self.bvp,
            diagnostics: self.diagnostics,
            timings: self.timings,
            f0_history: self.f0_entries,
        }
    }
}

/// Run a full trace through a fresh pipeline. Streaming the same frames
/// through `push_frame` one by one gives the identical output.
pub fn process_trace(samples: &[FrameSample], cfg: PipelineConfig) -> PipelineOutput {
    let mut pipeline = Pipeline::new(cfg);
    for &s in samples {
        pipeline.push_frame(s);
    }
    pipeline.finish()
}
