//! Browser bindings for the facepulse pipeline.
//!
//! Three operations back the demo page in `www/`:
//!
//! - [`synth_and_process`]: build a synthetic scenario from slider values,
//!   run the full pipeline and return waveform, beats, HR series, HRV and
//!   the scores against the scenario's exact ground truth.
//! - [`process_trace_csv`]: run an uploaded trace CSV through the pipeline.
//! - [`window_spectra`]: expose one analysis window's spectra (raw rPPG,
//!   averaged motion, suppressed + band-limited) and the selected pulse
//!   frequency, to make the filtering stage visible.
//!
//! Every function takes and returns JSON strings; errors come back as
//! `{"error": "..."}` so the page can surface them without exceptions.

use facepulse_core::pipeline::{process_trace, Diagnostics, PipelineConfig};
use facepulse_core::synth::{FrameRate, MotionInjection, RrModulation, SynthSpec};
use facepulse_core::trace::GroundTruth;
use facepulse_core::vitals::HrWindow;
use facepulse_core::{eval, spectral, synth, trace, window};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[wasm_bindgen(start)]
pub fn start() {
    console_error_panic_hook::set_once();
}

fn default_duration() -> f64 {
    60.0
}
fn default_bpm() -> f64 {
    72.0
}
fn default_motion_orientation() -> f64 {
    3.0
}
fn default_true() -> bool {
    true
}

/// Slider values from the demo page.
#[derive(Debug, Deserialize)]
pub struct DemoParams {
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_bpm")]
    pub bpm: f64,
    #[serde(default)]
    pub rr_jitter_ms: f64,
    #[serde(default)]
    pub modulation_freq_hz: Option<f64>,
    #[serde(default)]
    pub modulation_depth_ms: Option<f64>,
    #[serde(default)]
    pub motion_freq_hz: Option<f64>,
    /// Motion colour amplitude relative to the pulse amplitude (1.0 = equal).
    #[serde(default)]
    pub motion_amp_rel: Option<f64>,
    #[serde(default = "default_motion_orientation")]
    pub motion_orientation_deg: f64,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default = "default_true")]
    pub motion_suppression: bool,
    #[serde(default)]
    pub seed: u64,
}

impl DemoParams {
    fn to_spec(&self) -> SynthSpec {
        let mut spec = SynthSpec::constant(self.duration_s, self.bpm);
        spec.rr_jitter_ms = self.rr_jitter_ms;
        if let Some(freq_hz) = self.modulation_freq_hz {
            spec.rr_modulation = Some(RrModulation {
                freq_hz,
                depth_ms: self.modulation_depth_ms.unwrap_or(40.0),
            });
        }
        if let Some(freq_hz) = self.motion_freq_hz {
            spec.motion = Some(MotionInjection {
                freq_hz,
                color_amp: self.motion_amp_rel.unwrap_or(1.0) * spec.pulse_depth,
                orientation_amp_deg: self.motion_orientation_deg,
            });
        }
        spec.noise_snr_db = self.snr_db;
        spec.frame_rate = FrameRate::Constant { fps: 30.0 };
        spec.seed = self.seed;
        spec
    }

    fn to_config(&self) -> PipelineConfig {
        PipelineConfig {
            motion_suppression: self.motion_suppression,
            ..PipelineConfig::default()
        }
    }
}

#[derive(Serialize)]
struct HrvOut {
    rmssd_ms: Option<f64>,
    lf_nu: Option<f64>,
    hf_nu: Option<f64>,
    lf_hf_ratio: Option<f64>,
}

#[derive(Serialize)]
struct DemoResult {
    fs: f64,
    bvp_t_ms: Vec<f64>,
    bvp: Vec<f64>,
    beats_ms: Vec<f64>,
    truth_beats_ms: Vec<f64>,
    hr_series: Vec<HrWindow>,
    truth_hr_series: Vec<HrWindow>,
    hrv: HrvOut,
    truth_rmssd_ms: Option<f64>,
    mae_bpm: Option<f64>,
    rmssd_error_ms: Option<f64>,
    f0_history: Vec<(f64, f64)>,
    diagnostics: Diagnostics,
}

fn err_json(msg: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": msg.to_string() }).to_string()
}

fn run_demo(params_json: &str) -> Result<String, String> {
    let params: DemoParams =
        serde_json::from_str(params_json).map_err(|e| format!("bad params: {e}"))?;
    let spec = params.to_spec();
    let (samples, truth_beats) = synth::synth_trace(&spec).map_err(|e| e.to_string())?;
    let out = process_trace(&samples, params.to_config());

    let truth = GroundTruth::Beats(truth_beats.clone());
    let scored = eval::evaluate(
        &out.report,
        &truth,
        out.report
            .hr_series
            .first()
            .map(|w| (w.t_end_ms - w.t_start_ms) / 1000.0)
            .unwrap_or(15.0),
    );
    let (mae_bpm, rmssd_error_ms) = match &scored {
        Ok(r) => (r.mae_bpm, r.rmssd_error_ms),
        Err(_) => (None, None),
    };
    let (truth_seq, _) =
        facepulse_core::extract_ibis(&truth_beats).expect("generated beats are sorted");
    let truth_hr_series =
        facepulse_core::vitals::hr_series(&truth_seq, 0.0, spec.duration_s * 1000.0, 15.0);
    let truth_rmssd_ms = facepulse_core::rmssd(&truth_seq.ibis).ok();

    let (bvp_t_ms, bvp, fs) = match &out.bvp {
        Some(stream) => {
            let pairs: Vec<(f64, f64)> = stream.samples().collect();
            (
                pairs.iter().map(|p| p.0).collect(),
                pairs.iter().map(|p| p.1).collect(),
                stream.fs(),
            )
        }
        None => (Vec::new(), Vec::new(), 30.0),
    };

    let result = DemoResult {
        fs,
        bvp_t_ms,
        bvp,
        beats_ms: out.report.beat_times_ms.clone(),
        truth_beats_ms: truth_beats,
        hr_series: out.report.hr_series.clone(),
        truth_hr_series,
        hrv: HrvOut {
            rmssd_ms: out.report.rmssd_ms,
            lf_nu: out.report.lf_nu,
            hf_nu: out.report.hf_nu,
            lf_hf_ratio: out.report.lf_hf_ratio,
        },
        truth_rmssd_ms,
        mae_bpm,
        rmssd_error_ms,
        f0_history: out.f0_history,
        diagnostics: out.diagnostics,
    };
    serde_json::to_string(&result).map_err(|e| e.to_string())
}

/// Synthesize a scenario from the demo parameters, run the pipeline, and
/// return everything the page plots.
#[wasm_bindgen]
pub fn synth_and_process(params_json: &str) -> String {
    match run_demo(params_json) {
        Ok(s) => s,
        Err(e) => err_json(e),
    }
}

/// Run an uploaded trace CSV through the pipeline. `config_json` may be
/// empty for defaults or carry pipeline config keys.
#[wasm_bindgen]
pub fn process_trace_csv(csv: &str, config_json: &str) -> String {
    let cfg: PipelineConfig = if config_json.trim().is_empty() {
        PipelineConfig::default()
    } else {
        match serde_json::from_str(config_json) {
            Ok(c) => c,
            Err(e) => return err_json(format!("bad config: {e}")),
        }
    };
    let samples = match trace::parse_trace(csv.as_bytes()) {
        Ok(s) => s,
        Err(e) => return err_json(e),
    };
    let out = process_trace(&samples, cfg);
    let doc = trace::ResultsDoc::new(&out.report, out.bvp.as_ref(), out.diagnostics, false);
    match serde_json::to_string(&doc) {
        Ok(s) => s,
        Err(e) => err_json(e),
    }
}

#[derive(Serialize)]
struct SpectraResult {
    t_start_ms: f64,
    freqs_hz: Vec<f64>,
    raw_rppg: Vec<f64>,
    motion_scaled: Vec<f64>,
    suppressed_banded: Vec<f64>,
    f0_hz: Option<f64>,
    band_low_hz: f64,
    band_high_hz: f64,
    source_rate_hz: f64,
}

/// Spectra of the analysis window starting at (or just after) `t_ms` for a
/// synthetic scenario: the raw rPPG spectrum, the averaged motion spectrum
/// rescaled as the suppression stage uses it, and the motion-suppressed
/// band-limited spectrum with the selected dominant frequency.
#[wasm_bindgen]
pub fn window_spectra(params_json: &str, t_ms: f64) -> String {
    match compute_spectra(params_json, t_ms) {
        Ok(s) => s,
        Err(e) => err_json(e),
    }
}

fn compute_spectra(params_json: &str, t_ms: f64) -> Result<String, String> {
    let params: DemoParams =
        serde_json::from_str(params_json).map_err(|e| format!("bad params: {e}"))?;
    let spec = params.to_spec();
    let (samples, _) = synth::synth_trace(&spec).map_err(|e| e.to_string())?;

    let cfg = params.to_config();
    let mut sliding = window::SlidingWindow::new(window::WindowConfig {
        window_seconds: cfg.window_seconds,
        hop_samples: cfg.hop_samples,
        gap_reset_seconds: cfg.gap_reset_seconds,
    });
    let mut chosen: Option<window::SignalWindow> = None;
    'outer: for &s in &samples {
        for w in sliding.push(s) {
            let keep = w.t_start_ms >= t_ms || chosen.is_none();
            if keep {
                let past = w.t_start_ms >= t_ms;
                chosen = Some(w);
                if past {
                    break 'outer;
                }
            }
        }
    }
    let w = chosen.ok_or("trace too short for one analysis window")?;

    let raw = facepulse_core::pos_extract(&w.r, &w.g, &w.b, w.fs, w.t_start_ms)
        .map_err(|e| e.to_string())?;
    let rppg_spec = spectral::amplitude_spectrum(&raw.values, w.fs).map_err(|e| e.to_string())?;
    let pitch = spectral::amplitude_spectrum(&w.pitch, w.fs).map_err(|e| e.to_string())?;
    let roll = spectral::amplitude_spectrum(&w.roll, w.fs).map_err(|e| e.to_string())?;
    let yaw = spectral::amplitude_spectrum(&w.yaw, w.fs).map_err(|e| e.to_string())?;
    let motion =
        spectral::combine_motion_spectra(&pitch, &roll, &yaw).map_err(|e| e.to_string())?;

    // Rescale the motion spectrum exactly as suppression does, so the plot
    // shows what actually gets subtracted.
    let in_band_max = |s: &spectral::AmplitudeSpectrum| -> f64 {
        s.magnitudes
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = s.bin_freq(*k);
                f >= cfg.band_low_hz && f <= cfg.band_high_hz
            })
            .map(|(_, m)| *m)
            .fold(0.0, f64::max)
    };
    let motion_max = in_band_max(&motion);
    let scale = if motion_max > 0.0 {
        in_band_max(&rppg_spec) / motion_max
    } else {
        0.0
    };
    let motion_scaled: Vec<f64> = motion.magnitudes.iter().map(|m| m * scale).collect();

    let suppressed = if cfg.motion_suppression {
        spectral::suppress_motion(&rppg_spec, &motion, cfg.band_low_hz, cfg.band_high_hz)
            .map_err(|e| e.to_string())?
    } else {
        rppg_spec.clone()
    };
    let banded = spectral::band_limit(&suppressed, cfg.band_low_hz, cfg.band_high_hz);
    let f0_hz = spectral::dominant_frequency(&banded).ok();

    let freqs_hz = (0..banded.magnitudes.len())
        .map(|k| banded.bin_freq(k))
        .collect();
    let result = SpectraResult {
        t_start_ms: w.t_start_ms,
        freqs_hz,
        raw_rppg: rppg_spec.magnitudes,
        motion_scaled,
        suppressed_banded: banded.magnitudes,
        f0_hz,
        band_low_hz: cfg.band_low_hz,
        band_high_hz: cfg.band_high_hz,
        source_rate_hz: w.source_rate_hz,
    };
    serde_json::to_string(&result).map_err(|e| e.to_string())
}
