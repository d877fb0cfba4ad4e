//! Running analysis window over the incoming frame stream.
//!
//! Frames arrive at whatever rate the tracker produced them. This module
//! keeps a rolling buffer, picks the uniform target rate (30 or 60 Hz,
//! whichever is closer to the observed source rate), and emits fixed-length
//! windows of all six channels resampled onto the uniform grid. The window
//! spans 8.53 s: 256 samples at 30 Hz or 512 at 60 Hz.

use crate::trace::FrameSample;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("source frame rate must be positive")]
    NonPositiveRate,
    #[error("need at least two samples to resample")]
    InsufficientSamples,
}

#[derive(Debug, Clone)]
pub struct WindowConfig {
    /// Analysis window span in seconds.
    pub window_seconds: f64,
    /// Grid samples to advance between emitted windows (1 = per-frame update).
    pub hop_samples: usize,
    /// Frame gaps longer than this reset the buffer instead of interpolating
    /// across missing data.
    pub gap_reset_seconds: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_seconds: 8.53,
            hop_samples: 1,
            gap_reset_seconds: 2.0,
        }
    }
}

/// A fixed-length, uniformly resampled multi-channel segment.
#[derive(Debug, Clone)]
pub struct SignalWindow {
    /// Uniform sampling rate, 30 or 60 Hz.
    pub fs: f64,
    /// Sample count (256 at 30 Hz, 512 at 60 Hz for the default span).
    pub n: usize,
    /// Timestamp of the first sample, ms.
    pub t_start_ms: f64,
    /// Grid samples advanced since the previous window (n for the first).
    pub hop: usize,
    /// Median source frame rate observed inside this window, for low-rate
    /// diagnostics.
    pub source_rate_hz: f64,
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
    pub pitch: Vec<f64>,
    pub roll: Vec<f64>,
    pub yaw: Vec<f64>,
}

impl SignalWindow {
    /// Timestamp just past the last sample, ms.
    pub fn t_end_ms(&self) -> f64 {
        self.t_start_ms + self.n as f64 * 1000.0 / self.fs
    }
}

/// Pick the uniform target rate: 30 or 60 Hz, whichever is nearer to the
/// observed source rate. The midpoint (45) resolves to 30.
pub fn select_target_rate(source_rate_hz: f64) -> Result<f64, WindowError> {
    if !(source_rate_hz > 0.0) {
        return Err(WindowError::NonPositiveRate);
    }
    if (source_rate_hz - 30.0).abs() <= (source_rate_hz - 60.0).abs() {
        Ok(30.0)
    } else {
        Ok(60.0)
    }
}

/// Linearly interpolate irregular `(t_ms, value)` samples onto a uniform grid
/// of `n` points starting at `t_start_ms` with rate `fs`. Grid points outside
/// the sampled range clamp to the nearest sample.
pub fn resample_linear(
    samples: &[(f64, f64)],
    fs: f64,
    t_start_ms: f64,
    n: usize,
) -> Result<Vec<f64>, WindowError> {
    if samples.len() < 2 {
        return Err(WindowError::InsufficientSamples);
    }
    let step = 1000.0 / fs;
    let last = samples.len() - 1;
    let mut out = Vec::with_capacity(n);
    let mut j = 0usize;
    for i in 0..n {
        let t = t_start_ms + i as f64 * step;
        if t <= samples[0].0 {
            out.push(samples[0].1);
            continue;
        }
        if t >= samples[last].0 {
            out.push(samples[last].1);
            continue;
        }
        while samples[j + 1].0 < t {
            j += 1;
        }
        let (t0, v0) = samples[j];
        let (t1, v1) = samples[j + 1];
        let u = (t - t0) / (t1 - t0);
        out.push(v0 * (1.0 - u) + v1 * u);
    }
    Ok(out)
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Streaming window assembler: push frames, collect emitted windows.
#[derive(Debug)]
pub struct SlidingWindow {
    cfg: WindowConfig,
    buf: VecDeque<FrameSample>,
    next_start_ms: Option<f64>,
    emitted_since_reset: bool,
    resets: u64,
}

impl SlidingWindow {
    pub fn new(cfg: WindowConfig) -> Self {
        Self {
            cfg,
            buf: VecDeque::new(),
            next_start_ms: None,
            emitted_since_reset: false,
            resets: 0,
        }
    }

    /// Number of buffer resets triggered by long gaps.
    pub fn resets(&self) -> u64 {
        self.resets
    }

    fn reset(&mut self) {
        self.buf.clear();
        self.next_start_ms = None;
        self.emitted_since_reset = false;
        self.resets += 1;
    }

    /// Median inter-frame interval of the buffered samples, in ms.
    fn median_dt_ms(&self) -> f64 {
        let dts: Vec<f64> = self
            .buf
            .iter()
            .zip(self.buf.iter().skip(1))
            .map(|(a, b)| b.t_ms - a.t_ms)
            .collect();
        median(dts)
    }

    /// Push one validated frame. Returns every window that became due; with
    /// the default hop of 1 this is at most one per frame at steady rates.
    pub fn push(&mut self, sample: FrameSample) -> Vec<SignalWindow> {
        if let Some(last) = self.buf.back() {
            let dt = sample.t_ms - last.t_ms;
            if dt <= 0.0 || dt > self.cfg.gap_reset_seconds * 1000.0 {
                self.reset();
            }
        }
        self.buf.push_back(sample);
        if self.buf.len() < 2 {
            return Vec::new();
        }

        let dt_med = self.median_dt_ms();
        let source_rate = 1000.0 / dt_med;
        let fs = match select_target_rate(source_rate) {
            Ok(fs) => fs,
            Err(_) => return Vec::new(),
        };
        let n = (self.cfg.window_seconds * fs).round() as usize;
        if n < 2 {
            return Vec::new();
        }
        let hop = self.cfg.hop_samples.clamp(1, n);
        let step = 1000.0 / fs;

        if self.next_start_ms.is_none() {
            self.next_start_ms = Some(self.buf.front().unwrap().t_ms);
        }

        let mut windows = Vec::new();
        loop {
            let t_start = self.next_start_ms.unwrap();
            let t_last_grid = t_start + (n - 1) as f64 * step;
            if t_last_grid > self.buf.back().unwrap().t_ms + 1e-6 {
                break;
            }
            windows.push(self.emit(t_start, fs, n, source_rate));
            self.next_start_ms = Some(t_start + hop as f64 * step);
            self.emitted_since_reset = true;
            // Keep one sample at or before the next window start for
            // interpolation bracketing.
            while self.buf.len() >= 2 && self.buf[1].t_ms <= self.next_start_ms.unwrap() {
                self.buf.pop_front();
            }
        }
        windows
    }

    fn emit(&self, t_start: f64, fs: f64, n: usize, source_rate: f64) -> SignalWindow {
        let pairs = |f: fn(&FrameSample) -> f64| -> Vec<(f64, f64)> {
            self.buf.iter().map(|s| (s.t_ms, f(s))).collect()
        };
        let resample = |f: fn(&FrameSample) -> f64| -> Vec<f64> {
            resample_linear(&pairs(f), fs, t_start, n).expect("buffer holds >= 2 samples")
        };
        SignalWindow {
            fs,
            n,
            t_start_ms: t_start,
            hop: if self.emitted_since_reset {
                self.cfg.hop_samples.clamp(1, n)
            } else {
                n
            },
            source_rate_hz: source_rate,
            r: resample(|s| s.r_mean),
            g: resample(|s| s.g_mean),
            b: resample(|s| s.b_mean),
            pitch: resample(|s| s.pitch),
            roll: resample(|s| s.roll),
            yaw: resample(|s| s.yaw),
        }
    }
}
