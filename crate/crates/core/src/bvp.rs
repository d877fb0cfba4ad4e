//! Overlap-add assembly of filtered windows into one continuous BVP stream.
//!
//! Each filtered window is normalized to zero mean and unit deviation, then
//! added into the stream at its true temporal position. The accumulator keeps
//! the running sum and the per-sample overlap count separately; reported
//! values divide on read, so every position lies in the same amplitude range
//! and accumulation order does not matter.

use crate::spectral::FilteredBvpWindow;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BvpError {
    #[error("window has zero variance")]
    ZeroVariance,
    #[error("window precedes the stream start")]
    NegativePlacement,
}

/// Normalize a filtered window to zero mean, unit standard deviation.
pub fn normalize_window(window: &FilteredBvpWindow) -> Result<FilteredBvpWindow, BvpError> {
    let n = window.values.len() as f64;
    let mean = window.values.iter().sum::<f64>() / n;
    let var = window
        .values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    if std == 0.0 || !std.is_finite() {
        return Err(BvpError::ZeroVariance);
    }
    Ok(FilteredBvpWindow {
        values: window.values.iter().map(|v| (v - mean) / std).collect(),
        fs: window.fs,
        t_start_ms: window.t_start_ms,
        f0_hz: window.f0_hz,
    })
}

/// The growing overlap-added pulse waveform.
#[derive(Debug, Clone)]
pub struct BvpStream {
    fs: f64,
    t0_ms: Option<f64>,
    sums: Vec<f64>,
    counts: Vec<u32>,
    finalized_upto: usize,
}

impl BvpStream {
    pub fn new(fs: f64) -> Self {
        Self {
            fs,
            t0_ms: None,
            sums: Vec::new(),
            counts: Vec::new(),
            finalized_upto: 0,
        }
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    /// Timestamp of sample 0; set by the first window added.
    pub fn t0_ms(&self) -> Option<f64> {
        self.t0_ms
    }

    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    /// Index before which no future window can write.
    pub fn finalized_upto(&self) -> usize {
        self.finalized_upto
    }

    pub fn count_at(&self, idx: usize) -> u32 {
        self.counts.get(idx).copied().unwrap_or(0)
    }

    /// Reported (overlap-averaged) value at a sample index.
    pub fn value_at(&self, idx: usize) -> f64 {
        match self.counts.get(idx) {
            Some(&c) if c > 0 => self.sums[idx] / c as f64,
            _ => 0.0,
        }
    }

    pub fn time_at(&self, idx: usize) -> f64 {
        self.t0_ms.unwrap_or(0.0) + idx as f64 * 1000.0 / self.fs
    }

    /// Iterator over `(t_ms, reported value)` pairs.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(move |i| (self.time_at(i), self.value_at(i)))
    }

    /// Reported values over an index range.
    pub fn reported(&self, start: usize, end: usize) -> Vec<f64> {
        (start..end.min(self.len()))
            .map(|i| self.value_at(i))
            .collect()
    }

    /// Add a normalized window at the stream position implied by its
    /// timestamp. The first window anchors the stream's time origin.
    pub fn overlap_add(&mut self, window: &FilteredBvpWindow) -> Result<(), BvpError> {
        let t0 = *self.t0_ms.get_or_insert(window.t_start_ms);
        let offset_f = (window.t_start_ms - t0) * self.fs / 1000.0;
        let offset = offset_f.round();
        if offset < 0.0 {
            return Err(BvpError::NegativePlacement);
        }
        let offset = offset as usize;
        let end = offset + window.values.len();
        if end > self.sums.len() {
            self.sums.resize(end, 0.0);
            self.counts.resize(end, 0);
        }
        for (i, &v) in window.values.iter().enumerate() {
            self.sums[offset + i] += v;
            self.counts[offset + i] += 1;
        }
        Ok(())
    }

    /// Mark samples older than `now_ms - window_seconds` as final and return
    /// the newly finalized index range. Monotone calls produce disjoint,
    /// contiguous ranges.
    pub fn finalize_region(&mut self, now_ms: f64, window_seconds: f64) -> std::ops::Range<usize> {
        let Some(t0) = self.t0_ms else {
            return 0..0;
        };
        let cutoff_ms = now_ms - window_seconds * 1000.0;
        let raw = (cutoff_ms - t0) * self.fs / 1000.0;
        let new_upto = if raw <= 0.0 {
            0
        } else {
            ((raw + 1e-9).floor() as usize).min(self.len())
        };
        let start = self.finalized_upto;
        if new_upto > start {
            self.finalized_upto = new_upto;
            start..new_upto
        } else {
            start..start
        }
    }

    /// Finalize everything accumulated so far (end of stream).
    pub fn finalize_all(&mut self) -> std::ops::Range<usize> {
        let start = self.finalized_upto;
        self.finalized_upto = self.len();
        start..self.finalized_upto
    }
}
