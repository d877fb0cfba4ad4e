//! Peak detection on the finalized BVP stream and IBI extraction.
//!
//! The narrow-band BVP is close to sinusoidal, so detection is local maxima
//! gated by prominence (0.3x the segment deviation) and a minimum separation
//! of 0.6 of the locally dominant pulse period. Intervals outside the
//! physiological range are gated out together with the implicated beat.

use thiserror::Error;

/// Physiological IBI gate, ms (240 down to 30 bpm; wider than the analysis
/// band so true variability at the band edges is not clipped).
pub const IBI_MIN_MS: f64 = 250.0;
pub const IBI_MAX_MS: f64 = 2000.0;

#[derive(Debug, Error, PartialEq)]
pub enum BeatError {
    #[error("beat times must be strictly increasing")]
    NonMonotoneBeats,
}

#[derive(Debug, Clone, Copy)]
pub struct PeakParams {
    /// Minimum peak separation as a fraction of the dominant period.
    pub min_distance_frac: f64,
    /// Prominence threshold as a fraction of the segment's deviation.
    pub prominence_frac: f64,
}

impl Default for PeakParams {
    fn default() -> Self {
        Self {
            min_distance_frac: 0.6,
            prominence_frac: 0.3,
        }
    }
}

/// Dominant pulse frequency per region, recorded as each analysis window is
/// accepted. Lookup returns the entry in effect at a given time.
#[derive(Debug, Clone, Default)]
pub struct F0History {
    entries: Vec<(f64, f64)>,
}

impl F0History {
    pub fn push(&mut self, t_ms: f64, f0_hz: f64) {
        self.entries.push((t_ms, f0_hz));
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Local dominant frequency at `t_ms`: the latest entry at or before it,
    /// or the first entry for earlier times.
    pub fn f0_at(&self, t_ms: f64) -> Option<f64> {
        if self.entries.is_empty() {
            return None;
        }
        match self
            .entries
            .partition_point(|(t, _)| *t <= t_ms)
            .checked_sub(1)
        {
            Some(idx) => Some(self.entries[idx].1),
            None => Some(self.entries[0].1),
        }
    }
}

/// Inter-beat intervals with the beats that bound them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IbiSequence {
    /// Beat timestamps that survived gating, ms, strictly increasing.
    pub beat_times: Vec<f64>,
    /// Successive differences, ms; `ibis[i] == beat_times[i+1] - beat_times[i]`.
    pub ibis: Vec<f64>,
}

impl IbiSequence {
    /// Time of the beat ending interval `i`.
    pub fn ibi_end_time(&self, i: usize) -> f64 {
        self.beat_times[i + 1]
    }

    pub fn span_ms(&self) -> f64 {
        match (self.beat_times.first(), self.beat_times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

fn prominence(values: &[f64], peak: usize) -> f64 {
    let v = values[peak];
    let mut left_min = v;
    let mut i = peak;
    while i > 0 {
        i -= 1;
        if values[i] > v {
            break;
        }
        left_min = left_min.min(values[i]);
    }
    let mut right_min = v;
    let mut i = peak;
    while i + 1 < values.len() {
        i += 1;
        if values[i] > v {
            break;
        }
        right_min = right_min.min(values[i]);
    }
    v - left_min.max(right_min)
}

/// Detect pulse peaks on a finalized BVP segment. Times are reported at
/// sample resolution relative to `t0_ms`.
pub fn detect_peaks(
    values: &[f64],
    fs: f64,
    t0_ms: f64,
    f0_history: &F0History,
    params: PeakParams,
) -> Vec<f64> {
    let n = values.len();
    if n < 3 {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    if std == 0.0 {
        return Vec::new();
    }
    let prominence_min = params.prominence_frac * std;

    // Local maxima; plateaus contribute their first sample.
    let mut candidates: Vec<usize> = Vec::new();
    for i in 1..n - 1 {
        if values[i] > values[i - 1]
            && values[i] >= values[i + 1]
            && prominence(values, i) >= prominence_min
        {
            candidates.push(i);
        }
    }

    // Enforce the period-derived minimum distance, highest peaks first.
    let step = 1000.0 / fs;
    let min_dist_samples = |idx: usize| -> f64 {
        let t = t0_ms + idx as f64 * step;
        let f0 = f0_history.f0_at(t).unwrap_or(crate::spectral::BAND_HIGH_HZ);
        params.min_distance_frac / f0 * fs
    };
    let mut by_height = candidates.clone();
    by_height.sort_by(|a, b| values[*b].partial_cmp(&values[*a]).unwrap());
    let mut kept: Vec<usize> = Vec::new();
    for idx in by_height {
        let min_dist = min_dist_samples(idx);
        if kept
            .iter()
            .all(|&k| (k as f64 - idx as f64).abs() >= min_dist)
        {
            kept.push(idx);
        }
    }
    kept.sort_unstable();
    kept.into_iter().map(|i| t0_ms + i as f64 * step).collect()
}

/// Build the gated IBI sequence from detected (or reference) beat times.
/// Intervals outside `[IBI_MIN_MS, IBI_MAX_MS]` are discarded together with
/// the earlier beat of the offending pair; the second value returned counts
/// those gating events.
pub fn extract_ibis(beat_times: &[f64]) -> Result<(IbiSequence, u64), BeatError> {
    if beat_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BeatError::NonMonotoneBeats);
    }
    let mut kept: Vec<f64> = Vec::new();
    let mut gated = 0u64;
    for &b in beat_times {
        loop {
            match kept.last() {
                None => {
                    kept.push(b);
                    break;
                }
                Some(&last) => {
                    let d = b - last;
                    if (IBI_MIN_MS..=IBI_MAX_MS).contains(&d) {
                        kept.push(b);
                        break;
                    }
                    kept.pop();
                    gated += 1;
                }
            }
        }
    }
    let ibis = kept.windows(2).map(|w| w[1] - w[0]).collect();
    Ok((
        IbiSequence {
            beat_times: kept,
            ibis,
        },
        gated,
    ))
}
