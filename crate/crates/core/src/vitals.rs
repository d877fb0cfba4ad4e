//! Heart rate and heart-rate-variability metrics from the IBI sequence.
//!
//! HR over a window is the inverse of the mean IBI inside it. HRV is
//! summarized by RMSSD (time domain) and by LF/HF band powers of the IBI
//! tachogram in normalized units (frequency domain). The tachogram is
//! sampled at 2.5 Hz, mean-removed, zero-padded to the nearest power of two
//! and passed through Welch's PSD estimate.

use crate::beats::IbiSequence;
use crate::fft;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tachogram resampling rate, Hz.
pub const TACHOGRAM_FS: f64 = 2.5;
/// LF band, Hz.
pub const LF_BAND: (f64, f64) = (0.04, 0.15);
/// HF band, Hz.
pub const HF_BAND: (f64, f64) = (0.15, 0.4);
/// Minimum beat record span for frequency-domain metrics, ms.
pub const MIN_SPAN_MS: f64 = 30_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum VitalsError {
    #[error("not enough beats in the window")]
    InsufficientBeats,
    #[error("beat record spans less than 30 s")]
    InsufficientDuration,
    #[error("no LF or HF power")]
    ZeroPower,
}

/// One HR measurement over a fixed reporting window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrWindow {
    pub t_start_ms: f64,
    pub t_end_ms: f64,
    pub bpm: f64,
}

/// Windowed HR series plus whole-record HRV metrics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VitalsReport {
    pub hr_series: Vec<HrWindow>,
    pub beat_times_ms: Vec<f64>,
    pub rmssd_ms: Option<f64>,
    pub lf_nu: Option<f64>,
    pub hf_nu: Option<f64>,
    pub lf_hf_ratio: Option<f64>,
    pub n_beats: usize,
}

/// HR in bpm from the IBIs falling in one window: 60000 / mean(IBI ms).
pub fn heart_rate(ibis_in_window: &[f64]) -> Result<f64, VitalsError> {
    if ibis_in_window.len() < 2 {
        return Err(VitalsError::InsufficientBeats);
    }
    let mean = ibis_in_window.iter().sum::<f64>() / ibis_in_window.len() as f64;
    Ok(60_000.0 / mean)
}

/// HR series over a fixed grid of `window_seconds` windows anchored at
/// `t0_ms`. An IBI belongs to the window containing its ending beat. Windows
/// with fewer than two IBIs are absent, not zero.
pub fn hr_series(
    seq: &IbiSequence,
    t0_ms: f64,
    t_end_ms: f64,
    window_seconds: f64,
) -> Vec<HrWindow> {
    let w_ms = window_seconds * 1000.0;
    let mut out = Vec::new();
    if w_ms <= 0.0 || t_end_ms <= t0_ms {
        return out;
    }
    let n_windows = ((t_end_ms - t0_ms) / w_ms).ceil() as usize;
    for k in 0..n_windows {
        let start = t0_ms + k as f64 * w_ms;
        let end = start + w_ms;
        let ibis: Vec<f64> = (0..seq.ibis.len())
            .filter(|&i| {
                let t = seq.ibi_end_time(i);
                t >= start && t < end
            })
            .map(|i| seq.ibis[i])
            .collect();
        if let Ok(bpm) = heart_rate(&ibis) {
            out.push(HrWindow {
                t_start_ms: start,
                t_end_ms: end,
                bpm,
            });
        }
    }
    out
}

/// Root mean square of successive IBI differences: N intervals yield N-1
/// differences averaged with 1/(N-1).
pub fn rmssd(ibis: &[f64]) -> Result<f64, VitalsError> {
    if ibis.len() < 3 {
        return Err(VitalsError::InsufficientBeats);
    }
    let sum_sq: f64 = ibis.windows(2).map(|w| (w[0] - w[1]) * (w[0] - w[1])).sum();
    Ok((sum_sq / (ibis.len() - 1) as f64).sqrt())
}

/// Welch PSD with Hann taper, 50% overlap, per-segment mean removal.
/// Returns one-sided density over bins `k * fs / nperseg`.
pub fn welch_psd(x: &[f64], fs: f64, nperseg: usize) -> (Vec<f64>, Vec<f64>) {
    let nperseg = nperseg.min(x.len()).max(2);
    let hop = (nperseg / 2).max(1);
    let window: Vec<f64> = (0..nperseg)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / nperseg as f64).cos()))
        .collect();
    let win_sum_sq: f64 = window.iter().map(|w| w * w).sum();
    let n_bins = nperseg / 2 + 1;
    let mut psd = vec![0.0; n_bins];
    let mut segments = 0usize;
    let mut start = 0usize;
    while start + nperseg <= x.len() {
        let seg = &x[start..start + nperseg];
        let mean = seg.iter().sum::<f64>() / nperseg as f64;
        let tapered: Vec<f64> = seg
            .iter()
            .zip(window.iter())
            .map(|(v, w)| (v - mean) * w)
            .collect();
        let spec = fft::forward_real(&tapered);
        for (k, p) in psd.iter_mut().enumerate() {
            let mag_sq = spec[k].norm_sqr();
            let one_sided = if k == 0 || (nperseg.is_multiple_of(2) && k == n_bins - 1) {
                1.0
            } else {
                2.0
            };
            *p += one_sided * mag_sq / (fs * win_sum_sq);
        }
        segments += 1;
        start += hop;
    }
    if segments > 1 {
        for p in psd.iter_mut() {
            *p /= segments as f64;
        }
    }
    let freqs = (0..n_bins)
        .map(|k| k as f64 * fs / nperseg as f64)
        .collect();
    (freqs, psd)
}

/// Step-function tachogram sampled on the 2.5 Hz grid spanning the beat
/// record: the value at time t is the IBI of the interval containing t.
pub fn tachogram(seq: &IbiSequence) -> Vec<f64> {
    let beats = &seq.beat_times;
    if beats.len() < 2 {
        return Vec::new();
    }
    let t_first = beats[0];
    let t_last = *beats.last().unwrap();
    let step = 1000.0 / TACHOGRAM_FS;
    let n = ((t_last - t_first) / step).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        let t = t_first + k as f64 * step;
        while seg + 1 < seq.ibis.len() && beats[seg + 1] <= t {
            seg += 1;
        }
        out.push(seq.ibis[seg]);
    }
    out
}

/// Normalized LF/HF metrics from the beat record.
pub fn frequency_metrics(seq: &IbiSequence) -> Result<(f64, f64, f64), VitalsError> {
    if seq.span_ms() < MIN_SPAN_MS {
        return Err(VitalsError::InsufficientDuration);
    }
    let mut tacho = tachogram(seq);
    let mean = tacho.iter().sum::<f64>() / tacho.len() as f64;
    for v in tacho.iter_mut() {
        *v -= mean;
    }
    tacho.resize(tacho.len().next_power_of_two(), 0.0);
    let nperseg = 256.min(tacho.len());
    let (freqs, psd) = welch_psd(&tacho, TACHOGRAM_FS, nperseg);
    let df = TACHOGRAM_FS / nperseg as f64;
    let mut lf = 0.0;
    let mut hf = 0.0;
    for (f, p) in freqs.iter().zip(psd.iter()) {
        if *f >= LF_BAND.0 && *f < LF_BAND.1 {
            lf += p * df;
        } else if *f >= HF_BAND.0 && *f <= HF_BAND.1 {
            hf += p * df;
        }
    }
    let total = lf + hf;
    if !(total > 0.0) {
        return Err(VitalsError::ZeroPower);
    }
    Ok((lf / total, hf / total, lf / hf))
}

/// Assemble the full report for a beat record over `[t0_ms, t_end_ms]`.
/// `hrv_window_seconds`, when set, restricts HRV to that trailing span
/// instead of the whole recording.
pub fn build_report(
    seq: &IbiSequence,
    t0_ms: f64,
    t_end_ms: f64,
    hr_window_seconds: f64,
    hrv_window_seconds: Option<f64>,
) -> VitalsReport {
    let series = hr_series(seq, t0_ms, t_end_ms, hr_window_seconds);
    let hrv_seq_storage;
    let hrv_seq = match hrv_window_seconds {
        Some(w) if w > 0.0 => {
            let cutoff = t_end_ms - w * 1000.0;
            let beats: Vec<f64> = seq
                .beat_times
                .iter()
                .copied()
                .filter(|&t| t >= cutoff)
                .collect();
            let (trimmed, _) = crate::beats::extract_ibis(&beats).expect("sorted subset");
            hrv_seq_storage = trimmed;
            &hrv_seq_storage
        }
        _ => seq,
    };
    let rmssd_ms = rmssd(&hrv_seq.ibis).ok();
    let freq = frequency_metrics(hrv_seq).ok();
    VitalsReport {
        hr_series: series,
        beat_times_ms: seq.beat_times.clone(),
        rmssd_ms,
        lf_nu: freq.map(|(lf, _, _)| lf),
        hf_nu: freq.map(|(_, hf, _)| hf),
        lf_hf_ratio: freq.map(|(_, _, r)| r),
        n_beats: seq.beat_times.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beats::extract_ibis;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::TAU;

    #[test]
    fn hr_from_constant_ibis() {
        assert_eq!(heart_rate(&[800.0, 800.0]).unwrap(), 75.0);
        assert_eq!(heart_rate(&[1000.0, 1000.0, 1000.0]).unwrap(), 60.0);
    }

    #[test]
    fn hr_from_mixed_ibis() {
        assert_eq!(heart_rate(&[700.0, 900.0]).unwrap(), 75.0);
    }

    #[test]
    fn hr_needs_two_ibis() {
        assert_eq!(heart_rate(&[800.0]), Err(VitalsError::InsufficientBeats));
        assert_eq!(heart_rate(&[]), Err(VitalsError::InsufficientBeats));
    }

    #[test]
    fn hr_invariant_under_permutation() {
        let a = heart_rate(&[700.0, 800.0, 900.0]).unwrap();
        let b = heart_rate(&[900.0, 700.0, 800.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rmssd_of_constant_is_zero() {
        assert_eq!(rmssd(&[800.0, 800.0, 800.0, 800.0]).unwrap(), 0.0);
    }

    #[test]
    fn rmssd_hand_computed() {
        // diffs -10, 20, -15 -> (100 + 400 + 225) / 3 -> sqrt = 15.5456...
        let v = rmssd(&[800.0, 810.0, 790.0, 805.0]).unwrap();
        assert!((v - 15.545632).abs() < 1e-5);
    }

    #[test]
    fn rmssd_alternating_jitter_is_twice_depth() {
        let d = 7.0;
        let ibis: Vec<f64> = (0..20)
            .map(|i| if i % 2 == 0 { 800.0 + d } else { 800.0 - d })
            .collect();
        assert_eq!(rmssd(&ibis).unwrap(), 2.0 * d);
    }

    #[test]
    fn rmssd_needs_three_ibis() {
        assert_eq!(rmssd(&[800.0, 810.0]), Err(VitalsError::InsufficientBeats));
    }

    #[test]
    fn rmssd_invariant_under_reversal_and_scaling() {
        let ibis = [820.0, 790.0, 805.0, 815.0, 795.0];
        let fwd = rmssd(&ibis).unwrap();
        let mut rev = ibis;
        rev.reverse();
        assert!((rmssd(&rev).unwrap() - fwd).abs() < 1e-12);
        let scaled: Vec<f64> = ibis.iter().map(|v| v * 3.0).collect();
        assert!((rmssd(&scaled).unwrap() - 3.0 * fwd).abs() < 1e-9);
        // Scaling IBIs by k divides HR by k.
        let hr = heart_rate(&ibis).unwrap();
        let hr_scaled = heart_rate(&scaled).unwrap();
        assert!((hr_scaled - hr / 3.0).abs() < 1e-9);
    }

    #[test]
    fn rmssd_translation_invariant_through_beat_path() {
        let beats = [0.0, 820.0, 1610.0, 2415.0, 3230.0, 4020.0];
        let shifted: Vec<f64> = beats.iter().map(|b| b + 10.0).collect();
        let (a, _) = extract_ibis(&beats).unwrap();
        let (b, _) = extract_ibis(&shifted).unwrap();
        assert!((rmssd(&a.ibis).unwrap() - rmssd(&b.ibis).unwrap()).abs() < 1e-9);
    }

    fn beats_with_modulation(
        base_ms: f64,
        mod_freq_hz: f64,
        depth_ms: f64,
        duration_ms: f64,
    ) -> IbiSequence {
        let mut beats = vec![0.0];
        loop {
            let t = *beats.last().unwrap();
            if t >= duration_ms {
                break;
            }
            let ibi = base_ms + depth_ms * (TAU * mod_freq_hz * t / 1000.0).sin();
            beats.push(t + ibi);
        }
        extract_ibis(&beats).unwrap().0
    }

    #[test]
    fn lf_modulation_dominates_lf_band() {
        let seq = beats_with_modulation(800.0, 0.10, 50.0, 180_000.0);
        let (lf, hf, ratio) = frequency_metrics(&seq).unwrap();
        assert!(lf >= 0.8, "lf_nu {lf}");
        assert!((lf + hf - 1.0).abs() < 1e-9);
        assert!(ratio > 1.0);
    }

    #[test]
    fn hf_modulation_dominates_hf_band() {
        let seq = beats_with_modulation(800.0, 0.25, 50.0, 180_000.0);
        let (lf, hf, ratio) = frequency_metrics(&seq).unwrap();
        assert!(hf >= 0.8, "hf_nu {hf}");
        assert!((lf + hf - 1.0).abs() < 1e-9);
        assert!(ratio < 1.0);
    }

    #[test]
    fn normalized_units_always_sum_to_one() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let freq = rng.gen_range(0.05..0.35);
            let seq = beats_with_modulation(800.0, freq, rng.gen_range(10.0..60.0), 120_000.0);
            let (lf, hf, _) = frequency_metrics(&seq).unwrap();
            assert!((lf + hf - 1.0).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&lf));
            assert!((0.0..=1.0).contains(&hf));
        }
    }

    #[test]
    fn short_record_is_insufficient() {
        let seq = beats_with_modulation(800.0, 0.1, 20.0, 20_000.0);
        assert_eq!(
            frequency_metrics(&seq),
            Err(VitalsError::InsufficientDuration)
        );
    }

    /// Naive periodogram averaging, the independent oracle for `welch_psd`.
    fn naive_welch(x: &[f64], fs: f64, nperseg: usize) -> Vec<f64> {
        let hop = nperseg / 2;
        let window: Vec<f64> = (0..nperseg)
            .map(|i| 0.5 * (1.0 - (TAU * i as f64 / nperseg as f64).cos()))
            .collect();
        let wss: f64 = window.iter().map(|w| w * w).sum();
        let n_bins = nperseg / 2 + 1;
        let mut psd = vec![0.0; n_bins];
        let mut segs = 0;
        let mut start = 0;
        while start + nperseg <= x.len() {
            let seg = &x[start..start + nperseg];
            let mean = seg.iter().sum::<f64>() / nperseg as f64;
            for (k, p) in psd.iter_mut().enumerate() {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, (&v, &w)) in seg.iter().zip(window.iter()).enumerate() {
                    let phase = TAU * k as f64 * i as f64 / nperseg as f64;
                    re += (v - mean) * w * phase.cos();
                    im -= (v - mean) * w * phase.sin();
                }
                let scale = if k == 0 || k == n_bins - 1 { 1.0 } else { 2.0 };
                *p += scale * (re * re + im * im) / (fs * wss);
            }
            segs += 1;
            start += hop;
        }
        for p in psd.iter_mut() {
            *p /= segs as f64;
        }
        psd
    }

    #[test]
    fn welch_matches_naive_oracle() {
        let mut rng = StdRng::seed_from_u64(19);
        let x: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, psd) = welch_psd(&x, 2.5, 64);
        let oracle = naive_welch(&x, 2.5, 64);
        assert_eq!(psd.len(), oracle.len());
        for (a, b) in psd.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn welch_places_tone_power_in_right_bin() {
        let fs = 2.5;
        let n = 512;
        let x: Vec<f64> = (0..n).map(|i| (TAU * 0.1 * i as f64 / fs).sin()).collect();
        let (freqs, psd) = welch_psd(&x, fs, 256);
        let peak = psd
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((freqs[peak] - 0.1).abs() <= fs / 256.0);
    }

    #[test]
    fn hr_series_windows_align_to_grid() {
        // Beats every 800 ms for 60 s.
        let beats: Vec<f64> = (0..75).map(|i| i as f64 * 800.0).collect();
        let (seq, _) = extract_ibis(&beats).unwrap();
        let series = hr_series(&seq, 0.0, 59_200.0, 15.0);
        assert_eq!(series.len(), 4);
        for (k, w) in series.iter().enumerate() {
            assert_eq!(w.t_start_ms, k as f64 * 15_000.0);
            assert!((w.bpm - 75.0).abs() < 1e-9);
            assert!(w.bpm > 20.0 && w.bpm < 250.0);
        }
    }

    #[test]
    fn hr_series_absent_when_too_few_beats() {
        let (seq, _) = extract_ibis(&[100.0, 900.0]).unwrap();
        // One IBI only: every window is absent.
        assert!(hr_series(&seq, 0.0, 30_000.0, 15.0).is_empty());
    }
}
