//! Scoring predictions against ground truth.
//!
//! Truth metrics run through the same operations as the predictions: truth
//! beats are gated with `extract_ibis`, windowed with the same grid, and the
//! same HR/RMSSD/LF-HF code paths produce the reference values. Errors are
//! mean absolute differences.

use crate::beats::extract_ibis;
use crate::trace::GroundTruth;
use crate::vitals::{self, HrWindow, VitalsReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction and truth share no windows")]
    NoOverlap,
    #[error("beat record spans less than 30 s on one side")]
    InsufficientDuration,
}

/// One window's prediction/truth pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowScore {
    pub t_start_ms: f64,
    pub t_end_ms: f64,
    pub predicted_bpm: Option<f64>,
    pub truth_bpm: f64,
    pub abs_error_bpm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Mean absolute HR error over windows where both sides exist.
    pub mae_bpm: Option<f64>,
    pub per_window: Vec<WindowScore>,
    /// Fraction of truth-covered windows that have a prediction.
    pub coverage: f64,
    pub rmssd_error_ms: Option<f64>,
    pub lf_nu_error: Option<f64>,
    pub hf_nu_error: Option<f64>,
    pub ratio_error: Option<f64>,
    pub truth_rmssd_ms: Option<f64>,
    pub predicted_rmssd_ms: Option<f64>,
}

/// Truth HR series on the same fixed grid the pipeline reports on.
fn truth_hr_series(truth: &GroundTruth, t_end_ms: f64, window_seconds: f64) -> Vec<HrWindow> {
    match truth {
        GroundTruth::Beats(beats) => {
            let (seq, _) = extract_ibis(beats).expect("ground truth beats validated at parse");
            vitals::hr_series(&seq, 0.0, t_end_ms, window_seconds)
        }
        GroundTruth::HrSeries(series) => {
            let w_ms = window_seconds * 1000.0;
            let n_windows = (t_end_ms / w_ms).ceil() as usize;
            let mut out = Vec::new();
            for k in 0..n_windows {
                let start = k as f64 * w_ms;
                let end = start + w_ms;
                let vals: Vec<f64> = series
                    .iter()
                    .filter(|(t, _)| *t >= start && *t < end)
                    .map(|(_, bpm)| *bpm)
                    .collect();
                if !vals.is_empty() {
                    out.push(HrWindow {
                        t_start_ms: start,
                        t_end_ms: end,
                        bpm: vals.iter().sum::<f64>() / vals.len() as f64,
                    });
                }
            }
            out
        }
    }
}

fn truth_end_ms(truth: &GroundTruth) -> f64 {
    match truth {
        GroundTruth::Beats(beats) => beats.last().copied().unwrap_or(0.0),
        GroundTruth::HrSeries(series) => series.last().map(|(t, _)| *t).unwrap_or(0.0),
    }
}

/// Windowed HR MAE: truth HR per window comes from the ground-truth beats by
/// the same mean-IBI rule the pipeline uses.
pub fn evaluate_hr(
    predicted: &[HrWindow],
    truth: &GroundTruth,
    window_seconds: f64,
) -> Result<EvalResult, EvalError> {
    let pred_end = predicted.last().map(|w| w.t_end_ms).unwrap_or(0.0);
    let t_end = truth_end_ms(truth).max(pred_end);
    let truth_series = truth_hr_series(truth, t_end, window_seconds);
    if truth_series.is_empty() {
        return Err(EvalError::NoOverlap);
    }

    let mut per_window = Vec::with_capacity(truth_series.len());
    let mut abs_errors = Vec::new();
    for tw in &truth_series {
        let pred = predicted
            .iter()
            .find(|pw| (pw.t_start_ms - tw.t_start_ms).abs() < 1e-6)
            .map(|pw| pw.bpm);
        let abs_error = pred.map(|p| (p - tw.bpm).abs());
        if let Some(e) = abs_error {
            abs_errors.push(e);
        }
        per_window.push(WindowScore {
            t_start_ms: tw.t_start_ms,
            t_end_ms: tw.t_end_ms,
            predicted_bpm: pred,
            truth_bpm: tw.bpm,
            abs_error_bpm: abs_error,
        });
    }
    if abs_errors.is_empty() {
        return Err(EvalError::NoOverlap);
    }
    Ok(EvalResult {
        mae_bpm: Some(abs_errors.iter().sum::<f64>() / abs_errors.len() as f64),
        coverage: abs_errors.len() as f64 / truth_series.len() as f64,
        per_window,
        ..EvalResult::default()
    })
}

/// HRV errors: truth metrics are computed from the ground-truth beats through
/// the identical vitals operations.
pub fn evaluate_hrv(
    predicted: &VitalsReport,
    truth_beats: &[f64],
) -> Result<EvalResult, EvalError> {
    let (truth_seq, _) = extract_ibis(truth_beats).expect("ground truth beats validated at parse");
    if truth_seq.span_ms() < vitals::MIN_SPAN_MS {
        return Err(EvalError::InsufficientDuration);
    }
    let truth_rmssd = vitals::rmssd(&truth_seq.ibis).ok();
    let truth_freq = vitals::frequency_metrics(&truth_seq).ok();

    let rmssd_error_ms = match (predicted.rmssd_ms, truth_rmssd) {
        (Some(p), Some(t)) => Some((p - t).abs()),
        _ => None,
    };
    if rmssd_error_ms.is_none() {
        return Err(EvalError::InsufficientDuration);
    }
    let freq_err = |p: Option<f64>, t: Option<f64>| match (p, t) {
        (Some(p), Some(t)) => Some((p - t).abs()),
        _ => None,
    };
    Ok(EvalResult {
        rmssd_error_ms,
        lf_nu_error: freq_err(predicted.lf_nu, truth_freq.map(|f| f.0)),
        hf_nu_error: freq_err(predicted.hf_nu, truth_freq.map(|f| f.1)),
        ratio_error: freq_err(predicted.lf_hf_ratio, truth_freq.map(|f| f.2)),
        truth_rmssd_ms: truth_rmssd,
        predicted_rmssd_ms: predicted.rmssd_ms,
        coverage: 1.0,
        ..EvalResult::default()
    })
}

/// Combined HR + HRV scoring when beats ground truth is available.
pub fn evaluate(
    predicted: &VitalsReport,
    truth: &GroundTruth,
    window_seconds: f64,
) -> Result<EvalResult, EvalError> {
    let mut result = evaluate_hr(&predicted.hr_series, truth, window_seconds)?;
    if let GroundTruth::Beats(beats) = truth {
        if let Ok(hrv) = evaluate_hrv(predicted, beats) {
            result.rmssd_error_ms = hrv.rmssd_error_ms;
            result.lf_nu_error = hrv.lf_nu_error;
            result.hf_nu_error = hrv.hf_nu_error;
            result.ratio_error = hrv.ratio_error;
            result.truth_rmssd_ms = hrv.truth_rmssd_ms;
            result.predicted_rmssd_ms = hrv.predicted_rmssd_ms;
        }
    }
    Ok(result)
}
