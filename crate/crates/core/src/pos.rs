//! Plane-orthogonal-to-skin combination of the three colour channels.
//!
//! Each channel is first divided by its window mean (temporal normalization),
//! then projected onto the two fixed directions S1 = G - B and
//! S2 = G + B - 2R. Both directions annihilate the (1,1,1) intensity axis, so
//! uniform brightness changes cancel exactly. The projections are recombined
//! as h = S1 + alpha * S2 with alpha = sigma(S1) / sigma(S2), which maximizes
//! the pulsatile component in the single output signal.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PosError {
    #[error("channel mean must be positive")]
    ZeroMeanChannel,
    #[error("channel lengths differ")]
    LengthMismatch,
}

/// One window's combined rPPG signal, prior to any filtering. Zero mean is
/// not guaranteed at this stage.
#[derive(Debug, Clone)]
pub struct RawRppgWindow {
    pub values: Vec<f64>,
    pub fs: f64,
    pub t_start_ms: f64,
}

/// Divide a channel by its window mean so its output mean is 1.
pub fn temporal_normalize(channel: &[f64]) -> Result<Vec<f64>, PosError> {
    let n = channel.len();
    if n == 0 {
        return Err(PosError::ZeroMeanChannel);
    }
    let mean = channel.iter().sum::<f64>() / n as f64;
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(PosError::ZeroMeanChannel);
    }
    Ok(channel.iter().map(|v| v / mean).collect())
}

fn population_std(series: &[f64]) -> f64 {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    (series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Project already-normalized channels onto the skin-orthogonal plane and
/// recombine into a single series.
pub fn pos_project(r: &[f64], g: &[f64], b: &[f64]) -> Result<Vec<f64>, PosError> {
    if r.len() != g.len() || g.len() != b.len() {
        return Err(PosError::LengthMismatch);
    }
    let n = r.len();
    let mut s1 = Vec::with_capacity(n);
    let mut s2 = Vec::with_capacity(n);
    for i in 0..n {
        s1.push(g[i] - b[i]);
        s2.push(g[i] + b[i] - 2.0 * r[i]);
    }
    let sigma2 = population_std(&s2);
    if sigma2 == 0.0 {
        return Ok(s1);
    }
    let alpha = population_std(&s1) / sigma2;
    Ok(s1
        .iter()
        .zip(s2.iter())
        .map(|(a, b)| a + alpha * b)
        .collect())
}

/// Full extraction for one window: normalize each raw colour channel, then
/// project.
pub fn pos_extract(
    r: &[f64],
    g: &[f64],
    b: &[f64],
    fs: f64,
    t_start_ms: f64,
) -> Result<RawRppgWindow, PosError> {
    if r.len() != g.len() || g.len() != b.len() {
        return Err(PosError::LengthMismatch);
    }
    let rn = temporal_normalize(r)?;
    let gn = temporal_normalize(g)?;
    let bn = temporal_normalize(b)?;
    Ok(RawRppgWindow {
        values: pos_project(&rn, &gn, &bn)?,
        fs,
        t_start_ms,
    })
}
