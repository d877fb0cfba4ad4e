//! Frequency-domain filtering of the raw rPPG window.
//!
//! The stage runs in four steps per window: (1) amplitude spectra of the rPPG
//! signal and the three head-orientation channels, (2) motion suppression by
//! subtracting the averaged orientation spectrum after amplitude
//! normalization, (3) band limiting to the human heart-rate range and picking
//! the dominant frequency, (4) a narrow band-pass of the original time-domain
//! signal around that frequency, realized as a zero-phase spectral mask so
//! beat timing is not distorted.

use crate::fft;
use crate::pos::RawRppgWindow;
use rustfft::num_complex::Complex64;
use thiserror::Error;

/// Heart-rate band defaults, 0.7-4 Hz.
pub const BAND_LOW_HZ: f64 = 0.7;
pub const BAND_HIGH_HZ: f64 = 4.0;
/// Total passband width of the narrow filter.
pub const NARROW_BANDWIDTH_HZ: f64 = 0.47;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("series too short for a spectrum")]
    TooShort,
    #[error("spectra have different bin counts")]
    LengthMismatch,
    #[error("no nonzero in-band component")]
    EmptySpectrum,
}

/// One-sided magnitude spectrum.
#[derive(Debug, Clone)]
pub struct AmplitudeSpectrum {
    /// |X_k| for k = 0..n_fft/2, unnormalized DFT magnitudes.
    pub magnitudes: Vec<f64>,
    pub fs: f64,
    pub n_fft: usize,
}

impl AmplitudeSpectrum {
    /// Bin spacing in Hz.
    pub fn resolution(&self) -> f64 {
        self.fs / self.n_fft as f64
    }

    /// Center frequency of bin `k`.
    pub fn bin_freq(&self, k: usize) -> f64 {
        k as f64 * self.fs / self.n_fft as f64
    }
}

/// Filtered single-window BVP segment with its selected pulse frequency.
#[derive(Debug, Clone)]
pub struct FilteredBvpWindow {
    pub values: Vec<f64>,
    pub fs: f64,
    pub t_start_ms: f64,
    /// Dominant pulse frequency this window was filtered around, Hz.
    pub f0_hz: f64,
}

/// One-sided amplitude spectrum of a real series.
pub fn amplitude_spectrum(series: &[f64], fs: f64) -> Result<AmplitudeSpectrum, SpectralError> {
    let n = series.len();
    if n < 2 {
        return Err(SpectralError::TooShort);
    }
    let buf = fft::forward_real(series);
    let magnitudes = buf[..n / 2 + 1].iter().map(|c| c.norm()).collect();
    Ok(AmplitudeSpectrum {
        magnitudes,
        fs,
        n_fft: n,
    })
}

/// Per-bin arithmetic mean of the pitch, roll and yaw spectra.
pub fn combine_motion_spectra(
    pitch: &AmplitudeSpectrum,
    roll: &AmplitudeSpectrum,
    yaw: &AmplitudeSpectrum,
) -> Result<AmplitudeSpectrum, SpectralError> {
    let n = pitch.magnitudes.len();
    if roll.magnitudes.len() != n || yaw.magnitudes.len() != n {
        return Err(SpectralError::LengthMismatch);
    }
    let magnitudes = (0..n)
        .map(|k| (pitch.magnitudes[k] + roll.magnitudes[k] + yaw.magnitudes[k]) / 3.0)
        .collect();
    Ok(AmplitudeSpectrum {
        magnitudes,
        fs: pitch.fs,
        n_fft: pitch.n_fft,
    })
}

fn max_in_band(spectrum: &AmplitudeSpectrum, low_hz: f64, high_hz: f64) -> f64 {
    spectrum
        .magnitudes
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = spectrum.bin_freq(*k);
            f >= low_hz && f <= high_hz
        })
        .map(|(_, &m)| m)
        .fold(0.0, f64::max)
}

/// Subtract the motion spectrum from the rPPG spectrum after rescaling the
/// motion spectrum so its strongest in-band line matches the rPPG spectrum's
/// strongest in-band line. Negative results clamp to zero, so motion peaks
/// are fully cancelable while the output never exceeds the input.
pub fn suppress_motion(
    rppg: &AmplitudeSpectrum,
    motion: &AmplitudeSpectrum,
    low_hz: f64,
    high_hz: f64,
) -> Result<AmplitudeSpectrum, SpectralError> {
    if rppg.magnitudes.len() != motion.magnitudes.len() {
        return Err(SpectralError::LengthMismatch);
    }
    let motion_max = max_in_band(motion, low_hz, high_hz);
    if motion_max == 0.0 {
        return Ok(rppg.clone());
    }
    let scale = max_in_band(rppg, low_hz, high_hz) / motion_max;
    let magnitudes = rppg
        .magnitudes
        .iter()
        .zip(motion.magnitudes.iter())
        .map(|(&r, &m)| (r - scale * m).max(0.0))
        .collect();
    Ok(AmplitudeSpectrum {
        magnitudes,
        fs: rppg.fs,
        n_fft: rppg.n_fft,
    })
}

/// Zero every bin whose center frequency falls outside `[low_hz, high_hz]`.
pub fn band_limit(spectrum: &AmplitudeSpectrum, low_hz: f64, high_hz: f64) -> AmplitudeSpectrum {
    let magnitudes = spectrum
        .magnitudes
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let f = spectrum.bin_freq(k);
            if f >= low_hz && f <= high_hz {
                m
            } else {
                0.0
            }
        })
        .collect();
    AmplitudeSpectrum {
        magnitudes,
        fs: spectrum.fs,
        n_fft: spectrum.n_fft,
    }
}

/// Center frequency of the maximum-magnitude bin. Ties resolve to the lower
/// frequency. An all-zero spectrum means no pulse was found in this window.
pub fn dominant_frequency(spectrum: &AmplitudeSpectrum) -> Result<f64, SpectralError> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &m) in spectrum.magnitudes.iter().enumerate() {
        if m > 0.0 && best.map_or(true, |(_, bm)| m > bm) {
            best = Some((k, m));
        }
    }
    match best {
        Some((k, _)) => Ok(spectrum.bin_freq(k)),
        None => Err(SpectralError::EmptySpectrum),
    }
}

/// Ratio of the strongest bin to the mean nonzero-band magnitude; a gate on
/// this rejects windows whose "dominant" bin is just the tallest noise bin.
pub fn peak_dominance(spectrum: &AmplitudeSpectrum) -> f64 {
    let mut peak = 0.0f64;
    let mut sum = 0.0;
    let mut count = 0usize;
    for &m in &spectrum.magnitudes {
        if m > 0.0 {
            peak = peak.max(m);
            sum += m;
            count += 1;
        }
    }
    if count == 0 || sum == 0.0 {
        return 0.0;
    }
    peak / (sum / count as f64)
}

fn narrow_mask_gain(abs_freq: f64, f0: f64, half_bw: f64, res: f64) -> f64 {
    let dist = if abs_freq < f0 - half_bw {
        (f0 - half_bw) - abs_freq
    } else if abs_freq > f0 + half_bw {
        abs_freq - (f0 + half_bw)
    } else {
        return 1.0;
    };
    if dist < res {
        0.5 * (1.0 + (std::f64::consts::PI * dist / res).cos())
    } else {
        0.0
    }
}

/// Zero-phase narrow band-pass centered at `f0` with total passband width
/// `bandwidth_hz`, realized by masking the complex spectrum with
/// raised-cosine transition edges one bin wide and inverse transforming.
pub fn narrow_bandpass(raw: &RawRppgWindow, f0: f64, bandwidth_hz: f64) -> FilteredBvpWindow {
    let n = raw.values.len();
    let fs = raw.fs;
    let res = fs / n as f64;
    let half_bw = bandwidth_hz / 2.0;
    let mut buf: Vec<Complex64> = raw.values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft::forward(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let freq = if k <= n / 2 {
            k as f64 * fs / n as f64
        } else {
            (k as f64 - n as f64) * fs / n as f64
        };
        *v *= narrow_mask_gain(freq.abs(), f0, half_bw, res);
    }
    fft::inverse(&mut buf);
    FilteredBvpWindow {
        values: buf.iter().map(|c| c.re).collect(),
        fs,
        t_start_ms: raw.t_start_ms,
        f0_hz: f0,
    }
}
