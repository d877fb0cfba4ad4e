//! Synthetic ground-truthed trace generation.
//!
//! Scenarios mirror the conditions the pipeline has to survive: steady and
//! decaying heart rates, RR jitter and modulation, rhythmic head motion
//! bleeding into the colour channels, sensor noise, and uneven or very low
//! frame rates. Beat times are generated first and recorded exactly as
//! ground truth; the colour channels then carry a pulse waveform that peaks
//! at each beat.
//!
//! Motion injection writes the tone into the orientation channels and, with
//! per-channel weights that are deliberately not a pure intensity change,
//! into the colour channels - a uniform modulation would be cancelled by the
//! POS projection and suppression would have nothing to do.

use crate::trace::FrameSample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HrProfile {
    Constant { bpm: f64 },
    LinearDecay { from_bpm: f64, to_bpm: f64 },
    Piecewise { points: Vec<(f64, f64)> },
}

impl HrProfile {
    /// Instantaneous rate at `t` seconds into the recording.
    fn bpm_at(&self, t_s: f64, duration_s: f64) -> f64 {
        match self {
            HrProfile::Constant { bpm } => *bpm,
            HrProfile::LinearDecay { from_bpm, to_bpm } => {
                let u = (t_s / duration_s).clamp(0.0, 1.0);
                from_bpm + (to_bpm - from_bpm) * u
            }
            HrProfile::Piecewise { points } => {
                let mut bpm = points[0].1;
                for &(start_s, value) in points {
                    if t_s >= start_s {
                        bpm = value;
                    }
                }
                bpm
            }
        }
    }

    fn bpm_values(&self) -> Vec<f64> {
        match self {
            HrProfile::Constant { bpm } => vec![*bpm],
            HrProfile::LinearDecay { from_bpm, to_bpm } => vec![*from_bpm, *to_bpm],
            HrProfile::Piecewise { points } => points.iter().map(|p| p.1).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RrModulation {
    pub freq_hz: f64,
    pub depth_ms: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    #[default]
    Sine,
    /// Fundamental plus a 0.3-weight second harmonic, peak-normalized.
    WithSecondHarmonic,
}

impl PulseShape {
    /// Waveform value at beat phase `p` in [0, 1); maximum at p = 0.
    fn value(&self, p: f64) -> f64 {
        match self {
            PulseShape::Sine => (TAU * p).cos(),
            PulseShape::WithSecondHarmonic => ((TAU * p).cos() + 0.3 * (2.0 * TAU * p).cos()) / 1.3,
        }
    }

    /// RMS of the waveform over one cycle, used to scale noise to a target SNR.
    fn rms(&self) -> f64 {
        match self {
            PulseShape::Sine => std::f64::consts::FRAC_1_SQRT_2,
            PulseShape::WithSecondHarmonic => (1.09f64 / 2.0).sqrt() / 1.3,
        }
    }
}

/// Relative pulse amplitude per colour channel (green strongest, as for
/// hemoglobin absorption).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ChannelGains {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Default for ChannelGains {
    fn default() -> Self {
        Self {
            r: 0.3,
            g: 1.0,
            b: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct MotionInjection {
    pub freq_hz: f64,
    /// Relative colour modulation amplitude of the motion tone.
    pub color_amp: f64,
    /// Orientation swing in degrees.
    pub orientation_amp_deg: f64,
}

/// Colour-channel weights of the injected motion tone. Not a uniform
/// intensity change, and coupled into both POS projections so an unsuppressed
/// motion line genuinely competes with the pulse.
const MOTION_COLOR_WEIGHTS: (f64, f64, f64) = (0.2, 1.6, 0.4);

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrameRate {
    Constant {
        fps: f64,
    },
    Jittered {
        fps: f64,
        jitter_ms: f64,
    },
    /// `(start_s, fps)` segments; the first must start at 0.
    Piecewise {
        segments: Vec<(f64, f64)>,
    },
}

impl Default for FrameRate {
    fn default() -> Self {
        FrameRate::Constant { fps: 30.0 }
    }
}

fn default_pulse_depth() -> f64 {
    0.005
}

/// Full description of one synthetic scenario. Deterministic for a fixed
/// seed.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub hr: HrProfile,
    #[serde(default)]
    pub rr_jitter_ms: f64,
    #[serde(default)]
    pub rr_modulation: Option<RrModulation>,
    #[serde(default)]
    pub pulse_shape: PulseShape,
    /// Relative pulse modulation on a unit-gain channel.
    #[serde(default = "default_pulse_depth")]
    pub pulse_depth: f64,
    #[serde(default)]
    pub channel_gains: ChannelGains,
    #[serde(default)]
    pub motion: Option<MotionInjection>,
    /// Additive white noise level, as SNR in dB against the strongest pulse
    /// channel. Absent means noiseless.
    #[serde(default)]
    pub noise_snr_db: Option<f64>,
    #[serde(default)]
    pub frame_rate: FrameRate,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn constant(duration_s: f64, bpm: f64) -> Self {
        Self {
            duration_s,
            hr: HrProfile::Constant { bpm },
            rr_jitter_ms: 0.0,
            rr_modulation: None,
            pulse_shape: PulseShape::Sine,
            pulse_depth: default_pulse_depth(),
            channel_gains: ChannelGains::default(),
            motion: None,
            noise_snr_db: None,
            frame_rate: FrameRate::default(),
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: &str| Err(SynthError::InvalidSpec(msg.to_string()));
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return fail("duration must be positive");
        }
        let bpms = self.hr.bpm_values();
        if bpms.is_empty() {
            return fail("hr profile has no points");
        }
        if bpms.iter().any(|b| !(*b > 20.0 && *b < 250.0)) {
            return fail("bpm must lie in (20, 250)");
        }
        if let HrProfile::Piecewise { points } = &self.hr {
            if points[0].0 != 0.0 || points.windows(2).any(|w| w[1].0 <= w[0].0) {
                return fail("piecewise hr points must start at 0 and increase");
            }
        }
        if !(self.pulse_depth > 0.0 && self.pulse_depth < 1.0) {
            return fail("pulse depth must lie in (0, 1)");
        }
        let g = self.channel_gains;
        if g.r < 0.0 || g.g < 0.0 || g.b < 0.0 || g.r + g.g + g.b == 0.0 {
            return fail("channel gains must be non-negative with one positive");
        }
        if self.rr_jitter_ms < 0.0 {
            return fail("rr jitter must be non-negative");
        }
        if let Some(m) = &self.rr_modulation {
            let min_ibi = bpms.iter().fold(f64::MAX, |acc, b| acc.min(60_000.0 / b));
            if !(m.freq_hz > 0.0) || m.depth_ms < 0.0 || m.depth_ms >= min_ibi {
                return fail("rr modulation depth must be below the baseline IBI");
            }
        }
        if let Some(m) = &self.motion {
            if !(m.freq_hz > 0.0) || m.color_amp < 0.0 || m.orientation_amp_deg < 0.0 {
                return fail("motion injection must have positive frequency");
            }
        }
        match &self.frame_rate {
            FrameRate::Constant { fps } => {
                if !(*fps > 0.0) {
                    return fail("fps must be positive");
                }
            }
            FrameRate::Jittered { fps, jitter_ms } => {
                if !(*fps > 0.0) || *jitter_ms < 0.0 || *jitter_ms >= 500.0 / fps {
                    return fail("frame jitter must stay below half the frame period");
                }
            }
            FrameRate::Piecewise { segments } => {
                if segments.is_empty()
                    || segments[0].0 != 0.0
                    || segments.windows(2).any(|w| w[1].0 <= w[0].0)
                    || segments.iter().any(|s| !(s.1 > 0.0))
                {
                    return fail("piecewise rate segments must start at 0 and increase");
                }
            }
        }
        Ok(())
    }
}

/// Standard normal via Box-Muller.
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Beat timestamps for the scenario, including one virtual beat before t = 0
/// and one past the end so the waveform phase is defined everywhere.
fn generate_beats(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let duration_ms = spec.duration_s * 1000.0;
    let mut beats = Vec::new();
    let first_base = 60_000.0 / spec.hr.bpm_at(0.0, spec.duration_s);
    let mut t = -first_base;
    beats.push(t);
    loop {
        let at = t.max(0.0) / 1000.0;
        let base = 60_000.0 / spec.hr.bpm_at(at, spec.duration_s);
        let mut ibi = base;
        if let Some(m) = &spec.rr_modulation {
            ibi += m.depth_ms * (TAU * m.freq_hz * t.max(0.0) / 1000.0).sin();
        }
        if spec.rr_jitter_ms > 0.0 {
            ibi += spec.rr_jitter_ms * gauss(rng);
        }
        ibi = ibi.max(220.0);
        t += ibi;
        beats.push(t);
        if t > duration_ms {
            break;
        }
    }
    beats
}

/// Frame timestamps for the scenario.
fn generate_frame_times(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let duration_ms = spec.duration_s * 1000.0;
    let mut times = Vec::new();
    match &spec.frame_rate {
        FrameRate::Constant { fps } => {
            let step = 1000.0 / fps;
            let mut k = 0u64;
            loop {
                let t = k as f64 * step;
                if t >= duration_ms {
                    break;
                }
                times.push(t);
                k += 1;
            }
        }
        FrameRate::Jittered { fps, jitter_ms } => {
            let step = 1000.0 / fps;
            let mut k = 0u64;
            let mut last = f64::NEG_INFINITY;
            loop {
                let nominal = k as f64 * step;
                if nominal >= duration_ms {
                    break;
                }
                let mut t = nominal + rng.gen_range(-*jitter_ms..=*jitter_ms);
                if t <= last {
                    t = last + 1e-3;
                }
                times.push(t.max(0.0));
                last = *times.last().unwrap();
                k += 1;
            }
        }
        FrameRate::Piecewise { segments } => {
            let mut t = 0.0;
            while t < duration_ms {
                times.push(t);
                let mut fps = segments[0].1;
                for &(start_s, f) in segments {
                    if t / 1000.0 >= start_s {
                        fps = f;
                    }
                }
                t += 1000.0 / fps;
            }
        }
    }
    times
}

/// Generate a trace and its exact beat-time ground truth. Byte-identical
/// output for identical specs.
pub fn synth_trace(spec: &SynthSpec) -> Result<(Vec<FrameSample>, Vec<f64>), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let beats = generate_beats(spec, &mut rng);
    let frame_times = generate_frame_times(spec, &mut rng);

    let duration_ms = spec.duration_s * 1000.0;
    let truth: Vec<f64> = beats
        .iter()
        .copied()
        .filter(|&b| (0.0..duration_ms).contains(&b))
        .collect();

    let noise_sigma = spec.noise_snr_db.map(|snr| {
        let strongest = spec
            .channel_gains
            .g
            .max(spec.channel_gains.r)
            .max(spec.channel_gains.b);
        let signal_rms = strongest * spec.pulse_depth * spec.pulse_shape.rms();
        signal_rms / 10f64.powf(snr / 20.0)
    });

    let (base_r, base_g, base_b) = (90.0, 120.0, 70.0);
    let mut samples = Vec::with_capacity(frame_times.len());
    let mut seg = 0usize;
    for &t in &frame_times {
        while seg + 2 < beats.len() && beats[seg + 1] <= t {
            seg += 1;
        }
        let (b0, b1) = (beats[seg], beats[seg + 1]);
        let phase = ((t - b0) / (b1 - b0)).clamp(0.0, 1.0);
        let pulse = spec.pulse_depth * spec.pulse_shape.value(phase);

        let (mut mod_r, mut mod_g, mut mod_b) = (
            spec.channel_gains.r * pulse,
            spec.channel_gains.g * pulse,
            spec.channel_gains.b * pulse,
        );
        let (mut pitch, mut roll, mut yaw) = (0.0, 0.0, 0.0);
        if let Some(m) = &spec.motion {
            let tone = (TAU * m.freq_hz * t / 1000.0).sin();
            mod_r += m.color_amp * MOTION_COLOR_WEIGHTS.0 * tone;
            mod_g += m.color_amp * MOTION_COLOR_WEIGHTS.1 * tone;
            mod_b += m.color_amp * MOTION_COLOR_WEIGHTS.2 * tone;
            let arg = TAU * m.freq_hz * t / 1000.0;
            pitch = m.orientation_amp_deg * arg.sin();
            roll = m.orientation_amp_deg * (arg + TAU / 3.0).sin();
            yaw = m.orientation_amp_deg * (arg + 2.0 * TAU / 3.0).sin();
        }
        if let Some(sigma) = noise_sigma {
            mod_r += sigma * gauss(&mut rng);
            mod_g += sigma * gauss(&mut rng);
            mod_b += sigma * gauss(&mut rng);
        }
        samples.push(FrameSample {
            t_ms: t,
            r_mean: (base_r * (1.0 + mod_r)).max(0.0),
            g_mean: (base_g * (1.0 + mod_g)).max(0.0),
            b_mean: (base_b * (1.0 + mod_b)).max(0.0),
            pitch,
            roll,
            yaw,
        });
    }
    Ok((samples, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beats::extract_ibis;
    use crate::vitals::rmssd;

    #[test]
    fn constant_72bpm_produces_expected_beats() {
        let spec = SynthSpec::constant(60.0, 72.0);
        let (trace, truth) = synth_trace(&spec).unwrap();
        assert!(!trace.is_empty());
        // 72 bpm over 60 s: one beat every 833.3 ms.
        assert!(
            (truth.len() as i64 - 72).abs() <= 1,
            "{} beats",
            truth.len()
        );
        for pair in truth.windows(2) {
            assert!((pair[1] - pair[0] - 833.3333333333334).abs() < 1e-6);
        }
        // Frames cover the duration at 30 fps.
        assert_eq!(trace.len(), 1800);
    }

    #[test]
    fn fixed_seed_reproduces_bytes() {
        let mut spec = SynthSpec::constant(30.0, 80.0);
        spec.rr_jitter_ms = 25.0;
        spec.noise_snr_db = Some(10.0);
        spec.seed = 1234;
        let (a_trace, a_truth) = synth_trace(&spec).unwrap();
        let (b_trace, b_truth) = synth_trace(&spec).unwrap();
        assert_eq!(
            crate::trace::write_trace(&a_trace),
            crate::trace::write_trace(&b_trace)
        );
        assert_eq!(a_truth, b_truth);
    }

    #[test]
    fn gaussian_jitter_yields_sqrt2_rmssd() {
        // Independent per-interval jitter of std s gives successive-difference
        // variance 2 s^2, so RMSSD of the emitted beats is s * sqrt(2).
        let mut spec = SynthSpec::constant(180.0, 72.0);
        spec.rr_jitter_ms = 30.0;
        spec.seed = 42;
        let (_, truth) = synth_trace(&spec).unwrap();
        let (seq, _) = extract_ibis(&truth).unwrap();
        let measured = rmssd(&seq.ibis).unwrap();
        let expected = 30.0 * 2f64.sqrt();
        assert!(
            (measured - expected).abs() <= 0.1 * expected,
            "rmssd {measured} vs {expected}"
        );
    }

    #[test]
    fn pulse_peaks_at_beat_times() {
        let spec = SynthSpec::constant(20.0, 60.0);
        let (trace, truth) = synth_trace(&spec).unwrap();
        // At each exact beat time, phase is 0 and the green channel sits at
        // its modulation maximum.
        let max_g = 120.0 * (1.0 + spec.pulse_depth);
        for &b in &truth {
            let nearest = trace
                .iter()
                .min_by(|x, y| (x.t_ms - b).abs().partial_cmp(&(y.t_ms - b).abs()).unwrap())
                .unwrap();
            assert!(max_g - nearest.g_mean < 0.002 * 120.0);
        }
    }

    #[test]
    fn motion_injection_fills_orientation_channels() {
        let mut spec = SynthSpec::constant(20.0, 72.0);
        spec.motion = Some(MotionInjection {
            freq_hz: 2.0,
            color_amp: 0.005,
            orientation_amp_deg: 3.0,
        });
        let (trace, _) = synth_trace(&spec).unwrap();
        let max_pitch = trace.iter().map(|s| s.pitch.abs()).fold(0.0, f64::max);
        assert!((max_pitch - 3.0).abs() < 0.1);
        // Without motion the orientation channels are flat.
        let (still, _) = synth_trace(&SynthSpec::constant(20.0, 72.0)).unwrap();
        assert!(still
            .iter()
            .all(|s| s.pitch == 0.0 && s.roll == 0.0 && s.yaw == 0.0));
    }

    #[test]
    fn linear_decay_slows_beats() {
        let spec = SynthSpec {
            hr: HrProfile::LinearDecay {
                from_bpm: 140.0,
                to_bpm: 80.0,
            },
            ..SynthSpec::constant(90.0, 100.0)
        };
        let (_, truth) = synth_trace(&spec).unwrap();
        let early = truth[1] - truth[0];
        let late = truth[truth.len() - 1] - truth[truth.len() - 2];
        assert!(early < 60_000.0 / 130.0, "early ibi {early}");
        assert!(late > 60_000.0 / 90.0, "late ibi {late}");
    }

    #[test]
    fn piecewise_rate_produces_low_rate_segment() {
        let spec = SynthSpec {
            frame_rate: FrameRate::Piecewise {
                segments: vec![(0.0, 30.0), (10.0, 5.0), (20.0, 30.0)],
            },
            ..SynthSpec::constant(30.0, 72.0)
        };
        let (trace, _) = synth_trace(&spec).unwrap();
        let in_slow: Vec<&FrameSample> = trace
            .iter()
            .filter(|s| s.t_ms >= 10_000.0 && s.t_ms < 20_000.0)
            .collect();
        assert!((in_slow.len() as i64 - 50).abs() <= 1, "{}", in_slow.len());
        for pair in in_slow.windows(2) {
            assert!((pair[1].t_ms - pair[0].t_ms - 200.0).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = SynthSpec::constant(0.0, 72.0);
        assert!(matches!(
            synth_trace(&spec),
            Err(SynthError::InvalidSpec(_))
        ));
        spec = SynthSpec::constant(30.0, 10.0);
        assert!(matches!(
            synth_trace(&spec),
            Err(SynthError::InvalidSpec(_))
        ));
        spec = SynthSpec::constant(30.0, 72.0);
        spec.rr_modulation = Some(RrModulation {
            freq_hz: 0.1,
            depth_ms: 900.0,
        });
        assert!(matches!(
            synth_trace(&spec),
            Err(SynthError::InvalidSpec(_))
        ));
        spec = SynthSpec::constant(30.0, 72.0);
        spec.frame_rate = FrameRate::Constant { fps: 0.0 };
        assert!(matches!(
            synth_trace(&spec),
            Err(SynthError::InvalidSpec(_))
        ));
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = SynthSpec {
            duration_s: 45.0,
            hr: HrProfile::Piecewise {
                points: vec![(0.0, 90.0), (20.0, 120.0)],
            },
            rr_jitter_ms: 10.0,
            rr_modulation: Some(RrModulation {
                freq_hz: 0.25,
                depth_ms: 30.0,
            }),
            pulse_shape: PulseShape::WithSecondHarmonic,
            pulse_depth: 0.004,
            channel_gains: ChannelGains::default(),
            motion: Some(MotionInjection {
                freq_hz: 1.8,
                color_amp: 0.002,
                orientation_amp_deg: 2.0,
            }),
            noise_snr_db: Some(12.0),
            frame_rate: FrameRate::Jittered {
                fps: 30.0,
                jitter_ms: 5.0,
            },
            seed: 99,
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: SynthSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
