//! facepulse-core: remote photoplethysmography from tracker traces.
//!
//! The crate turns per-frame facial colour and head-orientation traces into a
//! blood-volume-pulse waveform, timed heart beats, heart rate and
//! heart-rate-variability metrics. The signal path is streaming: a running
//! 8.53 s window is resampled to a uniform rate, combined into a single rPPG
//! signal with the POS projection, cleaned by motion-spectrum suppression and
//! wide/narrow band filtering, and overlap-added into a continuous BVP from
//! which beats are timed.
//!
//! Modules follow the stages:
//!
//! - [`trace`]: trace/ground-truth file formats and the results document
//! - [`window`]: running window, rate selection, linear resampling
//! - [`pos`]: plane-orthogonal-to-skin colour combination
//! - [`spectral`]: FFT spectra, motion suppression, band filtering
//! - [`bvp`]: window normalization and overlap-add assembly
//! - [`beats`]: peak detection and IBI extraction
//! - [`vitals`]: HR windows, RMSSD, Welch LF/HF metrics
//! - [`synth`] / [`eval`]: ground-truthed scenario generation and MAE scoring
//! - [`pipeline`]: the composed streaming engine

pub mod beats;
pub mod bvp;
pub mod eval;
mod fft;
pub mod pipeline;
pub mod pos;
pub mod spectral;
pub mod synth;
pub mod trace;
pub mod vitals;
pub mod window;

pub use beats::{detect_peaks, extract_ibis, F0History, IbiSequence};
pub use bvp::{normalize_window, BvpStream};
pub use eval::{evaluate, evaluate_hr, evaluate_hrv, EvalResult};
pub use pipeline::{process_trace, Diagnostics, Pipeline, PipelineConfig, PipelineOutput};
pub use pos::{pos_extract, pos_project, temporal_normalize, RawRppgWindow};
pub use spectral::{
    amplitude_spectrum, band_limit, combine_motion_spectra, dominant_frequency, narrow_bandpass,
    suppress_motion, AmplitudeSpectrum, FilteredBvpWindow,
};
pub use synth::{synth_trace, SynthSpec};
pub use trace::{
    parse_ground_truth, parse_trace, read_results, write_results, FrameSample, GroundTruth,
    GroundTruthKind, ResultsDoc,
};
pub use vitals::{build_report, frequency_metrics, heart_rate, rmssd, HrWindow, VitalsReport};
pub use window::{resample_linear, select_target_rate, SignalWindow, SlidingWindow, WindowConfig};
