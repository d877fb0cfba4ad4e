//! facepulse: streaming rPPG analysis from tracker traces.
//!
//! Subcommands:
//! - `process`  run the full pipeline on a trace CSV, emit results JSON
//! - `evaluate` score a results file against ground truth (MAE, HRV errors)
//! - `synth`    generate a ground-truthed synthetic trace from a scenario
//! - `bench`    measure per-stage and per-frame latency of the signal path
//!
//! `--input -` reads from stdin and `--output -` writes to stdout, so a live
//! tracker can be piped straight through `process`.

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use facepulse_core::pipeline::{Pipeline, PipelineConfig};
use facepulse_core::trace::{self, GroundTruthKind, ResultsDoc, TraceError, TraceReader};
use facepulse_core::{eval, synth};
use serde::Serialize;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "facepulse",
    version,
    about = "Heart rate and HRV from facial colour/pose traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the signal path on a trace and write the results document.
    Process(ProcessArgs),
    /// Score a results document against a ground-truth file.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic trace and its exact beat ground truth.
    Synth(SynthArgs),
    /// Measure throughput and per-stage latency on a trace or scenario.
    Bench(BenchArgs),
}

#[derive(Args)]
struct PipelineFlags {
    /// Analysis window span in seconds.
    #[arg(long)]
    window_seconds: Option<f64>,
    /// Grid samples between window emissions (1 = per-frame).
    #[arg(long = "hop")]
    hop_samples: Option<usize>,
    /// Frame gaps longer than this reset the window buffer, seconds.
    #[arg(long)]
    gap_reset_seconds: Option<f64>,
    /// Lower edge of the heart-rate band, Hz.
    #[arg(long)]
    band_low_hz: Option<f64>,
    /// Upper edge of the heart-rate band, Hz.
    #[arg(long)]
    band_high_hz: Option<f64>,
    /// Total width of the narrow band-pass, Hz.
    #[arg(long)]
    narrow_bandwidth_hz: Option<f64>,
    /// HR reporting window, seconds.
    #[arg(long = "hr-window")]
    hr_window_seconds: Option<f64>,
    /// Rolling HRV span, seconds (default: whole recording).
    #[arg(long = "hrv-window")]
    hrv_window_seconds: Option<f64>,
    /// Disable rhythmic motion noise suppression (ablation).
    #[arg(long)]
    no_motion_suppression: bool,
    /// Peak-to-mean spectral ratio below which a window has no pulse lock.
    #[arg(long)]
    min_peak_dominance: Option<f64>,
    /// JSON config file with the same keys; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl PipelineFlags {
    fn build(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let bytes =
                    fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_slice(&bytes)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.window_seconds {
            cfg.window_seconds = v;
        }
        if let Some(v) = self.hop_samples {
            cfg.hop_samples = v;
        }
        if let Some(v) = self.gap_reset_seconds {
            cfg.gap_reset_seconds = v;
        }
        if let Some(v) = self.band_low_hz {
            cfg.band_low_hz = v;
        }
        if let Some(v) = self.band_high_hz {
            cfg.band_high_hz = v;
        }
        if let Some(v) = self.narrow_bandwidth_hz {
            cfg.narrow_bandwidth_hz = v;
        }
        if let Some(v) = self.hr_window_seconds {
            cfg.hr_window_seconds = v;
        }
        if let Some(v) = self.hrv_window_seconds {
            cfg.hrv_window_seconds = Some(v);
        }
        if self.no_motion_suppression {
            cfg.motion_suppression = false;
        }
        if let Some(v) = self.min_peak_dominance {
            cfg.min_peak_dominance = v;
        }
        if !(cfg.window_seconds > 0.0)
            || !(cfg.band_low_hz > 0.0)
            || cfg.band_high_hz <= cfg.band_low_hz
            || !(cfg.narrow_bandwidth_hz > 0.0)
            || !(cfg.hr_window_seconds > 0.0)
        {
            return Err(anyhow!("config values out of range"));
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct ProcessArgs {
    /// Trace CSV path, or `-` for stdin.
    #[arg(long)]
    input: String,
    /// Results JSON path, or `-` for stdout.
    #[arg(long, default_value = "-")]
    output: String,
    /// Include the overlap-added BVP samples in the results.
    #[arg(long)]
    emit_bvp: bool,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Results JSON produced by `process`, or `-` for stdin.
    #[arg(long)]
    input: String,
    /// Ground-truth file.
    #[arg(long)]
    truth: PathBuf,
    /// Ground-truth format.
    #[arg(long, value_parser = ["beats", "hr"], default_value = "beats")]
    truth_kind: String,
    /// HR window for MAE, seconds; inferred from the results when possible.
    #[arg(long = "hr-window")]
    hr_window_seconds: Option<f64>,
    /// Evaluation JSON path, or `-` for stdout.
    #[arg(long, default_value = "-")]
    output: String,
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario spec JSON.
    #[arg(long)]
    scenario: PathBuf,
    /// Trace CSV output path.
    #[arg(long)]
    output: PathBuf,
    /// Beats CSV output path.
    #[arg(long)]
    truth_output: PathBuf,
    /// Override the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Trace CSV to benchmark.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Scenario spec to synthesize and benchmark instead of a trace.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Timing JSON path, or `-` for stdout.
    #[arg(long, default_value = "-")]
    output: String,
    /// Override the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

/// Input/validation failures exit 1; anything unexpected exits 2.
enum CliError {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    fn message(&self) -> &anyhow::Error {
        match self {
            CliError::Input(e) | CliError::Internal(e) => e,
        }
    }
}

fn input_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Input(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Process(args) => cmd_process(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("facepulse: {:#}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn open_input(path: &str) -> anyhow::Result<Box<dyn BufRead>> {
    if path == "-" {
        Ok(Box::new(BufReader::new(std::io::stdin())))
    } else {
        let file = fs::File::open(path).with_context(|| format!("opening {path}"))?;
        Ok(Box::new(BufReader::new(file)))
    }
}

fn write_output(path: &str, contents: &str) -> anyhow::Result<()> {
    if path == "-" {
        std::io::stdout()
            .write_all(contents.as_bytes())
            .context("writing stdout")
    } else {
        fs::write(path, contents).with_context(|| format!("writing {path}"))
    }
}

fn cmd_process(args: ProcessArgs) -> Result<(), CliError> {
    let cfg = args.pipeline.build().map_err(input_err)?;
    let reader = open_input(&args.input).map_err(input_err)?;
    let mut pipeline = Pipeline::new(cfg);
    let mut frames = 0u64;
    let mut stream_error: Option<TraceError> = None;
    for item in TraceReader::new(reader) {
        match item {
            Ok(sample) => {
                pipeline.push_frame(sample);
                frames += 1;
            }
            Err(e) => {
                stream_error = Some(e);
                break;
            }
        }
    }
    if frames == 0 {
        let e = stream_error.unwrap_or(TraceError::EmptyStream);
        return Err(input_err(e));
    }

    let truncated = stream_error.is_some();
    let out = pipeline.finish();
    let doc = ResultsDoc::new(
        &out.report,
        if args.emit_bvp {
            out.bvp.as_ref()
        } else {
            None
        },
        out.diagnostics,
        truncated,
    );
    write_output(&args.output, &trace::write_results(&doc)).map_err(CliError::Internal)?;
    match stream_error {
        // Partial results were flushed with the truncated flag; the stream
        // itself is still rejected.
        Some(e) => Err(input_err(e)),
        None => Ok(()),
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    if args.input == "-" {
        std::io::stdin()
            .read_to_end(&mut bytes)
            .context("reading stdin")
            .map_err(input_err)?;
    } else {
        bytes = fs::read(&args.input)
            .with_context(|| format!("reading {}", args.input))
            .map_err(input_err)?;
    }
    let results = trace::read_results(&bytes).map_err(input_err)?;

    let kind = match args.truth_kind.as_str() {
        "hr" => GroundTruthKind::Hr,
        _ => GroundTruthKind::Beats,
    };
    let truth_bytes = fs::read(&args.truth)
        .with_context(|| format!("reading {}", args.truth.display()))
        .map_err(input_err)?;
    let truth = trace::parse_ground_truth(&truth_bytes, kind).map_err(input_err)?;

    let window_seconds = args
        .hr_window_seconds
        .or_else(|| {
            results
                .hr_series
                .first()
                .map(|w| (w.t_end_ms - w.t_start_ms) / 1000.0)
        })
        .unwrap_or(15.0);

    let report = results_to_report(&results);
    let scored = eval::evaluate(&report, &truth, window_seconds).map_err(input_err)?;
    let json = to_pretty_json(&scored).map_err(CliError::Internal)?;
    write_output(&args.output, &json).map_err(CliError::Internal)
}

fn results_to_report(doc: &ResultsDoc) -> facepulse_core::vitals::VitalsReport {
    facepulse_core::vitals::VitalsReport {
        hr_series: doc.hr_series.clone(),
        beat_times_ms: doc.beats_ms.clone(),
        rmssd_ms: doc.hrv.as_ref().and_then(|h| h.rmssd_ms),
        lf_nu: doc.hrv.as_ref().and_then(|h| h.lf_nu),
        hf_nu: doc.hrv.as_ref().and_then(|h| h.hf_nu),
        lf_hf_ratio: doc.hrv.as_ref().and_then(|h| h.lf_hf_ratio),
        n_beats: doc.beats_ms.len(),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let bytes = fs::read(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))
        .map_err(input_err)?;
    let mut spec: synth::SynthSpec = serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing {}", args.scenario.display()))
        .map_err(input_err)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let (samples, beats) = synth::synth_trace(&spec).map_err(input_err)?;
    fs::write(&args.output, trace::write_trace(&samples))
        .with_context(|| format!("writing {}", args.output.display()))
        .map_err(CliError::Internal)?;
    fs::write(&args.truth_output, trace::write_ground_truth_beats(&beats))
        .with_context(|| format!("writing {}", args.truth_output.display()))
        .map_err(CliError::Internal)?;
    Ok(())
}

#[derive(Serialize)]
struct StageReport {
    mean_us_per_frame: f64,
    total_ms: f64,
}

#[derive(Serialize)]
struct BenchReport {
    frames: u64,
    duration_s: f64,
    frames_per_second: f64,
    signal_path_mean_ms_per_frame: f64,
    per_frame_p50_us: f64,
    per_frame_p95_us: f64,
    per_frame_p99_us: f64,
    stages: Vec<(String, StageReport)>,
}

fn load_bench_trace(args: &BenchArgs) -> anyhow::Result<Vec<facepulse_core::FrameSample>> {
    match (&args.input, &args.scenario) {
        (Some(path), None) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(trace::parse_trace(&bytes)?)
        }
        (None, Some(path)) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let mut spec: synth::SynthSpec = serde_json::from_slice(&bytes)?;
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            Ok(synth::synth_trace(&spec)?.0)
        }
        _ => Err(anyhow!("bench needs exactly one of --input or --scenario")),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let cfg = args.pipeline.build().map_err(input_err)?;
    let samples = load_bench_trace(&args).map_err(input_err)?;
    if samples.is_empty() {
        return Err(input_err(TraceError::EmptyStream));
    }

    let mut pipeline = Pipeline::new(cfg);
    let mut per_frame_ns: Vec<u64> = Vec::with_capacity(samples.len());
    let start = Instant::now();
    for &s in &samples {
        let t = Instant::now();
        pipeline.push_frame(s);
        per_frame_ns.push(t.elapsed().as_nanos() as u64);
    }
    let out = pipeline.finish();
    let total = start.elapsed();

    per_frame_ns.sort_unstable();
    let pct = |p: f64| -> f64 {
        let idx = ((per_frame_ns.len() as f64 - 1.0) * p).round() as usize;
        per_frame_ns[idx] as f64 / 1000.0
    };
    let frames = samples.len() as u64;
    let t = out.timings;
    let stage = |ns: u64| StageReport {
        mean_us_per_frame: ns as f64 / frames as f64 / 1000.0,
        total_ms: ns as f64 / 1e6,
    };
    let report = BenchReport {
        frames,
        duration_s: total.as_secs_f64(),
        frames_per_second: frames as f64 / total.as_secs_f64(),
        signal_path_mean_ms_per_frame: t.total_ns() as f64 / frames as f64 / 1e6,
        per_frame_p50_us: pct(0.50),
        per_frame_p95_us: pct(0.95),
        per_frame_p99_us: pct(0.99),
        stages: vec![
            ("window".into(), stage(t.window_ns)),
            ("pos".into(), stage(t.pos_ns)),
            ("spectral".into(), stage(t.spectral_ns)),
            ("bvp".into(), stage(t.bvp_ns)),
            ("beats".into(), stage(t.beats_ns)),
            ("vitals".into(), stage(t.vitals_ns)),
        ],
    };
    let json = to_pretty_json(&report).map_err(CliError::Internal)?;
    write_output(&args.output, &json).map_err(CliError::Internal)
}

fn to_pretty_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
