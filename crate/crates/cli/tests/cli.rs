//! End-to-end tests of the facepulse binary: subcommand wiring, exit codes,
//! determinism of the emitted files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_facepulse"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write_scenario(path: &Path, body: &str) {
    fs::write(path, body).unwrap();
}

fn synth(scenario: &Path, trace: &Path, truth: &Path) -> Output {
    bin()
        .args(["synth", "--scenario"])
        .arg(scenario)
        .arg("--output")
        .arg(trace)
        .arg("--truth-output")
        .arg(truth)
        .output()
        .unwrap()
}

const STEADY: &str = r#"{"duration_s": 60.0, "hr": {"kind": "constant", "bpm": 72.0},
    "noise_snr_db": 10.0, "seed": 5}"#;

#[test]
fn synth_is_deterministic() {
    let scenario = tmp("det_scenario.json");
    write_scenario(&scenario, STEADY);
    let (t1, b1) = (tmp("det_t1.csv"), tmp("det_b1.csv"));
    let (t2, b2) = (tmp("det_t2.csv"), tmp("det_b2.csv"));
    assert!(synth(&scenario, &t1, &b1).status.success());
    assert!(synth(&scenario, &t2, &b2).status.success());
    assert_eq!(fs::read(&t1).unwrap(), fs::read(&t2).unwrap());
    assert_eq!(fs::read(&b1).unwrap(), fs::read(&b2).unwrap());
    let truth = fs::read_to_string(&b1).unwrap();
    let beats = truth.lines().count() - 1;
    assert!(
        (beats as i64 - 72).abs() <= 1,
        "{beats} beats for 72 bpm / 60 s"
    );
}

#[test]
fn process_then_evaluate_round_trip() {
    let scenario = tmp("pe_scenario.json");
    write_scenario(&scenario, STEADY);
    let (trace, truth) = (tmp("pe_trace.csv"), tmp("pe_beats.csv"));
    assert!(synth(&scenario, &trace, &truth).status.success());

    let results = tmp("pe_results.json");
    let out = bin()
        .args(["process", "--input"])
        .arg(&trace)
        .arg("--output")
        .arg(&results)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Identical invocation produces byte-identical results.
    let results2 = tmp("pe_results2.json");
    bin()
        .args(["process", "--input"])
        .arg(&trace)
        .arg("--output")
        .arg(&results2)
        .output()
        .unwrap();
    assert_eq!(fs::read(&results).unwrap(), fs::read(&results2).unwrap());

    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&results).unwrap()).unwrap();
    assert_eq!(doc["hr_series"].as_array().unwrap().len(), 4);
    for w in doc["hr_series"].as_array().unwrap() {
        let bpm = w["bpm"].as_f64().unwrap();
        assert!((bpm - 72.0).abs() <= 1.0, "bpm {bpm}");
    }
    assert!(!doc["truncated"].as_bool().unwrap());

    let eval_out = tmp("pe_eval.json");
    let out = bin()
        .args(["evaluate", "--input"])
        .arg(&results)
        .arg("--truth")
        .arg(&truth)
        .arg("--output")
        .arg(&eval_out)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let scored: serde_json::Value = serde_json::from_slice(&fs::read(&eval_out).unwrap()).unwrap();
    assert!(scored["mae_bpm"].as_f64().unwrap() <= 1.0);
    assert_eq!(scored["coverage"].as_f64().unwrap(), 1.0);
}

#[test]
fn self_evaluation_of_truth_is_zero() {
    // Feed the ground-truth beats back as a results document: MAE must be 0.
    let scenario = tmp("self_scenario.json");
    write_scenario(
        &scenario,
        r#"{"duration_s": 45.0, "hr": {"kind": "constant", "bpm": 80.0}, "rr_jitter_ms": 15.0, "seed": 9}"#,
    );
    let (trace, truth) = (tmp("self_trace.csv"), tmp("self_beats.csv"));
    assert!(synth(&scenario, &trace, &truth).status.success());

    let beats: Vec<f64> = fs::read_to_string(&truth)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.parse().unwrap())
        .collect();
    let (seq, _) = facepulse_core::extract_ibis(&beats).unwrap();
    let report = facepulse_core::build_report(&seq, 0.0, 45_000.0, 15.0, None);
    let doc = facepulse_core::ResultsDoc::new(
        &report,
        None,
        facepulse_core::Diagnostics::default(),
        false,
    );
    let results = tmp("self_results.json");
    fs::write(&results, facepulse_core::write_results(&doc)).unwrap();

    let eval_out = tmp("self_eval.json");
    let out = bin()
        .args(["evaluate", "--input"])
        .arg(&results)
        .arg("--truth")
        .arg(&truth)
        .arg("--output")
        .arg(&eval_out)
        .output()
        .unwrap();
    assert!(out.status.success());
    let scored: serde_json::Value = serde_json::from_slice(&fs::read(&eval_out).unwrap()).unwrap();
    assert_eq!(scored["mae_bpm"].as_f64().unwrap(), 0.0);
    assert_eq!(scored["rmssd_error_ms"].as_f64().unwrap(), 0.0);
}

#[test]
fn empty_trace_exits_one_with_message() {
    let empty = tmp("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = bin()
        .args(["process", "--input"])
        .arg(&empty)
        .arg("--output")
        .arg(tmp("empty_out.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty stream"));
}

#[test]
fn short_trace_yields_valid_empty_results() {
    let scenario = tmp("short_scenario.json");
    write_scenario(
        &scenario,
        r#"{"duration_s": 5.0, "hr": {"kind": "constant", "bpm": 72.0}, "seed": 1}"#,
    );
    let (trace, truth) = (tmp("short_trace.csv"), tmp("short_beats.csv"));
    assert!(synth(&scenario, &trace, &truth).status.success());
    let results = tmp("short_results.json");
    let out = bin()
        .args(["process", "--input"])
        .arg(&trace)
        .arg("--output")
        .arg(&results)
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&results).unwrap()).unwrap();
    assert_eq!(doc["hr_series"].as_array().unwrap().len(), 0);
    assert!(doc["hrv"].is_null());
}

#[test]
fn malformed_row_flushes_truncated_results() {
    let scenario = tmp("trunc_scenario.json");
    write_scenario(&scenario, STEADY);
    let (trace, truth) = (tmp("trunc_trace.csv"), tmp("trunc_beats.csv"));
    assert!(synth(&scenario, &trace, &truth).status.success());
    let mut body = fs::read_to_string(&trace).unwrap();
    let keep: usize = body.lines().take(600).map(|l| l.len() + 1).sum();
    body.truncate(keep);
    body.push_str("not,a,valid,row\n");
    let bad = tmp("trunc_bad.csv");
    fs::write(&bad, body).unwrap();

    let results = tmp("trunc_results.json");
    let out = bin()
        .args(["process", "--input"])
        .arg(&bad)
        .arg("--output")
        .arg(&results)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed row"));
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&results).unwrap()).unwrap();
    assert!(doc["truncated"].as_bool().unwrap());
    assert_eq!(doc["diagnostics"]["frames_in"].as_u64().unwrap(), 599);
}

#[test]
fn stdin_stdout_streaming_matches_files() {
    let scenario = tmp("stdio_scenario.json");
    write_scenario(&scenario, STEADY);
    let (trace, truth) = (tmp("stdio_trace.csv"), tmp("stdio_beats.csv"));
    assert!(synth(&scenario, &trace, &truth).status.success());

    let results = tmp("stdio_results.json");
    bin()
        .args(["process", "--input"])
        .arg(&trace)
        .arg("--output")
        .arg(&results)
        .output()
        .unwrap();

    let mut child = bin()
        .args(["process", "--input", "-", "--output", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child
        .stdin
        .take()
        .unwrap()
        .write_all(&fs::read(&trace).unwrap())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(out.stdout, fs::read(&results).unwrap());
}

#[test]
fn bench_reports_stage_latencies() {
    let scenario = tmp("bench_scenario.json");
    write_scenario(&scenario, STEADY);
    let timing = tmp("bench_timing.json");
    let out = bin()
        .args(["bench", "--scenario"])
        .arg(&scenario)
        .arg("--output")
        .arg(&timing)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&timing).unwrap()).unwrap();
    assert_eq!(doc["frames"].as_u64().unwrap(), 1800);
    assert!(doc["frames_per_second"].as_f64().unwrap() > 0.0);
    let stages: Vec<&str> = doc["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s[0].as_str().unwrap())
        .collect();
    assert_eq!(
        stages,
        vec!["window", "pos", "spectral", "bvp", "beats", "vitals"]
    );
    // Two runs report the same stage ordering.
    let timing2 = tmp("bench_timing2.json");
    bin()
        .args(["bench", "--scenario"])
        .arg(&scenario)
        .arg("--output")
        .arg(&timing2)
        .output()
        .unwrap();
    let doc2: serde_json::Value = serde_json::from_slice(&fs::read(&timing2).unwrap()).unwrap();
    let stages2: Vec<&str> = doc2["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s[0].as_str().unwrap())
        .collect();
    assert_eq!(stages, stages2);
}

#[test]
fn ablation_flag_is_wired() {
    let scenario = tmp("abl_scenario.json");
    write_scenario(
        &scenario,
        r#"{"duration_s": 40.0, "hr": {"kind": "constant", "bpm": 72.0},
            "motion": {"freq_hz": 2.0, "color_amp": 0.005, "orientation_amp_deg": 3.0},
            "seed": 13}"#,
    );
    let (trace, truth) = (tmp("abl_trace.csv"), tmp("abl_beats.csv"));
    assert!(synth(&scenario, &trace, &truth).status.success());
    let on = tmp("abl_on.json");
    let off = tmp("abl_off.json");
    bin()
        .args(["process", "--input"])
        .arg(&trace)
        .arg("--output")
        .arg(&on)
        .output()
        .unwrap();
    bin()
        .args(["process", "--input"])
        .arg(&trace)
        .arg("--output")
        .arg(&off)
        .arg("--no-motion-suppression")
        .output()
        .unwrap();
    assert_ne!(fs::read(&on).unwrap(), fs::read(&off).unwrap());
}

#[test]
fn invalid_scenario_exits_one() {
    let scenario = tmp("bad_scenario.json");
    write_scenario(
        &scenario,
        r#"{"duration_s": -3.0, "hr": {"kind": "constant", "bpm": 72.0}}"#,
    );
    let out = synth(&scenario, &tmp("bad_t.csv"), &tmp("bad_b.csv"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid scenario"));
}
