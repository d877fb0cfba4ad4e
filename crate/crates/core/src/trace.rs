//! Trace and ground-truth file formats.
//!
//! The tracker front-end is out of scope; instead a trace CSV carries one row
//! per camera frame with the RoI mean colour and head orientation:
//!
//! ```text
//! t_ms,r,g,b,pitch,roll,yaw
//! 0,120.1,95.3,88.0,1.2,-0.4,3.1
//! ```
//!
//! Ground truth comes either as a beat-timestamp CSV (`beat_ms`) or an HR
//! series CSV (`t_ms,bpm`). Results are emitted as a single JSON document.

use crate::bvp::BvpStream;
use crate::pipeline::Diagnostics;
use crate::vitals::{HrWindow, VitalsReport};
use serde::{Deserialize, Serialize};
use std::io::BufRead;
use thiserror::Error;

pub const TRACE_HEADER: &str = "t_ms,r,g,b,pitch,roll,yaw";
pub const BEATS_HEADER: &str = "beat_ms";
pub const HR_HEADER: &str = "t_ms,bpm";

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("malformed row at line {0}")]
    MalformedRow(usize),
    #[error("non-monotone timestamp at line {0}")]
    NonMonotoneTimestamp(usize),
    #[error("empty stream")]
    EmptyStream,
    #[error("bpm out of range at line {0}")]
    BpmOutOfRange(usize),
    #[error("i/o: {0}")]
    Io(String),
}

/// One camera frame's worth of tracker output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSample {
    /// Milliseconds since stream start; strictly increasing within a stream.
    pub t_ms: f64,
    pub r_mean: f64,
    pub g_mean: f64,
    pub b_mean: f64,
    /// Head orientation in degrees.
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
}

impl FrameSample {
    /// Field-level validity: finite timestamp, finite non-negative channel
    /// means, finite angles. Monotonicity is checked against the previous
    /// sample by the parser.
    pub fn is_valid(&self) -> bool {
        self.t_ms.is_finite()
            && self.r_mean.is_finite()
            && self.g_mean.is_finite()
            && self.b_mean.is_finite()
            && self.r_mean >= 0.0
            && self.g_mean >= 0.0
            && self.b_mean >= 0.0
            && self.pitch.is_finite()
            && self.roll.is_finite()
            && self.yaw.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundTruthKind {
    Beats,
    Hr,
}

/// Reference measurement used for evaluation: either exact beat timestamps or
/// a device HR series.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Beats(Vec<f64>),
    HrSeries(Vec<(f64, f64)>),
}

impl GroundTruth {
    pub fn kind(&self) -> GroundTruthKind {
        match self {
            GroundTruth::Beats(_) => GroundTruthKind::Beats,
            GroundTruth::HrSeries(_) => GroundTruthKind::Hr,
        }
    }
}

fn parse_field(s: &str, line: usize) -> Result<f64, TraceError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| TraceError::MalformedRow(line))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(TraceError::MalformedRow(line))
    }
}

/// Streaming trace parser over any buffered reader. Yields samples in file
/// order and stops at the first invalid row.
pub struct TraceReader<R: BufRead> {
    reader: R,
    line_no: usize,
    header_seen: bool,
    last_t: Option<f64>,
    failed: bool,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            reader,
            line_no: 0,
            header_seen: false,
            last_t: None,
            failed: false,
        }
    }

    fn parse_row(&mut self, line: &str) -> Result<FrameSample, TraceError> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(TraceError::MalformedRow(self.line_no));
        }
        let sample = FrameSample {
            t_ms: parse_field(fields[0], self.line_no)?,
            r_mean: parse_field(fields[1], self.line_no)?,
            g_mean: parse_field(fields[2], self.line_no)?,
            b_mean: parse_field(fields[3], self.line_no)?,
            pitch: parse_field(fields[4], self.line_no)?,
            roll: parse_field(fields[5], self.line_no)?,
            yaw: parse_field(fields[6], self.line_no)?,
        };
        if !sample.is_valid() {
            return Err(TraceError::MalformedRow(self.line_no));
        }
        if let Some(last) = self.last_t {
            if sample.t_ms <= last {
                return Err(TraceError::NonMonotoneTimestamp(self.line_no));
            }
        }
        self.last_t = Some(sample.t_ms);
        Ok(sample)
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<FrameSample, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let mut line = String::new();
            self.line_no += 1;
            match self.reader.read_line(&mut line) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.failed = true;
                    return Some(Err(TraceError::Io(e.to_string())));
                }
            }
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if !self.header_seen {
                self.header_seen = true;
                if trimmed == TRACE_HEADER {
                    continue;
                }
                self.failed = true;
                return Some(Err(TraceError::MalformedRow(self.line_no)));
            }
            return match self.parse_row(trimmed) {
                Ok(s) => Some(Ok(s)),
                Err(e) => {
                    self.failed = true;
                    Some(Err(e))
                }
            };
        }
    }
}

/// Parse a full trace. Rejects the whole stream on the first malformed row
/// and on empty input.
pub fn parse_trace(bytes: &[u8]) -> Result<Vec<FrameSample>, TraceError> {
    let mut out = Vec::new();
    for item in TraceReader::new(bytes) {
        out.push(item?);
    }
    if out.is_empty() {
        return Err(TraceError::EmptyStream);
    }
    Ok(out)
}

/// Parse a ground-truth file of the given kind.
pub fn parse_ground_truth(bytes: &[u8], kind: GroundTruthKind) -> Result<GroundTruth, TraceError> {
    let expected_header = match kind {
        GroundTruthKind::Beats => BEATS_HEADER,
        GroundTruthKind::Hr => HR_HEADER,
    };
    let mut beats = Vec::new();
    let mut series = Vec::new();
    let mut header_seen = false;
    let mut last_t: Option<f64> = None;
    for (idx, line) in bytes.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| TraceError::Io(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if trimmed == expected_header {
                continue;
            }
            return Err(TraceError::MalformedRow(line_no));
        }
        match kind {
            GroundTruthKind::Beats => {
                let t = parse_field(trimmed, line_no)?;
                if let Some(last) = last_t {
                    if t <= last {
                        return Err(TraceError::NonMonotoneTimestamp(line_no));
                    }
                }
                last_t = Some(t);
                beats.push(t);
            }
            GroundTruthKind::Hr => {
                let fields: Vec<&str> = trimmed.split(',').collect();
                if fields.len() != 2 {
                    return Err(TraceError::MalformedRow(line_no));
                }
                let t = parse_field(fields[0], line_no)?;
                let bpm = parse_field(fields[1], line_no)?;
                if let Some(last) = last_t {
                    if t <= last {
                        return Err(TraceError::NonMonotoneTimestamp(line_no));
                    }
                }
                if bpm <= 20.0 || bpm >= 250.0 {
                    return Err(TraceError::BpmOutOfRange(line_no));
                }
                last_t = Some(t);
                series.push((t, bpm));
            }
        }
    }
    Ok(match kind {
        GroundTruthKind::Beats => GroundTruth::Beats(beats),
        GroundTruthKind::Hr => GroundTruth::HrSeries(series),
    })
}

/// Render a trace back to its CSV form (used by the synth command).
pub fn write_trace(samples: &[FrameSample]) -> String {
    let mut out = String::with_capacity(samples.len() * 48 + 32);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.t_ms, s.r_mean, s.g_mean, s.b_mean, s.pitch, s.roll, s.yaw
        ));
    }
    out
}

pub fn write_ground_truth_beats(beats: &[f64]) -> String {
    let mut out = String::with_capacity(beats.len() * 10 + 8);
    out.push_str(BEATS_HEADER);
    out.push('\n');
    for b in beats {
        out.push_str(&format!("{b}\n"));
    }
    out
}

/// HRV summary as serialized in the results document. `None` fields render
/// as JSON nulls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrvJson {
    pub rmssd_ms: Option<f64>,
    pub lf_nu: Option<f64>,
    pub hf_nu: Option<f64>,
    pub lf_hf_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvpSampleJson {
    pub t_ms: f64,
    pub value: f64,
}

/// The on-disk results document. Field order is fixed so identical inputs
/// serialize byte-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDoc {
    pub hr_series: Vec<HrWindow>,
    pub beats_ms: Vec<f64>,
    pub hrv: Option<HrvJson>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bvp: Option<Vec<BvpSampleJson>>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(default)]
    pub truncated: bool,
}

impl ResultsDoc {
    pub fn new(
        report: &VitalsReport,
        bvp: Option<&BvpStream>,
        diagnostics: Diagnostics,
        truncated: bool,
    ) -> Self {
        let hrv = if report.rmssd_ms.is_some() || report.lf_nu.is_some() {
            Some(HrvJson {
                rmssd_ms: report.rmssd_ms,
                lf_nu: report.lf_nu,
                hf_nu: report.hf_nu,
                lf_hf_ratio: report.lf_hf_ratio,
            })
        } else {
            None
        };
        let bvp = bvp.map(|stream| {
            stream
                .samples()
                .map(|(t_ms, value)| BvpSampleJson { t_ms, value })
                .collect()
        });
        ResultsDoc {
            hr_series: report.hr_series.clone(),
            beats_ms: report.beat_times_ms.clone(),
            hrv,
            bvp,
            diagnostics,
            truncated,
        }
    }
}

/// Serialize a finalized report. Output is bit-stable for identical inputs.
pub fn write_results(doc: &ResultsDoc) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("results serialize");
    s.push('\n');
    s
}

pub fn read_results(bytes: &[u8]) -> Result<ResultsDoc, TraceError> {
    serde_json::from_slice(bytes).map_err(|e| TraceError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn parses_canonical_row() {
        let csv = "t_ms,r,g,b,pitch,roll,yaw\n0,120.1,95.3,88.0,1.2,-0.4,3.1\n";
        let samples = parse_trace(csv.as_bytes()).unwrap();
        assert_eq!(samples.len(), 1);
        let s = samples[0];
        assert_eq!(s.t_ms, 0.0);
        assert_eq!(s.r_mean, 120.1);
        assert_eq!(s.g_mean, 95.3);
        assert_eq!(s.b_mean, 88.0);
        assert_eq!(s.pitch, 1.2);
        assert_eq!(s.roll, -0.4);
        assert_eq!(s.yaw, 3.1);
    }

    #[test]
    fn rejects_backwards_timestamp() {
        let csv = "t_ms,r,g,b,pitch,roll,yaw\n0,1,1,1,0,0,0\n100,1,1,1,0,0,0\n50,1,1,1,0,0,0\n";
        assert_eq!(
            parse_trace(csv.as_bytes()),
            Err(TraceError::NonMonotoneTimestamp(4))
        );
    }

    #[test]
    fn rejects_equal_timestamp() {
        let csv = "t_ms,r,g,b,pitch,roll,yaw\n0,1,1,1,0,0,0\n0,1,1,1,0,0,0\n";
        assert_eq!(
            parse_trace(csv.as_bytes()),
            Err(TraceError::NonMonotoneTimestamp(3))
        );
    }

    #[test]
    fn empty_file_is_empty_stream() {
        assert_eq!(parse_trace(b""), Err(TraceError::EmptyStream));
        assert_eq!(
            parse_trace(b"t_ms,r,g,b,pitch,roll,yaw\n"),
            Err(TraceError::EmptyStream)
        );
    }

    #[test]
    fn rejects_bad_field_count_and_nan() {
        let csv = "t_ms,r,g,b,pitch,roll,yaw\n0,1,1,1,0,0\n";
        assert_eq!(
            parse_trace(csv.as_bytes()),
            Err(TraceError::MalformedRow(2))
        );
        let csv = "t_ms,r,g,b,pitch,roll,yaw\n0,NaN,1,1,0,0,0\n";
        assert_eq!(
            parse_trace(csv.as_bytes()),
            Err(TraceError::MalformedRow(2))
        );
        let csv = "t_ms,r,g,b,pitch,roll,yaw\n0,-5,1,1,0,0,0\n";
        assert_eq!(
            parse_trace(csv.as_bytes()),
            Err(TraceError::MalformedRow(2))
        );
    }

    #[test]
    fn ground_truth_beats() {
        let gt = parse_ground_truth(b"beat_ms\n500\n1300\n2100\n", GroundTruthKind::Beats).unwrap();
        assert_eq!(gt, GroundTruth::Beats(vec![500.0, 1300.0, 2100.0]));
    }

    #[test]
    fn ground_truth_hr() {
        let gt = parse_ground_truth(b"t_ms,bpm\n0,72\n1000,73\n", GroundTruthKind::Hr).unwrap();
        assert_eq!(gt, GroundTruth::HrSeries(vec![(0.0, 72.0), (1000.0, 73.0)]));
    }

    #[test]
    fn ground_truth_beats_must_increase() {
        assert_eq!(
            parse_ground_truth(b"beat_ms\n500\n400\n", GroundTruthKind::Beats),
            Err(TraceError::NonMonotoneTimestamp(3))
        );
    }

    #[test]
    fn empty_report_serializes_null_hrv() {
        let report = VitalsReport::default();
        let doc = ResultsDoc::new(&report, None, Diagnostics::default(), false);
        let json = write_results(&doc);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["hr_series"].as_array().unwrap().len(), 0);
        assert!(value["hrv"].is_null());
        assert!(value.get("bvp").is_none());
    }

    #[test]
    fn results_round_trip() {
        let report = VitalsReport {
            hr_series: vec![HrWindow {
                t_start_ms: 0.0,
                t_end_ms: 15000.0,
                bpm: 71.8,
            }],
            beat_times_ms: vec![400.0, 1233.3, 2066.7],
            rmssd_ms: Some(12.5),
            lf_nu: Some(0.6),
            hf_nu: Some(0.4),
            lf_hf_ratio: Some(1.5),
            n_beats: 3,
        };
        let doc = ResultsDoc::new(&report, None, Diagnostics::default(), false);
        let json = write_results(&doc);
        let parsed = read_results(json.as_bytes()).unwrap();
        assert_eq!(parsed, doc);
        // Bit-stable: serializing the parsed document reproduces the bytes.
        assert_eq!(write_results(&parsed), json);
    }

    #[test]
    fn random_invalid_rows_are_rejected() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..200 {
            let mut rows = vec![
                "10,100,100,100,0,0,0".to_string(),
                "50,100,100,100,0,0,0".to_string(),
                "90,100,100,100,0,0,0".to_string(),
            ];
            let victim = rng.gen_range(0..rows.len());
            rows[victim] = match rng.gen_range(0..5) {
                0 => "50,NaN,100,100,0,0,0".into(),      // non-finite channel
                1 => "50,-3,100,100,0,0,0".into(),       // negative channel
                2 => "50,100,100,0,0,0".into(),          // missing field
                3 => "5,100,100,100,0,0,0".into(),       // goes backwards
                _ => "50,100,100,100,0,inf,0".into(),    // non-finite angle
            };
            // A backwards timestamp in row 0 is just a small first timestamp.
            if victim == 0 && rows[0].starts_with("5,") {
                continue;
            }
            let csv = format!("{TRACE_HEADER}\n{}\n", rows.join("\n"));
            assert!(
                parse_trace(csv.as_bytes()).is_err(),
                "accepted invalid stream: {csv}"
            );
        }
    }

    #[test]
    fn random_rows_round_trip_through_parser() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..20);
            let mut t = 0.0;
            let mut samples = Vec::new();
            for _ in 0..n {
                t += rng.gen_range(1.0..100.0);
                samples.push(FrameSample {
                    t_ms: t,
                    r_mean: rng.gen_range(0.0..255.0),
                    g_mean: rng.gen_range(0.0..255.0),
                    b_mean: rng.gen_range(0.0..255.0),
                    pitch: rng.gen_range(-90.0..90.0),
                    roll: rng.gen_range(-90.0..90.0),
                    yaw: rng.gen_range(-90.0..90.0),
                });
            }
            let csv = write_trace(&samples);
            let parsed = parse_trace(csv.as_bytes()).unwrap();
            assert_eq!(parsed, samples);
            assert!(parsed.iter().all(|s| s.is_valid()));
        }
    }
}
