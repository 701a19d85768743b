//! CSV traces and figure series, JSON metrics and reports.
//!
//! Every number is written with nine significant digits, and every file
//! carries the seed it came from.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use loopforge_core::harness::{
    ComparisonReport, ControllerVariant, EpisodeMetrics, EpisodeTrace, ScenarioKind, TraceRecord,
};
use serde::{Deserialize, Serialize};

use crate::formats::{fmt_num, round_sig, to_rounded_json};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Format(String),
}

impl ExportError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = ExportError> = std::result::Result<T, E>;

/// Columns of `trace.csv`. Times are in s, positions in rad, torque in N·m,
/// energy and useful work are cumulative J, `fault_active` is 0 or 1.
pub const TRACE_HEADER: [&str; 11] = [
    "seed",
    "time",
    "q",
    "q_dot",
    "q_d",
    "tau",
    "action",
    "reward",
    "energy",
    "useful_work",
    "fault_active",
];

pub const CYCLE_SUCCESS_HEADER: [&str; 4] = ["arm", "seed", "cycle", "success"];
pub const FAULT_RESPONSE_HEADER: [&str; 6] =
    ["arm", "seed", "fault", "onset", "response_time", "recovered"];
pub const ERROR_SERIES_HEADER: [&str; 4] = ["arm", "seed", "time", "error"];
pub const SUMMARY_HEADER: [&str; 9] = [
    "master_seed",
    "metric",
    "baseline_mean",
    "baseline_variance",
    "adaptive_mean",
    "adaptive_variance",
    "difference",
    "ratio",
    "replicates",
];

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| ExportError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn variant_name(v: ControllerVariant) -> &'static str {
    match v {
        ControllerVariant::FixedBaseline => "fixed-baseline",
        ControllerVariant::Adaptive => "adaptive",
    }
}

pub fn kind_name(k: ScenarioKind) -> &'static str {
    match k {
        ScenarioKind::Tracking => "tracking",
        ScenarioKind::FaultRecovery => "fault-recovery",
        ScenarioKind::Vibration => "vibration",
    }
}

/// One row per control tick. An empty trace gives the header alone.
pub fn write_trace_csv(path: &Path, trace: &EpisodeTrace) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRACE_HEADER)?;
    let seed = trace.seed.to_string();
    for r in &trace.records {
        w.write_record([
            seed.clone(),
            fmt_num(r.time),
            fmt_num(r.q),
            fmt_num(r.q_dot),
            fmt_num(r.q_d),
            fmt_num(r.tau),
            r.action.to_string(),
            fmt_num(r.reward),
            fmt_num(r.energy),
            fmt_num(r.useful_work),
            u8::from(r.fault_active).to_string(),
        ])?;
    }
    w.flush().map_err(|e| ExportError::io(path, e))
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    seed: u64,
    time: f64,
    q: f64,
    q_dot: f64,
    q_d: f64,
    tau: f64,
    action: usize,
    reward: f64,
    energy: f64,
    useful_work: f64,
    fault_active: u8,
}

/// Reads a trace written by [`write_trace_csv`]. The control period is not
/// stored per row, so the caller supplies it from the scenario.
pub fn read_trace_csv(path: &Path, control_period: f64) -> Result<EpisodeTrace> {
    let f = fs::File::open(path).map_err(|e| ExportError::io(path, e))?;
    let mut rd = csv::Reader::from_reader(f);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_HEADER {
        return Err(ExportError::Format(format!(
            "{}: unexpected trace header {header:?}",
            path.display()
        )));
    }
    let mut seed = None;
    let mut records = Vec::new();
    for row in rd.deserialize() {
        let r: TraceRow = row?;
        match seed {
            None => seed = Some(r.seed),
            Some(s) if s != r.seed => {
                return Err(ExportError::Format(format!(
                    "{}: rows from seeds {s} and {} in one trace",
                    path.display(),
                    r.seed
                )))
            }
            _ => {}
        }
        records.push(TraceRecord {
            time: r.time,
            q: r.q,
            q_dot: r.q_dot,
            q_d: r.q_d,
            tau: r.tau,
            action: r.action,
            reward: r.reward,
            energy: r.energy,
            useful_work: r.useful_work,
            fault_active: r.fault_active != 0,
        });
    }
    Ok(EpisodeTrace {
        seed: seed.unwrap_or(0),
        control_period,
        records,
    })
}

/// The trace as it reads back from CSV: every float rounded to nine
/// significant digits.
pub fn rounded_trace(trace: &EpisodeTrace) -> EpisodeTrace {
    let records = trace
        .records
        .iter()
        .map(|r| TraceRecord {
            time: round_sig(r.time),
            q: round_sig(r.q),
            q_dot: round_sig(r.q_dot),
            q_d: round_sig(r.q_d),
            tau: round_sig(r.tau),
            reward: round_sig(r.reward),
            energy: round_sig(r.energy),
            useful_work: round_sig(r.useful_work),
            ..*r
        })
        .collect();
    EpisodeTrace {
        records,
        ..trace.clone()
    }
}

/// `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsDocument {
    pub seed: u64,
    pub scenario: ScenarioKind,
    pub variant: ControllerVariant,
    pub metrics: EpisodeMetrics,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = to_rounded_json(value)?;
    fs::write(path, text).map_err(|e| ExportError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| ExportError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_metrics_json(path: &Path, doc: &MetricsDocument) -> Result<()> {
    write_json(path, doc)
}

pub fn read_metrics_json(path: &Path) -> Result<MetricsDocument> {
    read_json(path)
}

pub fn write_report_json(path: &Path, report: &ComparisonReport) -> Result<()> {
    write_json(path, report)
}

pub fn read_report_json(path: &Path) -> Result<ComparisonReport> {
    read_json(path)
}

/// Table of per-metric means, variances, differences and ratios.
pub fn write_summary_csv(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for m in &report.summary {
        w.write_record([
            report.master_seed.to_string(),
            m.metric.clone(),
            opt(m.baseline.map(|s| s.mean)),
            opt(m.baseline.map(|s| s.variance)),
            opt(m.adaptive.map(|s| s.mean)),
            opt(m.adaptive.map(|s| s.variance)),
            opt(m.difference),
            opt(m.ratio),
            m.baseline.map_or(0, |s| s.n).to_string(),
        ])?;
    }
    w.flush().map_err(|e| ExportError::io(path, e))
}

/// One finished episode as seen by the figure series.
#[derive(Debug, Clone, Copy)]
pub struct SeriesSource<'a> {
    pub arm: &'a str,
    pub seed: u64,
    pub metrics: &'a EpisodeMetrics,
    pub trace: &'a EpisodeTrace,
}

pub const CYCLE_SUCCESS_FILE: &str = "cycle_success.csv";
pub const FAULT_RESPONSE_FILE: &str = "fault_response.csv";
pub const ERROR_SERIES_FILE: &str = "error_series.csv";

/// Writes the three tidy figure series into `dir`: per-cycle success,
/// per-fault response time and the tracking-error time series.
pub fn write_series(dir: &Path, sources: &[SeriesSource<'_>]) -> Result<()> {
    let path = dir.join(CYCLE_SUCCESS_FILE);
    let mut w = writer(&path)?;
    w.write_record(CYCLE_SUCCESS_HEADER)?;
    for s in sources {
        for (i, ok) in s.metrics.cycle_success.iter().enumerate() {
            w.write_record([s.arm, &s.seed.to_string(), &i.to_string(), if *ok { "1" } else { "0" }])?;
        }
    }
    w.flush().map_err(|e| ExportError::io(&path, e))?;

    let path = dir.join(FAULT_RESPONSE_FILE);
    let mut w = writer(&path)?;
    w.write_record(FAULT_RESPONSE_HEADER)?;
    for s in sources {
        for (i, f) in s.metrics.fault_responses.iter().enumerate() {
            w.write_record([
                s.arm.to_string(),
                s.seed.to_string(),
                i.to_string(),
                fmt_num(f.onset),
                fmt_num(f.response_time),
                u8::from(f.recovered).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| ExportError::io(&path, e))?;

    let path = dir.join(ERROR_SERIES_FILE);
    let mut w = writer(&path)?;
    w.write_record(ERROR_SERIES_HEADER)?;
    for s in sources {
        let seed = s.seed.to_string();
        for r in &s.trace.records {
            w.write_record([s.arm, &seed, &fmt_num(r.time), &fmt_num(r.error())])?;
        }
    }
    w.flush().map_err(|e| ExportError::io(&path, e))
}
