//! Run statistics and on-disk outputs: trace CSV, summary JSON and
//! comparison tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::Environment;
use crate::control::Strategy;
use crate::error::{Error, Result};
use crate::measure::RunningStats;
use crate::sim::{RunTrace, ScenarioSpec, TraceEvent, TraceSample, EVENT_DISCONNECT};

pub const TRACE_HEADER: [&str; 8] = [
    "t_s",
    "distance_m",
    "rssi_dbm",
    "throughput_kbps",
    "txp_dbm",
    "rssi_target_dbm",
    "power_mw",
    "connected",
];

pub const STD_CONVENTION: &str = "population";

/// Tolerance band used to decide when a signal has recovered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryBand {
    pub rssi_db: f64,
    pub throughput_frac: f64,
    /// Consecutive in-band rows required.
    pub consecutive: usize,
}

impl Default for RecoveryBand {
    fn default() -> Self {
        RecoveryBand {
            rssi_db: 2.0,
            throughput_frac: 0.2,
            consecutive: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "signal", rename_all = "snake_case")]
pub enum ControlledSignal {
    Rssi { target_dbm: f64 },
    Throughput { target_kbps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryTargets {
    pub controlled: Option<ControlledSignal>,
    pub band: RecoveryBand,
    /// Throughput rows earlier than this after a disturbance still carry
    /// estimates that started before it.
    pub throughput_window_s: f64,
}

impl SummaryTargets {
    pub fn for_scenario(spec: &ScenarioSpec) -> Self {
        let c = &spec.controller;
        let controlled = match c.strategy {
            Strategy::Fixed => None,
            Strategy::Rssi => Some(ControlledSignal::Rssi {
                target_dbm: c.rssi_target_dbm,
            }),
            Strategy::Throughput | Strategy::Hybrid => Some(ControlledSignal::Throughput {
                target_kbps: c.throughput_target_kbps,
            }),
        };
        SummaryTargets {
            controlled,
            band: RecoveryBand::default(),
            throughput_window_s: 1.0 / spec.throughput_calc_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub samples: usize,
    pub connected_samples: usize,
    pub mean_rssi_dbm: Option<f64>,
    pub std_rssi_db: Option<f64>,
    pub mean_throughput_kbps: Option<f64>,
    pub std_throughput_kbps: Option<f64>,
    pub mean_txp_dbm: Option<f64>,
    pub mean_power_mw: Option<f64>,
    pub disconnect_count: usize,
    pub disconnect_time_s: Option<f64>,
    pub recovery_time_s: Option<f64>,
}

fn stats_of(values: impl Iterator<Item = f64>) -> (Option<f64>, Option<f64>) {
    let mut s = RunningStats::default();
    for v in values.filter(|v| v.is_finite()) {
        s.push(v);
    }
    (s.mean(), s.std())
}

fn in_band(sample: &TraceSample, signal: ControlledSignal, band: &RecoveryBand) -> bool {
    if !sample.connected {
        return false;
    }
    match signal {
        ControlledSignal::Rssi { target_dbm } => (sample.rssi_dbm - target_dbm).abs() <= band.rssi_db,
        ControlledSignal::Throughput { target_kbps } => {
            (sample.throughput_kbps - target_kbps).abs() <= band.throughput_frac * target_kbps
        }
    }
}

/// Time from `since_s` until the signal first stays in band for the
/// required number of consecutive rows.
pub fn recovery_time(
    samples: &[TraceSample],
    since_s: f64,
    signal: ControlledSignal,
    band: &RecoveryBand,
    throughput_window_s: f64,
) -> Option<f64> {
    let earliest = match signal {
        ControlledSignal::Rssi { .. } => since_s,
        ControlledSignal::Throughput { .. } => since_s + throughput_window_s,
    };
    let need = band.consecutive.max(1);
    let mut run = 0usize;
    let mut run_start = 0.0;
    // Tolerates rounding of row timestamps.
    for s in samples.iter().filter(|s| s.t_s + 1e-9 >= earliest) {
        if in_band(s, signal, band) {
            if run == 0 {
                run_start = s.t_s;
            }
            run += 1;
            if run >= need {
                return Some((run_start - since_s).max(0.0));
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Statistics over the connected part of a trace.
pub fn summarize(trace: &RunTrace, targets: &SummaryTargets) -> MetricsSummary {
    let connected: Vec<&TraceSample> = trace.samples.iter().filter(|s| s.connected).collect();
    let (mean_rssi_dbm, std_rssi_db) = stats_of(connected.iter().map(|s| s.rssi_dbm));
    let (mean_throughput_kbps, std_throughput_kbps) = stats_of(connected.iter().map(|s| s.throughput_kbps));
    let (mean_txp_dbm, _) = stats_of(connected.iter().map(|s| s.txp_dbm));
    let (mean_power_mw, _) = stats_of(connected.iter().map(|s| s.power_mw));

    let disconnects: Vec<&TraceEvent> = trace.events.iter().filter(|e| e.label == EVENT_DISCONNECT).collect();
    let recovery_time_s = match (targets.controlled, trace.first_disturbance_s()) {
        (Some(signal), Some(t0)) => {
            recovery_time(&trace.samples, t0, signal, &targets.band, targets.throughput_window_s)
        }
        _ => None,
    };
    MetricsSummary {
        samples: trace.samples.len(),
        connected_samples: connected.len(),
        mean_rssi_dbm,
        std_rssi_db,
        mean_throughput_kbps,
        std_throughput_kbps,
        mean_txp_dbm,
        mean_power_mw,
        disconnect_count: disconnects.len(),
        disconnect_time_s: disconnects.first().map(|e| e.t_s),
        recovery_time_s,
    }
}

/// Summary file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryDocument {
    pub scenario: String,
    pub env: Environment,
    pub strategy: Strategy,
    pub seed: u64,
    pub std_convention: String,
    pub controlled: Option<ControlledSignal>,
    pub metrics: MetricsSummary,
    pub events: Vec<TraceEvent>,
}

impl SummaryDocument {
    pub fn new(spec: &ScenarioSpec, trace: &RunTrace) -> Self {
        let targets = SummaryTargets::for_scenario(spec);
        SummaryDocument {
            scenario: spec.name.clone(),
            env: spec.env,
            strategy: spec.controller.strategy,
            seed: spec.seed,
            std_convention: STD_CONVENTION.to_string(),
            controlled: targets.controlled,
            metrics: summarize(trace, &targets),
            events: trace.events.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc: SummaryDocument = serde_json::from_str(text)?;
        if doc.std_convention != STD_CONVENTION {
            return Err(Error::invalid("std_convention", format!("expected `{STD_CONVENTION}`")));
        }
        Ok(doc)
    }
}

fn fmt_f64(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("NaN");
    } else {
        // Display prints the shortest string that parses back exactly.
        let _ = write!(out, "{v}");
    }
}

pub fn trace_to_csv(samples: &[TraceSample]) -> String {
    let mut out = TRACE_HEADER.join(",");
    out.push('\n');
    for s in samples {
        for v in [
            s.t_s,
            s.distance_m,
            s.rssi_dbm,
            s.throughput_kbps,
            s.txp_dbm,
            s.rssi_target_dbm,
            s.power_mw,
        ] {
            fmt_f64(&mut out, v);
            out.push(',');
        }
        out.push(if s.connected { '1' } else { '0' });
        out.push('\n');
    }
    out
}

fn parse_field(record: &csv::StringRecord, idx: usize, line: u64) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("");
    raw.trim().parse::<f64>().map_err(|_| {
        Error::Trace(format!(
            "line {line}: column `{}` is not a number: `{raw}`",
            TRACE_HEADER[idx]
        ))
    })
}

/// Parses a trace file. Rows must have strictly increasing timestamps.
pub fn parse_trace(text: &str) -> Result<Vec<TraceSample>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().map(str::trim).ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Trace(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut samples: Vec<TraceSample> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let connected = match record.get(7).map(str::trim) {
            Some("1") => true,
            Some("0") => false,
            other => {
                return Err(Error::Trace(format!(
                    "line {line}: `connected` must be 0 or 1, got `{}`",
                    other.unwrap_or("")
                )))
            }
        };
        let s = TraceSample {
            t_s: parse_field(&record, 0, line)?,
            distance_m: parse_field(&record, 1, line)?,
            rssi_dbm: parse_field(&record, 2, line)?,
            throughput_kbps: parse_field(&record, 3, line)?,
            txp_dbm: parse_field(&record, 4, line)?,
            rssi_target_dbm: parse_field(&record, 5, line)?,
            power_mw: parse_field(&record, 6, line)?,
            connected,
        };
        if !s.t_s.is_finite() {
            return Err(Error::Trace(format!("line {line}: timestamp must be finite")));
        }
        if samples.last().is_some_and(|prev| prev.t_s >= s.t_s) {
            return Err(Error::Trace(format!("line {line}: timestamps must strictly increase")));
        }
        samples.push(s);
    }
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub trace: PathBuf,
    pub summary: PathBuf,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `<prefix>.trace.csv` and `<prefix>.summary.json`.
pub fn write_outputs(trace: &RunTrace, summary: &SummaryDocument, prefix: &Path) -> Result<OutputPaths> {
    let paths = OutputPaths {
        trace: with_suffix(prefix, ".trace.csv"),
        summary: with_suffix(prefix, ".summary.json"),
    };
    write_file(&paths.trace, &trace_to_csv(&trace.samples))?;
    write_file(&paths.summary, &summary.to_json()?)?;
    Ok(paths)
}

pub const COMPARISON_HEADER: [&str; 13] = [
    "scenario",
    "strategy",
    "seed",
    "mean_rssi_dbm",
    "std_rssi_db",
    "mean_throughput_kbps",
    "std_throughput_kbps",
    "mean_txp_dbm",
    "mean_power_mw",
    "disconnect_count",
    "disconnect_time_s",
    "recovery_time_s",
    "connected_samples",
];

/// One row per run.
pub fn comparison_csv(docs: &[SummaryDocument]) -> String {
    let mut out = COMPARISON_HEADER.join(",");
    out.push('\n');
    let opt = |out: &mut String, v: Option<f64>| {
        fmt_f64(out, v.unwrap_or(f64::NAN));
        out.push(',');
    };
    for d in docs {
        let m = &d.metrics;
        let _ = write!(out, "{},{},{},", d.scenario, d.strategy, d.seed);
        opt(&mut out, m.mean_rssi_dbm);
        opt(&mut out, m.std_rssi_db);
        opt(&mut out, m.mean_throughput_kbps);
        opt(&mut out, m.std_throughput_kbps);
        opt(&mut out, m.mean_txp_dbm);
        opt(&mut out, m.mean_power_mw);
        let _ = write!(out, "{},", m.disconnect_count);
        opt(&mut out, m.disconnect_time_s);
        opt(&mut out, m.recovery_time_s);
        let _ = writeln!(out, "{}", m.connected_samples);
    }
    out
}

pub fn write_comparison(docs: &[SummaryDocument], path: &Path) -> Result<()> {
    write_file(path, &comparison_csv(docs))
}
