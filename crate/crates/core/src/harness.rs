//! Parameter sweeps with seed replication, aggregation and export.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{compute_ce, compute_ct, compute_throughput, MetricsReport};
use crate::protocol::ProtocolKind;
use crate::scenario::{ScenarioConfig, ScenarioError};
use crate::sim::run_scenario;
use crate::stats::mean_ci95;

/// Caps the number of replications run at once.
pub const THREADS_ENV: &str = "PROROUTE_THREADS";

pub const CSV_HEADER: [&str; 6] = ["axis", "protocol", "metric", "mean", "ci95", "replications"];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("nothing to export")]
    Empty,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed row: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    PauseTime,
    NodeCount,
    Rate,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PauseTime => "pause",
            SweepAxis::NodeCount => "nodes",
            SweepAxis::Rate => "rate",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, ScenarioError> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::PauseTime => cfg.pause = value,
            SweepAxis::NodeCount => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(ScenarioError::invalid(format!(
                        "nodes: sweep value {value} is not a whole number"
                    )));
                }
                cfg.nodes = value as usize;
                cfg.positions = None;
            }
            SweepAxis::Rate => {
                cfg.flow_defaults.rate = value;
                for f in &mut cfg.flows {
                    f.rate = value;
                }
            }
        }
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pause" | "pause_time" => Ok(SweepAxis::PauseTime),
            "nodes" | "node_count" => Ok(SweepAxis::NodeCount),
            "rate" => Ok(SweepAxis::Rate),
            other => Err(format!("unknown axis '{other}' (pause, nodes or rate)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub replications: usize,
    /// Protocols to run; empty means the base protocol only.
    pub protocols: Vec<ProtocolKind>,
}

impl SweepSpec {
    pub fn new(base: ScenarioConfig, axis: SweepAxis, values: Vec<f64>, replications: usize) -> Self {
        SweepSpec {
            base,
            axis,
            values,
            replications,
            protocols: Vec::new(),
        }
    }

    pub fn protocols(&self) -> Vec<ProtocolKind> {
        if self.protocols.is_empty() {
            vec![self.base.protocol]
        } else {
            self.protocols.clone()
        }
    }

    /// Every run of the sweep in (protocol, axis value, replication) order.
    pub fn configs(&self) -> Result<Vec<ScenarioConfig>, ScenarioError> {
        let mut errs = Vec::new();
        if self.replications == 0 {
            errs.push("replications: must be at least 1".to_string());
        }
        if self.values.is_empty() {
            errs.push("values: must not be empty".to_string());
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            errs.push("values: must be sorted ascending without repeats".to_string());
        }
        if !errs.is_empty() {
            return Err(ScenarioError::InvalidConfig(errs));
        }
        let mut out = Vec::new();
        for protocol in self.protocols() {
            for &v in &self.values {
                let mut cfg = self.axis.apply(&self.base, v)?;
                cfg.protocol = protocol;
                cfg.validate()?;
                for r in 0..self.replications {
                    let mut c = cfg.clone();
                    c.seed = self.base.seed.wrapping_add(r as u64);
                    out.push(c);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub ci95: f64,
}

impl Stat {
    fn of(xs: &[f64]) -> Stat {
        match mean_ci95(xs) {
            Some((mean, ci95)) => Stat { mean, ci95 },
            None => Stat {
                mean: f64::NAN,
                ci95: f64::NAN,
            },
        }
    }

    pub fn low(&self) -> f64 {
        self.mean - self.ci95
    }

    pub fn high(&self) -> f64 {
        self.mean + self.ci95
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub axis: f64,
    pub protocol: ProtocolKind,
    /// Bits per second.
    pub throughput: Stat,
    /// Seconds, over replications that delivered at least one packet.
    pub ct: Stat,
    pub ce: Stat,
    /// Over replications with a finite load.
    pub nrl: Stat,
    pub replications: usize,
}

impl AggregateRow {
    pub fn metrics(&self) -> [(&'static str, Stat); 4] {
        [
            ("throughput", self.throughput),
            ("ct", self.ct),
            ("ce", self.ce),
            ("nrl", self.nrl),
        ]
    }

    /// Aggregates replications of one (protocol, axis value) point.
    pub fn from_reports(axis: f64, protocol: ProtocolKind, reports: &[MetricsReport]) -> Self {
        let throughput: Vec<f64> = reports
            .iter()
            .filter_map(|r| compute_throughput(r, r.duration).ok())
            .collect();
        let ct: Vec<f64> = reports.iter().filter_map(|r| compute_ct(r).ok()).collect();
        let ces: Vec<_> = reports.iter().map(compute_ce).collect();
        let ce: Vec<f64> = ces.iter().map(|c| c.routing_packets as f64).collect();
        let nrl: Vec<f64> = ces.iter().filter(|c| !c.nrl_infinite).map(|c| c.nrl).collect();
        AggregateRow {
            axis,
            protocol,
            throughput: Stat::of(&throughput),
            ct: Stat::of(&ct),
            ce: Stat::of(&ce),
            nrl: Stat::of(&nrl),
            replications: reports.len(),
        }
    }
}

/// Rows plus the per-run reports they came from.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<AggregateRow>,
    pub reports: Vec<MetricsReport>,
}

/// Thread count from the environment, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

/// Runs `cfgs` in parallel and returns the reports in input order.
pub fn run_all(cfgs: &[ScenarioConfig]) -> Result<Vec<MetricsReport>, ScenarioError> {
    let work = || -> Result<Vec<MetricsReport>, ScenarioError> {
        cfgs.par_iter().map(run_scenario).collect()
    };
    match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ScenarioError::invalid(format!("{THREADS_ENV}: {e}")))?
            .install(work),
        None => work(),
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, ScenarioError> {
    let cfgs = spec.configs()?;
    let reports = run_all(&cfgs)?;
    let reps = spec.replications;
    let mut rows = Vec::new();
    let mut chunks = reports.chunks(reps);
    for protocol in spec.protocols() {
        for &v in &spec.values {
            let chunk = chunks.next().expect("one chunk per point");
            rows.push(AggregateRow::from_reports(v, protocol, chunk));
        }
    }
    // Axis-major order: all protocols of one axis value together.
    rows.sort_by(|a, b| a.axis.total_cmp(&b.axis).then(a.protocol.cmp(&b.protocol)));
    Ok(SweepResult {
        axis: spec.axis,
        rows,
        reports,
    })
}

/// `axis,protocol,metric,mean,ci95,replications`, one line per metric.
pub fn write_csv<W: std::io::Write>(rows: &[AggregateRow], out: W) -> Result<(), ExportError> {
    if rows.is_empty() {
        return Err(ExportError::Empty);
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        for (metric, s) in r.metrics() {
            w.write_record([
                r.axis.to_string(),
                r.protocol.name().to_string(),
                metric.to_string(),
                s.mean.to_string(),
                s.ci95.to_string(),
                r.replications.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[AggregateRow]) -> Result<String, ExportError> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRecord {
    pub axis: f64,
    pub protocol: ProtocolKind,
    pub metric: String,
    pub mean: f64,
    pub ci95: f64,
    pub replications: usize,
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<CsvRecord>, ExportError> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(ExportError::Parse("unexpected header".into()));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|e| ExportError::Parse(format!("{}: {e}", field(i))))
        };
        out.push(CsvRecord {
            axis: num(0)?,
            protocol: field(1).parse().map_err(ExportError::Parse)?,
            metric: field(2).to_string(),
            mean: num(3)?,
            ci95: num(4)?,
            replications: field(5)
                .parse()
                .map_err(|e| ExportError::Parse(format!("{}: {e}", field(5))))?,
        });
    }
    Ok(out)
}

/// Human-readable table plus how often each constraint held.
pub fn summary(result: &SweepResult) -> Result<String, ExportError> {
    if result.rows.is_empty() {
        return Err(ExportError::Empty);
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>8}  {:<7} {:>14} {:>14} {:>16} {:>12}  reps",
        result.axis.name(),
        "proto",
        "thr (bit/s)",
        "CT (s)",
        "CE (tx)",
        "NRL"
    );
    for r in &result.rows {
        let cell = |st: Stat, prec: usize| format!("{:.*}±{:.*}", prec, st.mean, prec, st.ci95);
        let _ = writeln!(
            s,
            "{:>8}  {:<7} {:>14} {:>14} {:>16} {:>12}  {}",
            r.axis,
            r.protocol.name(),
            cell(r.throughput, 0),
            cell(r.ct, 4),
            cell(r.ce, 0),
            cell(r.nrl, 2),
            r.replications
        );
    }
    let _ = writeln!(s, "\nconstraints (runs passing / runs)");
    let mut tally: std::collections::BTreeMap<&'static str, (usize, usize)> = Default::default();
    for rep in &result.reports {
        for v in &rep.constraint_verdicts {
            let e = tally.entry(v.constraint.name()).or_default();
            e.1 += 1;
            if v.pass {
                e.0 += 1;
            }
        }
    }
    for (name, (pass, total)) in tally {
        let _ = writeln!(s, "  {name:<20} {pass}/{total}");
    }
    Ok(s)
}

/// Writes `sweep.csv` and `summary.txt` into `dir`.
pub fn export_dir(result: &SweepResult, dir: &Path) -> Result<(), ExportError> {
    std::fs::create_dir_all(dir)?;
    let csv = csv_string(&result.rows)?;
    std::fs::write(dir.join("sweep.csv"), csv)?;
    std::fs::write(dir.join("summary.txt"), summary(result)?)?;
    Ok(())
}
