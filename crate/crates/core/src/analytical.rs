//! Closed-form control overhead of DSDV, FSR and OLSR.
//!
//! Each model counts periods over the network lifetime and multiplies by a
//! flooding term `k(k+1)/2`, the worst-case number of retransmissions when
//! `k` nodes take part in a dissemination. Terms that depend on link breaks
//! or MPR changes take an event count from the caller instead of an integral.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricsReport;
use crate::protocol::{ControlCategory, ProtocolKind, ProtocolTimers};
use crate::scenario::ScenarioConfig;
use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticalError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("prediction is for {predicted}, report is for {simulated}")]
    ProtocolMismatch {
        predicted: String,
        simulated: String,
    },
    #[error("prediction covers {predicted} s, report covers {simulated} s")]
    DurationMismatch { predicted: f64, simulated: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadParams {
    pub nodes: u64,
    /// Network start and lifetime, seconds.
    pub tau_ns: f64,
    pub tau_nl: f64,
    pub ru_per: f64,
    pub intra_scope: f64,
    pub inter_scope: f64,
    pub hello: f64,
    /// Nodes inside and outside the intra scope.
    pub n_ias: u64,
    pub n_ies: u64,
    /// Neighbour count of every node.
    pub neighbor_counts: Vec<u64>,
    pub n_mpr: u64,
    /// Whether active routes break at all.
    pub breaks: bool,
    /// Triggered-update epochs, used when `breaks` is set.
    pub trigger_epochs: u64,
    /// Periodic plus triggered TC epochs.
    pub tc_epochs: u64,
    pub mprs_stable: bool,
}

impl OverheadParams {
    /// Table defaults for `nodes` nodes over `duration` seconds, no
    /// neighbours, no breaks.
    pub fn new(nodes: u64, duration: f64) -> Self {
        let t = ProtocolTimers::default();
        OverheadParams {
            nodes,
            tau_ns: 0.0,
            tau_nl: duration,
            ru_per: t.ru_per.as_secs_f64(),
            intra_scope: t.intra_scope.as_secs_f64(),
            inter_scope: t.inter_scope.as_secs_f64(),
            hello: t.hello.as_secs_f64(),
            n_ias: nodes,
            n_ies: 0,
            neighbor_counts: vec![0; nodes as usize],
            n_mpr: 0,
            breaks: false,
            trigger_epochs: 0,
            tc_epochs: 0,
            mprs_stable: true,
        }
    }

    pub fn validate(&self) -> Result<(), AnalyticalError> {
        let bad = |m: &str| Err(AnalyticalError::InvalidParams(m.to_string()));
        if self.nodes == 0 {
            return bad("nodes must be positive");
        }
        if !(self.tau_ns >= 0.0 && self.tau_ns < self.tau_nl && self.tau_nl.is_finite()) {
            return bad("need 0 <= tau_ns < tau_nl");
        }
        for (name, p) in [
            ("ru_per", self.ru_per),
            ("intra_scope", self.intra_scope),
            ("inter_scope", self.inter_scope),
            ("hello", self.hello),
        ] {
            if !(p > 0.0 && p.is_finite()) {
                return Err(AnalyticalError::InvalidParams(format!("{name} must be positive")));
            }
        }
        if self.n_ias + self.n_ies > self.nodes {
            return bad("n_ias + n_ies exceeds nodes");
        }
        if self.neighbor_counts.len() as u64 != self.nodes {
            return bad("one neighbour count per node");
        }
        if self.neighbor_counts.iter().any(|&c| c >= self.nodes) {
            return bad("neighbour count must be below nodes");
        }
        if self.n_mpr > self.nodes {
            return bad("n_mpr exceeds nodes");
        }
        Ok(())
    }

    /// Whole periods of length `period` seconds in the lifetime.
    pub fn periods(&self, period: f64) -> u64 {
        let span = SimTime::from_secs_f64(self.tau_nl).saturating_sub(SimTime::from_secs_f64(self.tau_ns));
        let p = SimTime::from_secs_f64(period).as_micros().max(1);
        span.as_micros() / p
    }

    /// Parameters observed in a finished run of `cfg`.
    pub fn from_report(report: &MetricsReport, cfg: &ScenarioConfig) -> Self {
        let t = cfg.timers();
        let n = report.nodes as u64;
        let n_ias = (report.topology.max_two_hop_ball as u64).min(n);
        let triggered = report.trigger_responses();
        let mut p = OverheadParams {
            nodes: n,
            tau_ns: 0.0,
            tau_nl: report.duration,
            ru_per: t.ru_per.as_secs_f64(),
            intra_scope: t.intra_scope.as_secs_f64(),
            inter_scope: t.inter_scope.as_secs_f64(),
            hello: t.hello.as_secs_f64(),
            n_ias,
            n_ies: n - n_ias,
            neighbor_counts: report.topology.degrees.iter().map(|&d| d as u64).collect(),
            n_mpr: report.topology.mpr_nodes as u64,
            breaks: triggered > 0,
            trigger_epochs: triggered,
            tc_epochs: 0,
            mprs_stable: triggered == 0,
        };
        p.tc_epochs = p.periods(t.tc_default.as_secs_f64()) + triggered;
        p
    }
}

/// `k(k+1)/2`.
pub fn flooding_term(k: u64) -> u64 {
    k * (k + 1) / 2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverheadPrediction {
    pub protocol: ProtocolKind,
    pub components: BTreeMap<String, u64>,
    pub total: u64,
    /// Lifetime the prediction covers, microseconds.
    pub duration_us: u64,
}

impl OverheadPrediction {
    fn new(protocol: ProtocolKind, p: &OverheadParams, parts: &[(&str, u64)]) -> Self {
        let components: BTreeMap<String, u64> =
            parts.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        OverheadPrediction {
            protocol,
            total: components.values().sum(),
            components,
            duration_us: SimTime::from_secs_f64(p.tau_nl - p.tau_ns).as_micros(),
        }
    }

    pub fn component(&self, name: &str) -> u64 {
        self.components.get(name).copied().unwrap_or(0)
    }
}

pub fn predict_dsdv(p: &OverheadParams) -> Result<OverheadPrediction, AnalyticalError> {
    p.validate()?;
    let flood = flooding_term(p.nodes);
    let per = p.periods(p.ru_per) * flood;
    let tri = if p.breaks { p.trigger_epochs * flood } else { 0 };
    Ok(OverheadPrediction::new(
        ProtocolKind::Dsdv,
        p,
        &[("dsdv_per", per), ("dsdv_tri", tri)],
    ))
}

pub fn predict_fsr(p: &OverheadParams) -> Result<OverheadPrediction, AnalyticalError> {
    p.validate()?;
    let intra = p.periods(p.intra_scope) * p.nodes * flooding_term(p.n_ias);
    let inter = p.periods(p.inter_scope) * p.nodes * flooding_term(p.n_ies);
    Ok(OverheadPrediction::new(
        ProtocolKind::Fsr,
        p,
        &[("fsr_intra", intra), ("fsr_inter", inter)],
    ))
}

pub fn predict_olsr(p: &OverheadParams) -> Result<OverheadPrediction, AnalyticalError> {
    predict_olsr_kind(ProtocolKind::Olsr, p)
}

fn predict_olsr_kind(
    kind: ProtocolKind,
    p: &OverheadParams,
) -> Result<OverheadPrediction, AnalyticalError> {
    p.validate()?;
    let hello = p.periods(p.hello) * p.neighbor_counts.iter().sum::<u64>();
    let flood = if p.mprs_stable {
        flooding_term(p.n_mpr)
    } else {
        flooding_term(p.nodes)
    };
    let tc = p.tc_epochs * flood;
    Ok(OverheadPrediction::new(
        kind,
        p,
        &[("olsr_hello", hello), ("olsr_tc", tc)],
    ))
}

pub fn predict(kind: ProtocolKind, p: &OverheadParams) -> Result<OverheadPrediction, AnalyticalError> {
    match kind {
        ProtocolKind::Dsdv => predict_dsdv(p),
        ProtocolKind::Fsr => predict_fsr(p),
        ProtocolKind::Olsr | ProtocolKind::OlsrM => predict_olsr_kind(kind, p),
    }
}

/// Simulated transmissions per prediction component.
pub fn simulated_components(report: &MetricsReport) -> BTreeMap<String, u64> {
    let c = &report.control;
    let kind = |k: &str| c.by_kind.get(k).copied().unwrap_or(0);
    let parts: Vec<(&str, u64)> = match report.protocol {
        Some(ProtocolKind::Dsdv) => vec![
            ("dsdv_per", c.category(ControlCategory::Periodic).transmissions),
            ("dsdv_tri", c.category(ControlCategory::Triggered).transmissions),
        ],
        Some(ProtocolKind::Fsr) => vec![
            ("fsr_intra", c.intra_scope),
            ("fsr_inter", kind("lsu") - c.intra_scope),
        ],
        Some(ProtocolKind::Olsr | ProtocolKind::OlsrM) => {
            vec![("olsr_hello", kind("hello")), ("olsr_tc", kind("tc"))]
        }
        None => Vec::new(),
    };
    parts.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentError {
    pub component: String,
    pub predicted: u64,
    pub simulated: u64,
    /// `|simulated - predicted| / predicted`; absent when undefined.
    pub relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub protocol: ProtocolKind,
    pub components: Vec<ComponentError>,
    pub predicted_total: u64,
    pub simulated_total: u64,
}

impl Comparison {
    pub fn undefined(&self) -> Vec<&str> {
        self.components
            .iter()
            .filter(|c| c.relative.is_none())
            .map(|c| c.component.as_str())
            .collect()
    }
}

pub fn compare(
    prediction: &OverheadPrediction,
    report: &MetricsReport,
) -> Result<Comparison, AnalyticalError> {
    if report.protocol != Some(prediction.protocol) {
        return Err(AnalyticalError::ProtocolMismatch {
            predicted: prediction.protocol.to_string(),
            simulated: report.protocol.map_or("none".into(), |p| p.to_string()),
        });
    }
    let predicted_secs = prediction.duration_us as f64 / 1e6;
    if SimTime::from_secs_f64(report.duration).as_micros() != prediction.duration_us {
        return Err(AnalyticalError::DurationMismatch {
            predicted: predicted_secs,
            simulated: report.duration,
        });
    }
    let sim = simulated_components(report);
    let components = prediction
        .components
        .iter()
        .map(|(name, &predicted)| {
            let simulated = sim.get(name).copied().unwrap_or(0);
            let relative = match (predicted, simulated) {
                (0, 0) => Some(0.0),
                (0, _) => None,
                (p, s) => Some((s as f64 - p as f64).abs() / p as f64),
            };
            ComponentError {
                component: name.clone(),
                predicted,
                simulated,
                relative,
            }
        })
        .collect();
    Ok(Comparison {
        protocol: prediction.protocol,
        components,
        predicted_total: prediction.total,
        simulated_total: sim.values().sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub protocol: ProtocolKind,
    pub component: String,
    pub nodes: u64,
    pub duration: f64,
    pub degree: u64,
    pub n_ias: u64,
    pub n_ies: u64,
    pub n_mpr: u64,
    pub predicted: u64,
}

/// Expected neighbour count of a uniform placement, ignoring border effects.
fn expected_degree(cfg: &ScenarioConfig, nodes: usize) -> usize {
    let area = cfg.width * cfg.height;
    let cover = (std::f64::consts::PI * cfg.range * cfg.range / area).min(1.0);
    ((nodes.saturating_sub(1)) as f64 * cover).round() as usize
}

/// Evaluates every protocol over the grid in `cfg.analytical`.
pub fn prediction_grid(cfg: &ScenarioConfig) -> Result<Vec<GridRow>, AnalyticalError> {
    let g = &cfg.analytical;
    let protocols = if g.protocols.is_empty() {
        ProtocolKind::ALL.to_vec()
    } else {
        g.protocols.clone()
    };
    let nodes = if g.nodes.is_empty() {
        vec![cfg.nodes]
    } else {
        g.nodes.clone()
    };
    let mut rows = Vec::new();
    for &kind in &protocols {
        let t = cfg.intervals_for(kind);
        for &n in &nodes {
            let degrees = if g.degree.is_empty() {
                vec![expected_degree(cfg, n)]
            } else {
                g.degree.clone()
            };
            for &d in &degrees {
                let d = d.min(n.saturating_sub(1)) as u64;
                let n64 = n as u64;
                let n_ias = (g.n_ias.map_or(1 + d * d, |v| v as u64)).min(n64);
                let mut p = OverheadParams::new(n64, cfg.duration);
                p.ru_per = t.ru_per.as_secs_f64();
                p.intra_scope = t.intra_scope.as_secs_f64();
                p.inter_scope = t.inter_scope.as_secs_f64();
                p.hello = t.hello.as_secs_f64();
                p.n_ias = n_ias;
                p.n_ies = n64 - n_ias;
                p.neighbor_counts = vec![d; n];
                p.n_mpr = g.n_mpr.map_or(n64, |v| v as u64).min(n64);
                p.breaks = g.trigger_epochs > 0;
                p.trigger_epochs = g.trigger_epochs;
                p.tc_epochs = p.periods(t.tc_default.as_secs_f64()) + g.trigger_epochs;
                p.mprs_stable = g.mprs_stable;
                let pred = predict(kind, &p)?;
                for (component, &predicted) in &pred.components {
                    rows.push(GridRow {
                        protocol: kind,
                        component: component.clone(),
                        nodes: n64,
                        duration: cfg.duration,
                        degree: d,
                        n_ias: p.n_ias,
                        n_ies: p.n_ies,
                        n_mpr: p.n_mpr,
                        predicted,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// `protocol,component,nodes,duration,degree,n_ias,n_ies,n_mpr,predicted`.
pub fn write_grid_csv<W: Write>(rows: &[GridRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "protocol",
        "component",
        "nodes",
        "duration",
        "degree",
        "n_ias",
        "n_ies",
        "n_mpr",
        "predicted",
    ])?;
    for r in rows {
        w.write_record([
            r.protocol.name().to_string(),
            r.component.clone(),
            r.nodes.to_string(),
            r.duration.to_string(),
            r.degree.to_string(),
            r.n_ias.to_string(),
            r.n_ies.to_string(),
            r.n_mpr.to_string(),
            r.predicted.to_string(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dsdv_without_breaks() {
        let p = OverheadParams::new(10, 900.0);
        let pred = predict_dsdv(&p).unwrap();
        assert_eq!(pred.component("dsdv_per"), 3300);
        assert_eq!(pred.total, 3300);
        assert_eq!(predict_dsdv(&OverheadParams::new(1, 900.0)).unwrap().total, 60);
    }

    #[test]
    fn dsdv_trigger_epochs() {
        let mut p = OverheadParams::new(4, 900.0);
        p.breaks = true;
        p.trigger_epochs = 3;
        assert_eq!(predict_dsdv(&p).unwrap().component("dsdv_tri"), 30);
    }

    #[test]
    fn fsr_scopes() {
        let mut p = OverheadParams::new(4, 900.0);
        p.n_ias = 4;
        let pred = predict_fsr(&p).unwrap();
        assert_eq!(pred.component("fsr_intra"), 7200);
        assert_eq!(pred.component("fsr_inter"), 0);
        p.n_ias = 0;
        assert_eq!(predict_fsr(&p).unwrap().total, 0);
        assert_eq!(p.periods(p.intra_scope), 3 * p.periods(p.inter_scope));
    }

    #[test]
    fn olsr_hello_and_tc() {
        let mut p = OverheadParams::new(5, 900.0);
        p.neighbor_counts = vec![4; 5];
        assert_eq!(predict_olsr(&p).unwrap().component("olsr_hello"), 9000);
        p.neighbor_counts = vec![0; 5];
        p.n_mpr = 2;
        p.tc_epochs = 180;
        let pred = predict_olsr(&p).unwrap();
        assert_eq!(pred.component("olsr_hello"), 0);
        assert_eq!(pred.component("olsr_tc"), 540);
        p.mprs_stable = false;
        assert_eq!(predict_olsr(&p).unwrap().component("olsr_tc"), 180 * 15);
    }

    #[test]
    fn invalid_params() {
        let mut p = OverheadParams::new(5, 900.0);
        p.hello = 0.0;
        assert!(matches!(predict_olsr(&p), Err(AnalyticalError::InvalidParams(_))));
        let mut p = OverheadParams::new(5, 900.0);
        p.n_ies = 1;
        assert!(predict_fsr(&p).is_err());
        assert!(predict_dsdv(&OverheadParams::new(0, 900.0)).is_err());
    }

    #[test]
    fn compare_rules() {
        let p = OverheadParams::new(3, 900.0);
        let pred = predict_dsdv(&p).unwrap();
        let report = MetricsReport {
            protocol: Some(ProtocolKind::Olsr),
            duration: 900.0,
            ..MetricsReport::default()
        };
        assert!(matches!(
            compare(&pred, &report),
            Err(AnalyticalError::ProtocolMismatch { .. })
        ));
        let report = MetricsReport {
            protocol: Some(ProtocolKind::Dsdv),
            duration: 900.0,
            ..MetricsReport::default()
        };
        let c = compare(&pred, &report).unwrap();
        let tri = c.components.iter().find(|c| c.component == "dsdv_tri").unwrap();
        assert_eq!(tri.relative, Some(0.0));
        let per = c.components.iter().find(|c| c.component == "dsdv_per").unwrap();
        assert_eq!(per.relative, Some(1.0));
    }
}
