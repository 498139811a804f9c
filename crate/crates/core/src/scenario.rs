//! Experiment description and its line-oriented file format.
//!
//! ```text
//! [scenario]
//! protocol = OLSR
//! nodes = 50
//! max_speed = 30
//! pause = 2
//!
//! [traffic]
//! flows = 10
//! rate = 4
//!
//! [flow]
//! flow = 0 7 4 512 1.5 900
//! ```
//!
//! Every key is optional; missing ones keep the defaults of
//! [`ScenarioConfig::default`]. `[flow]` lines read
//! `src dst rate packet_bytes start stop` and replace the random flow set.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Thresholds;
use crate::protocol::{ProtocolKind, ProtocolTimers};
use crate::time::SimTime;
use crate::traffic::{FlowDefaults, FlowSpec};
use crate::{NodeId, Position};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        ScenarioError::InvalidConfig(vec![msg.into()])
    }
}

/// Interval overrides; unset fields take the protocol defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalOverrides {
    pub ru_per: Option<f64>,
    pub lsm_mac: Option<f64>,
    pub hello: Option<f64>,
    pub tc_default: Option<f64>,
    pub intra_scope: Option<f64>,
    pub inter_scope: Option<f64>,
}

impl IntervalOverrides {
    fn apply(&self, mut t: ProtocolTimers) -> ProtocolTimers {
        let set = |slot: &mut SimTime, v: Option<f64>| {
            if let Some(v) = v {
                *slot = SimTime::from_secs_f64(v);
            }
        };
        set(&mut t.ru_per, self.ru_per);
        set(&mut t.lsm_mac, self.lsm_mac);
        set(&mut t.hello, self.hello);
        set(&mut t.tc_default, self.tc_default);
        set(&mut t.intra_scope, self.intra_scope);
        set(&mut t.inter_scope, self.inter_scope);
        t
    }

    fn values(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("ru_per", self.ru_per),
            ("lsm_mac", self.lsm_mac),
            ("hello", self.hello),
            ("tc_default", self.tc_default),
            ("intra_scope", self.intra_scope),
            ("inter_scope", self.inter_scope),
        ]
    }
}

/// Grid for the standalone overhead predictions. Empty lists fall back to
/// values derived from the scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalGrid {
    pub protocols: Vec<ProtocolKind>,
    pub nodes: Vec<usize>,
    pub degree: Vec<usize>,
    pub n_ias: Option<usize>,
    pub n_mpr: Option<usize>,
    pub trigger_epochs: u64,
    pub mprs_stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub protocol: ProtocolKind,
    pub nodes: usize,
    pub width: f64,
    pub height: f64,
    pub max_speed: f64,
    /// Seconds.
    pub pause: f64,
    /// Seconds.
    pub duration: f64,
    pub range: f64,
    /// Channel capacity, bits per second.
    pub bandwidth: u64,
    /// Upper bound of the per-receiver delivery jitter, seconds.
    pub jitter: f64,
    pub intervals: IntervalOverrides,
    pub flows: Vec<FlowSpec>,
    pub flow_defaults: FlowDefaults,
    pub thresholds: Thresholds,
    /// Seconds a packet may wait for a route.
    pub buffer_timeout: f64,
    pub seed: u64,
    /// Fixed node positions. When set, nodes never move.
    pub positions: Option<Vec<Position>>,
    pub analytical: AnalyticalGrid,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            protocol: ProtocolKind::Dsdv,
            nodes: 50,
            width: 1000.0,
            height: 1000.0,
            max_speed: 30.0,
            pause: 2.0,
            duration: 900.0,
            range: 250.0,
            bandwidth: 2_000_000,
            jitter: 0.001,
            intervals: IntervalOverrides::default(),
            flows: Vec::new(),
            flow_defaults: FlowDefaults::default(),
            thresholds: Thresholds::default(),
            buffer_timeout: 30.0,
            seed: 1,
            positions: None,
            analytical: AnalyticalGrid::default(),
        }
    }
}

impl ScenarioConfig {
    /// 50 nodes at 30 m/s; the pause time is the swept axis.
    pub fn mobility_preset(protocol: ProtocolKind, pause: f64) -> Self {
        ScenarioConfig {
            protocol,
            nodes: 50,
            max_speed: 30.0,
            pause,
            ..ScenarioConfig::default()
        }
    }

    /// 15 m/s with a 2 s pause; the node count is the swept axis.
    pub fn scalability_preset(protocol: ProtocolKind, nodes: usize) -> Self {
        ScenarioConfig {
            protocol,
            nodes,
            max_speed: 15.0,
            pause: 2.0,
            ..ScenarioConfig::default()
        }
    }

    /// A network whose nodes sit at `positions` for the whole run.
    pub fn fixed(protocol: ProtocolKind, positions: Vec<Position>, duration: f64) -> Self {
        let (w, h) = positions
            .iter()
            .fold((1.0f64, 1.0f64), |(w, h), p| (w.max(p.x), h.max(p.y)));
        ScenarioConfig {
            protocol,
            nodes: positions.len(),
            width: w,
            height: h,
            max_speed: 0.0,
            pause: duration,
            duration,
            positions: Some(positions),
            ..ScenarioConfig::default()
        }
    }

    pub fn timers(&self) -> ProtocolTimers {
        self.intervals_for(self.protocol)
    }

    /// Intervals `kind` would run with under this scenario's overrides.
    pub fn intervals_for(&self, kind: ProtocolKind) -> ProtocolTimers {
        self.intervals.apply(ProtocolTimers::for_protocol(kind))
    }

    pub fn lifetime(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration)
    }

    /// True when no node ever moves during the run.
    pub fn is_static(&self) -> bool {
        self.positions.is_some() || self.max_speed <= 0.0 || self.pause >= self.duration
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut errs = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{name}: must be positive, got {v}"));
            }
        };
        positive("width", self.width);
        positive("height", self.height);
        positive("duration", self.duration);
        positive("range", self.range);
        positive("buffer_timeout", self.buffer_timeout);
        if self.nodes == 0 {
            errs.push("nodes: must be at least 1".into());
        }
        if self.bandwidth == 0 {
            errs.push("bandwidth: must be positive".into());
        }
        if !(self.max_speed >= 0.0 && self.max_speed.is_finite()) {
            errs.push(format!("max_speed: must be non-negative, got {}", self.max_speed));
        }
        if !(self.pause >= 0.0) || self.pause > self.duration {
            errs.push(format!(
                "pause: must lie in [0, duration], got {}",
                self.pause
            ));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            errs.push(format!("jitter: must be non-negative, got {}", self.jitter));
        }
        for (name, v) in self.intervals.values() {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    errs.push(format!("intervals.{name}: must be positive, got {v}"));
                }
            }
        }
        if self.flows.is_empty() {
            let d = &self.flow_defaults;
            if !(d.rate > 0.0 && d.rate.is_finite()) {
                errs.push(format!("traffic.rate: must be positive, got {}", d.rate));
            }
            if d.packet_bytes == 0 {
                errs.push("traffic.packet_bytes: must be positive".into());
            }
        }
        let lifetime = self.lifetime();
        for (i, f) in self.flows.iter().enumerate() {
            if f.src.index() >= self.nodes || f.dst.index() >= self.nodes {
                errs.push(format!("flow[{i}]: endpoint outside 0..{}", self.nodes));
            }
            if let Err(e) = f.validate(lifetime) {
                errs.push(format!("flow[{i}]: {e}"));
            }
        }
        if let Some(p) = &self.positions {
            if p.len() != self.nodes {
                errs.push(format!(
                    "positions: {} given for {} nodes",
                    p.len(),
                    self.nodes
                ));
            }
            if p.iter().any(|q| {
                !(q.x >= 0.0 && q.y >= 0.0 && q.x <= self.width && q.y <= self.height)
            }) {
                errs.push("positions: every node must lie inside the field".into());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::InvalidConfig(errs))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses the `key = value` format. Unknown sections or keys are errors.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut cfg = ScenarioConfig::default();
        let mut section = String::from("scenario");
        let mut errs = Vec::new();
        let mut positions: Vec<(usize, Position)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errs.push(format!("line {}: expected key = value", lineno + 1));
                continue;
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            let at = |msg: String| format!("line {}: {section}.{key}: {msg}", lineno + 1);
            if let Err(msg) = cfg.set(&section, &key, value, &mut positions) {
                errs.push(at(msg));
            }
        }
        if !positions.is_empty() {
            positions.sort_by_key(|(i, _)| *i);
            let expected: Vec<usize> = (0..positions.len()).collect();
            if positions.iter().map(|(i, _)| *i).collect::<Vec<_>>() != expected {
                errs.push("positions: node ids must be 0..n without gaps".into());
            } else {
                cfg.positions = Some(positions.into_iter().map(|(_, p)| p).collect());
            }
        }
        if !errs.is_empty() {
            return Err(ScenarioError::InvalidConfig(errs));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
        positions: &mut Vec<(usize, Position)>,
    ) -> Result<(), String> {
        match (section, key) {
            ("scenario", "protocol") => self.protocol = value.parse()?,
            ("scenario", "nodes") => self.nodes = num(value)?,
            ("scenario", "width") => self.width = num(value)?,
            ("scenario", "height") => self.height = num(value)?,
            ("scenario", "field") => {
                let (w, h) = value
                    .split_once(['x', 'X', ','])
                    .ok_or("expected WIDTHxHEIGHT")?;
                self.width = num(w.trim())?;
                self.height = num(h.trim())?;
            }
            ("scenario", "max_speed") => self.max_speed = num(value)?,
            ("scenario", "pause") => self.pause = num(value)?,
            ("scenario", "duration") => self.duration = num(value)?,
            ("scenario", "range") => self.range = num(value)?,
            ("scenario", "bandwidth") => self.bandwidth = num(value)?,
            ("scenario", "jitter") => self.jitter = num(value)?,
            ("scenario", "seed") => self.seed = num(value)?,
            ("scenario", "buffer_timeout") => self.buffer_timeout = num(value)?,
            ("traffic", "flows") => self.flow_defaults.count = num(value)?,
            ("traffic", "packet_bytes") => self.flow_defaults.packet_bytes = num(value)?,
            ("traffic", "rate") => self.flow_defaults.rate = num(value)?,
            ("traffic", "start_window") => {
                self.flow_defaults.start_window = SimTime::from_secs_f64(num(value)?)
            }
            ("flow", "flow") => self.flows.push(parse_flow(value)?),
            ("intervals", k) => {
                let v = Some(num(value)?);
                let o = &mut self.intervals;
                match k {
                    "ru_per" => o.ru_per = v,
                    "lsm_mac" => o.lsm_mac = v,
                    "hello" => o.hello = v,
                    "tc_default" | "tc" => o.tc_default = v,
                    "intra_scope" => o.intra_scope = v,
                    "inter_scope" => o.inter_scope = v,
                    _ => return Err("unknown interval".into()),
                }
            }
            ("thresholds", "lc_max") => self.thresholds.lc_max = num(value)?,
            ("thresholds", "tau_cri") => self.thresholds.tau_cri = num(value)?,
            ("thresholds", "beta_cri") => self.thresholds.beta_cri = num(value)?,
            ("thresholds", "tau_max_allowed") => self.thresholds.tau_max_allowed = num(value)?,
            ("thresholds", "tau_out_b") => self.buffer_timeout = num(value)?,
            ("positions", id) => {
                let id: usize = num(id)?;
                let mut it = value.split_whitespace();
                let (Some(x), Some(y), None) = (it.next(), it.next(), it.next()) else {
                    return Err("expected `x y`".into());
                };
                positions.push((id, Position::new(num(x)?, num(y)?)));
            }
            ("analytical", k) => {
                let a = &mut self.analytical;
                match k {
                    "protocols" => a.protocols = list(value, |s| s.parse())?,
                    "nodes" => a.nodes = list(value, num)?,
                    "degree" => a.degree = list(value, num)?,
                    "n_ias" => a.n_ias = Some(num(value)?),
                    "n_mpr" => a.n_mpr = Some(num(value)?),
                    "trigger_epochs" => a.trigger_epochs = num(value)?,
                    "mprs_stable" => a.mprs_stable = num(value)?,
                    _ => return Err("unknown key".into()),
                }
            }
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} n={} {}x{} v<={} pause={} T={} seed={}",
            self.protocol,
            self.nodes,
            self.width,
            self.height,
            self.max_speed,
            self.pause,
            self.duration,
            self.seed
        )
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| format!("'{s}': {e}"))
}

fn list<T>(s: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split(',').map(|p| f(p.trim())).collect()
}

fn parse_flow(value: &str) -> Result<FlowSpec, String> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    let [src, dst, rate, bytes, start, stop] = parts[..] else {
        return Err("expected `src dst rate packet_bytes start stop`".into());
    };
    Ok(FlowSpec {
        src: NodeId(num(src)?),
        dst: NodeId(num(dst)?),
        rate: num(rate)?,
        packet_size: num::<u64>(bytes)? * 8,
        start: SimTime::from_secs_f64(num(start)?),
        stop: SimTime::from_secs_f64(num(stop)?),
    })
}
