//! Run counters, derived metrics and constraint verdicts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{ControlCategory, ProtocolKind};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum MetricsError {
    #[error("duration must be positive")]
    ZeroDuration,
    #[error("no data packet was delivered")]
    NoDeliveries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DropCause {
    NoRouteTimeout,
    ChannelSaturated,
    TtlExpired,
    /// Still buffered or in flight when the run ended.
    EndOfRun,
}

impl DropCause {
    pub const ALL: [DropCause; 4] = [
        DropCause::NoRouteTimeout,
        DropCause::ChannelSaturated,
        DropCause::TtlExpired,
        DropCause::EndOfRun,
    ];
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub transmissions: u64,
    pub originations: u64,
    pub bits: u64,
}

/// Admitted control transmissions. Originations plus relayed copies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlCounters {
    pub transmissions: u64,
    pub originations: u64,
    pub forwardings: u64,
    pub bits: u64,
    /// Link-state transmissions of intra-scope updates.
    pub intra_scope: u64,
    /// Keyed by packet kind (`npdu`, `lsu`, `hello`, `tc`).
    pub by_kind: BTreeMap<String, u64>,
    pub by_category: BTreeMap<ControlCategory, CategoryCount>,
    /// Control transmissions refused by the channel.
    pub dropped: u64,
}

impl ControlCounters {
    pub fn category(&self, c: ControlCategory) -> CategoryCount {
        self.by_category.get(&c).copied().unwrap_or_default()
    }
}

/// Invariant monitors evaluated while the run progresses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Monitors {
    /// Receipts of TTL-2 link-state updates, and those beyond two hops of
    /// the origin as measured when the update was emitted.
    pub scope_checks: u64,
    pub scope_violations: u64,
    /// MPR coverage checks after Hello processing.
    pub mpr_checks: u64,
    pub mpr_violations: u64,
    pub mpr_changes: u64,
    /// Data hops whose endpoints were farther apart than the radio range.
    pub hop_checks: u64,
    pub hop_violations: u64,
    pub update_samples: u64,
    pub update_ratio_max: f64,
    pub update_ratio_out_of_range: u64,
}

/// Measured inputs to the delay-budget constraint, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayInputs {
    pub lsm_interval: f64,
    pub periodic_interval: f64,
    pub mean_degree: f64,
    pub mean_route_hops: f64,
    pub trigger_hop_delay: f64,
}

impl DelayInputs {
    /// Link sensing summed over a node's neighbours.
    pub fn lsm_sum(&self) -> f64 {
        self.lsm_interval * self.mean_degree
    }

    /// Trigger propagation summed over the hops of a route.
    pub fn trigger_sum(&self) -> f64 {
        self.mean_route_hops * self.trigger_hop_delay
    }

    /// The largest of the three sums; all of them must stay below the
    /// critical time.
    pub fn worst(&self) -> f64 {
        self.lsm_sum().max(self.periodic_interval).max(self.trigger_sum())
    }
}

/// Final-topology facts used to parametrize the overhead formulas.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySummary {
    pub degrees: Vec<u32>,
    /// Largest two-hop ball (self included) over all nodes.
    pub max_two_hop_ball: u32,
    pub connected: bool,
    /// Nodes that currently have at least one MPR selector.
    pub mpr_nodes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Constraint {
    /// Link-repair responses against the link-change ceiling.
    LinkRepair,
    /// Every forwarding hop lies within radio range.
    HopDistance,
    /// Per-interval fraction of updated routes is a probability.
    UpdateRatio,
    /// Sensing, periodic and trigger delays against the critical time.
    DelayBudget,
    /// Buffer timeout against the maximum allowed wait.
    BufferTimeout,
    LsmBandwidth,
    PeriodicBandwidth,
    TriggeredBandwidth,
}

impl Constraint {
    pub fn name(self) -> &'static str {
        match self {
            Constraint::LinkRepair => "link_repair",
            Constraint::HopDistance => "hop_distance",
            Constraint::UpdateRatio => "update_ratio",
            Constraint::DelayBudget => "delay_budget",
            Constraint::BufferTimeout => "buffer_timeout",
            Constraint::LsmBandwidth => "lsm_bandwidth",
            Constraint::PeriodicBandwidth => "periodic_bandwidth",
            Constraint::TriggeredBandwidth => "triggered_bandwidth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintVerdict {
    pub constraint: Constraint,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub lc_max: f64,
    /// Seconds.
    pub tau_cri: f64,
    /// Bits per second.
    pub beta_cri: f64,
    /// Seconds.
    pub tau_max_allowed: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            lc_max: 1e9,
            tau_cri: 60.0,
            beta_cri: 2_000_000.0,
            tau_max_allowed: 30.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub protocol: Option<ProtocolKind>,
    pub nodes: usize,
    pub seed: u64,
    /// Seconds.
    pub duration: f64,
    pub data_sent: u64,
    pub data_received: u64,
    pub bytes_received: u64,
    pub sum_e2e_delay_us: u64,
    pub control: ControlCounters,
    pub drops: BTreeMap<DropCause, u64>,
    pub no_route_requests: u64,
    pub link_changes: u64,
    pub link_breaks: u64,
    /// Buffer timeout in seconds.
    pub buffer_timeout: f64,
    pub monitors: Monitors,
    pub delay_inputs: DelayInputs,
    pub topology: TopologySummary,
    pub constraint_verdicts: Vec<ConstraintVerdict>,
}

impl MetricsReport {
    pub fn drops_total(&self) -> u64 {
        self.drops.values().sum()
    }

    pub fn drop_count(&self, cause: DropCause) -> u64 {
        self.drops.get(&cause).copied().unwrap_or(0)
    }

    /// True when every sent packet ended up received or dropped.
    pub fn accounting_balances(&self) -> bool {
        self.data_sent == self.data_received + self.drops_total()
    }

    /// Fraction of data packets that had to wait for a route.
    pub fn p_nr(&self) -> f64 {
        if self.data_sent == 0 {
            0.0
        } else {
            self.no_route_requests as f64 / self.data_sent as f64
        }
    }

    pub fn trigger_responses(&self) -> u64 {
        self.control.category(ControlCategory::Triggered).originations
    }

    pub fn sum_e2e_delay(&self) -> f64 {
        self.sum_e2e_delay_us as f64 / 1e6
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Received bits per second.
pub fn compute_throughput(report: &MetricsReport, duration: f64) -> Result<f64, MetricsError> {
    if !(duration > 0.0) {
        return Err(MetricsError::ZeroDuration);
    }
    Ok(report.bytes_received as f64 * 8.0 / duration)
}

/// Mean end-to-end delay of delivered packets, in seconds.
pub fn compute_ct(report: &MetricsReport) -> Result<f64, MetricsError> {
    if report.data_received == 0 {
        return Err(MetricsError::NoDeliveries);
    }
    Ok(report.sum_e2e_delay() / report.data_received as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostOfEnergy {
    pub routing_packets: u64,
    /// Control transmissions per delivered data packet.
    pub nrl: f64,
    /// Set when control traffic flowed but nothing was delivered.
    pub nrl_infinite: bool,
}

pub fn compute_ce(report: &MetricsReport) -> CostOfEnergy {
    let routing_packets = report.control.transmissions;
    let (nrl, nrl_infinite) = match (report.data_received, routing_packets) {
        (0, 0) => (0.0, false),
        (0, _) => (f64::INFINITY, true),
        (rx, ce) => (ce as f64 / rx as f64, false),
    };
    CostOfEnergy {
        routing_packets,
        nrl,
        nrl_infinite,
    }
}

fn verdict(constraint: Constraint, measured: f64, threshold: f64, pass: bool) -> ConstraintVerdict {
    ConstraintVerdict {
        constraint,
        measured,
        threshold,
        pass,
    }
}

/// One verdict per constraint. Ceilings written with `<=` pass on equality;
/// the strict ones (delay and bandwidth) do not.
pub fn check_constraints(report: &MetricsReport, t: &Thresholds) -> Vec<ConstraintVerdict> {
    let duration = report.duration.max(f64::MIN_POSITIVE);
    let rate = |c: ControlCategory| report.control.category(c).bits as f64 / duration;
    let repairs = report.trigger_responses() as f64;
    let m = &report.monitors;
    let worst_delay = report.delay_inputs.worst();
    let lsm = rate(ControlCategory::LinkSensing);
    let per = rate(ControlCategory::Periodic);
    let tri = rate(ControlCategory::Triggered);
    vec![
        verdict(Constraint::LinkRepair, repairs, t.lc_max, repairs <= t.lc_max),
        verdict(
            Constraint::HopDistance,
            m.hop_violations as f64,
            0.0,
            m.hop_violations == 0,
        ),
        verdict(
            Constraint::UpdateRatio,
            m.update_ratio_max,
            1.0,
            m.update_ratio_out_of_range == 0 && m.update_ratio_max <= 1.0,
        ),
        verdict(Constraint::DelayBudget, worst_delay, t.tau_cri, worst_delay < t.tau_cri),
        verdict(
            Constraint::BufferTimeout,
            report.buffer_timeout,
            t.tau_max_allowed,
            report.buffer_timeout <= t.tau_max_allowed,
        ),
        verdict(Constraint::LsmBandwidth, lsm, t.beta_cri, lsm < t.beta_cri),
        verdict(Constraint::PeriodicBandwidth, per, t.beta_cri, per < t.beta_cri),
        verdict(Constraint::TriggeredBandwidth, tri, t.beta_cri, tri < t.beta_cri),
    ]
}
