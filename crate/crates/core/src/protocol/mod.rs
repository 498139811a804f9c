//! Routing agents and the packets they exchange.
//!
//! Agents never touch the channel or the event queue directly. Each handler
//! receives an [`AgentContext`], records the broadcasts and timers it wants,
//! and the simulation carries them out.

pub mod dsdv;
pub mod fsr;
pub mod olsr;
pub mod packet;

use std::collections::VecDeque;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;
use crate::NodeId;

pub use dsdv::{DsdvAgent, DsdvConfig};
pub use fsr::{FsrAgent, FsrConfig};
pub use olsr::{OlsrAgent, OlsrConfig};
pub use packet::{
    ControlPacket, HelloMessage, LinkStateUpdate, LinkStatus, NpduKind, NpduPacket,
    TopologyControl,
};

/// Hop count marking an unreachable DSDV destination.
pub const INFINITE_HOPS: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProtocolKind {
    Dsdv,
    Fsr,
    Olsr,
    /// OLSR with shortened Hello and TC intervals.
    OlsrM,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::Dsdv,
        ProtocolKind::Fsr,
        ProtocolKind::Olsr,
        ProtocolKind::OlsrM,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Dsdv => "DSDV",
            ProtocolKind::Fsr => "FSR",
            ProtocolKind::Olsr => "OLSR",
            ProtocolKind::OlsrM => "OLSR_M",
        }
    }

    pub fn is_olsr(self) -> bool {
        matches!(self, ProtocolKind::Olsr | ProtocolKind::OlsrM)
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "DSDV" => Ok(ProtocolKind::Dsdv),
            "FSR" => Ok(ProtocolKind::Fsr),
            "OLSR" => Ok(ProtocolKind::Olsr),
            "OLSR_M" | "OLSRM" => Ok(ProtocolKind::OlsrM),
            other => Err(format!("unknown protocol '{other}'")),
        }
    }
}

/// Maintenance intervals. Defaults are the standard values of each protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTimers {
    pub ru_per: SimTime,
    pub lsm_mac: SimTime,
    pub hello: SimTime,
    pub tc_default: SimTime,
    pub intra_scope: SimTime,
    pub inter_scope: SimTime,
}

impl Default for ProtocolTimers {
    fn default() -> Self {
        ProtocolTimers {
            ru_per: SimTime::from_whole_secs(15),
            lsm_mac: SimTime::from_millis(100),
            hello: SimTime::from_whole_secs(2),
            tc_default: SimTime::from_whole_secs(5),
            intra_scope: SimTime::from_whole_secs(5),
            inter_scope: SimTime::from_whole_secs(15),
        }
    }
}

impl ProtocolTimers {
    /// Defaults with the OLSR-M Hello and TC intervals (half the OLSR ones).
    pub fn olsr_m() -> Self {
        ProtocolTimers {
            hello: SimTime::from_whole_secs(1),
            tc_default: SimTime::from_millis(2_500),
            ..ProtocolTimers::default()
        }
    }

    pub fn for_protocol(kind: ProtocolKind) -> Self {
        match kind {
            ProtocolKind::OlsrM => Self::olsr_m(),
            _ => Self::default(),
        }
    }

    pub fn all_positive(&self) -> bool {
        [
            self.ru_per,
            self.lsm_mac,
            self.hello,
            self.tc_default,
            self.intra_scope,
            self.inter_scope,
        ]
        .iter()
        .all(|t| *t > SimTime::ZERO)
    }

    /// The longest periodic interval `kind` relies on.
    pub fn longest_for(&self, kind: ProtocolKind) -> SimTime {
        match kind {
            ProtocolKind::Dsdv => self.ru_per,
            ProtocolKind::Fsr => self.intra_scope.max(self.inter_scope),
            ProtocolKind::Olsr | ProtocolKind::OlsrM => self.hello.max(self.tc_default),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoutingTableEntry {
    pub destination: NodeId,
    pub next_hop: NodeId,
    pub hops: u32,
    pub seq_no: u64,
    pub installed_at: SimTime,
    pub advertisable_at: SimTime,
    pub source_protocol: ProtocolKind,
}

impl RoutingTableEntry {
    pub fn is_usable(&self) -> bool {
        self.hops != INFINITE_HOPS
    }
}

/// Which maintenance operation a control transmission belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControlCategory {
    LinkSensing,
    Periodic,
    Triggered,
}

impl ControlCategory {
    pub fn name(self) -> &'static str {
        match self {
            ControlCategory::LinkSensing => "lsm",
            ControlCategory::Periodic => "periodic",
            ControlCategory::Triggered => "triggered",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Emission {
    pub packet: Rc<ControlPacket>,
    pub category: ControlCategory,
    /// False for originations, true for relayed copies.
    pub forwarded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentTimer {
    DsdvPeriodic,
    FsrIntraScope,
    FsrInterScope,
    OlsrHello,
    OlsrTc { generation: u64 },
    OlsrTriggeredTc,
}

/// Scratch space for one handler invocation.
#[derive(Debug)]
pub struct AgentContext {
    pub now: SimTime,
    pub emissions: Vec<Emission>,
    pub timers: Vec<(SimTime, AgentTimer)>,
    /// Set when forwarding decisions may have changed.
    pub routes_changed: bool,
}

impl AgentContext {
    pub fn new(now: SimTime) -> Self {
        AgentContext {
            now,
            emissions: Vec::new(),
            timers: Vec::new(),
            routes_changed: false,
        }
    }

    pub fn emit(&mut self, packet: ControlPacket, category: ControlCategory, forwarded: bool) {
        self.emissions.push(Emission {
            packet: Rc::new(packet),
            category,
            forwarded,
        });
    }

    /// Schedules `timer` to fire `delay` from now.
    pub fn set_timer(&mut self, delay: SimTime, timer: AgentTimer) {
        self.timers.push((delay, timer));
    }
}

/// Fraction of destinations whose route changed during one sampling interval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateSample {
    pub updated: usize,
    pub known: usize,
}

impl UpdateSample {
    pub fn ratio(&self) -> f64 {
        if self.known == 0 {
            0.0
        } else {
            self.updated as f64 / self.known as f64
        }
    }
}

pub trait RoutingAgent {
    fn id(&self) -> NodeId;
    fn protocol(&self) -> ProtocolKind;
    fn start(&mut self, ctx: &mut AgentContext);
    fn on_timer(&mut self, timer: AgentTimer, ctx: &mut AgentContext);
    fn on_control(&mut self, from: NodeId, packet: &ControlPacket, ctx: &mut AgentContext);
    /// Link-layer notification that the link to `neighbor` came up or went down.
    fn on_link_change(&mut self, neighbor: NodeId, up: bool, ctx: &mut AgentContext);
    /// A unicast to `neighbor` failed at the link layer. Returns true if the
    /// agent dropped the neighbour, in which case routes may have changed.
    fn on_transmit_failure(&mut self, _neighbor: NodeId, _ctx: &mut AgentContext) -> bool {
        false
    }
    /// This node just forwarded (or originated) a data packet toward `destination`.
    fn on_data_forwarded(&mut self, _destination: NodeId, _now: SimTime) {}
    /// `None` means no route.
    fn next_hop(&mut self, destination: NodeId) -> Option<NodeId>;
    fn routing_table(&mut self) -> Vec<RoutingTableEntry>;
    fn take_update_sample(&mut self) -> UpdateSample;
}

/// Route snapshot used by the link-state agents to compute update ratios.
pub(crate) fn diff_routes(
    before: &[Option<(NodeId, u32)>],
    after: &[Option<(NodeId, u32)>],
) -> UpdateSample {
    let mut sample = UpdateSample::default();
    for (b, a) in before.iter().zip(after) {
        if b.is_some() || a.is_some() {
            sample.known += 1;
            if b != a {
                sample.updated += 1;
            }
        }
    }
    sample
}

/// Breadth-first shortest-path tree over a directed adjacency.
///
/// `adjacent(u, out)` must append the successors of `u` in ascending id
/// order. Among equal-length paths the one discovered first wins, which
/// amounts to preferring lower-id relays closer to the source. Returns
/// `(next_hop, hops)` per destination; the source maps to itself with 0 hops.
pub(crate) fn shortest_path_tree<F>(n: usize, src: NodeId, mut adjacent: F) -> Vec<Option<(NodeId, u32)>>
where
    F: FnMut(NodeId, &mut Vec<NodeId>),
{
    let mut out: Vec<Option<(NodeId, u32)>> = vec![None; n];
    if src.index() >= n {
        return out;
    }
    out[src.index()] = Some((src, 0));
    let mut queue = VecDeque::new();
    queue.push_back(src);
    let mut buf = Vec::new();
    while let Some(u) = queue.pop_front() {
        let (first_hop_u, hops_u) = out[u.index()].expect("queued nodes are reached");
        buf.clear();
        adjacent(u, &mut buf);
        for &v in &buf {
            if v.index() >= n || out[v.index()].is_some() {
                continue;
            }
            let first = if u == src { v } else { first_hop_u };
            out[v.index()] = Some((first, hops_u + 1));
            queue.push_back(v);
        }
    }
    out
}

/// A node's agent, dispatching statically to the protocol implementation.
pub enum Agent {
    Dsdv(DsdvAgent),
    Fsr(FsrAgent),
    Olsr(OlsrAgent),
}

impl Agent {
    pub fn new(kind: ProtocolKind, id: NodeId, n: usize, timers: &ProtocolTimers) -> Self {
        match kind {
            ProtocolKind::Dsdv => Agent::Dsdv(DsdvAgent::new(id, DsdvConfig::from_timers(timers))),
            ProtocolKind::Fsr => Agent::Fsr(FsrAgent::new(id, n, FsrConfig::from_timers(timers))),
            ProtocolKind::Olsr | ProtocolKind::OlsrM => {
                Agent::Olsr(OlsrAgent::new(id, n, kind, OlsrConfig::from_timers(timers)))
            }
        }
    }

    pub fn as_olsr(&self) -> Option<&OlsrAgent> {
        match self {
            Agent::Olsr(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_dsdv(&self) -> Option<&DsdvAgent> {
        match self {
            Agent::Dsdv(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_fsr(&self) -> Option<&FsrAgent> {
        match self {
            Agent::Fsr(a) => Some(a),
            _ => None,
        }
    }

    fn inner(&mut self) -> &mut dyn RoutingAgent {
        match self {
            Agent::Dsdv(a) => a,
            Agent::Fsr(a) => a,
            Agent::Olsr(a) => a,
        }
    }
}

impl RoutingAgent for Agent {
    fn id(&self) -> NodeId {
        match self {
            Agent::Dsdv(a) => a.id(),
            Agent::Fsr(a) => a.id(),
            Agent::Olsr(a) => a.id(),
        }
    }

    fn protocol(&self) -> ProtocolKind {
        match self {
            Agent::Dsdv(a) => a.protocol(),
            Agent::Fsr(a) => a.protocol(),
            Agent::Olsr(a) => a.protocol(),
        }
    }

    fn start(&mut self, ctx: &mut AgentContext) {
        self.inner().start(ctx)
    }

    fn on_timer(&mut self, timer: AgentTimer, ctx: &mut AgentContext) {
        self.inner().on_timer(timer, ctx)
    }

    fn on_control(&mut self, from: NodeId, packet: &ControlPacket, ctx: &mut AgentContext) {
        self.inner().on_control(from, packet, ctx)
    }

    fn on_link_change(&mut self, neighbor: NodeId, up: bool, ctx: &mut AgentContext) {
        self.inner().on_link_change(neighbor, up, ctx)
    }

    fn on_data_forwarded(&mut self, destination: NodeId, now: SimTime) {
        self.inner().on_data_forwarded(destination, now)
    }

    fn on_transmit_failure(&mut self, neighbor: NodeId, ctx: &mut AgentContext) -> bool {
        self.inner().on_transmit_failure(neighbor, ctx)
    }

    fn next_hop(&mut self, destination: NodeId) -> Option<NodeId> {
        self.inner().next_hop(destination)
    }

    fn routing_table(&mut self) -> Vec<RoutingTableEntry> {
        self.inner().routing_table()
    }

    fn take_update_sample(&mut self) -> UpdateSample {
        self.inner().take_update_sample()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn olsr_m_shortens_both_olsr_intervals() {
        let d = ProtocolTimers::default();
        let m = ProtocolTimers::olsr_m();
        assert!(m.hello < d.hello && m.tc_default < d.tc_default);
        assert!(m.all_positive() && d.all_positive());
    }

    #[test]
    fn protocol_names_parse_back() {
        for p in ProtocolKind::ALL {
            assert_eq!(p.name().parse::<ProtocolKind>().unwrap(), p);
        }
        assert_eq!("olsr-m".parse::<ProtocolKind>().unwrap(), ProtocolKind::OlsrM);
        assert!("aodv".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn tree_on_a_ring_of_five() {
        // 0-1-2-3-4-0
        let ring = |u: NodeId, out: &mut Vec<NodeId>| {
            let a = (u.0 + 4) % 5;
            let b = (u.0 + 1) % 5;
            out.push(NodeId(a.min(b)));
            out.push(NodeId(a.max(b)));
        };
        let t = shortest_path_tree(5, NodeId(0), ring);
        assert_eq!(t[2], Some((NodeId(1), 2)));
        assert_eq!(t[3], Some((NodeId(4), 2)));
        assert_eq!(t[0], Some((NodeId(0), 0)));
    }
}
