//! Optimized Link State Routing (single interface, no HNA, no hysteresis).
//!
//! Link sensing is done only with Hello messages. Each node picks multipoint
//! relays (MPRs) covering its strict two-hop neighbourhood; nodes that were
//! picked by someone flood Topology Control (TC) messages listing their
//! selectors, and only MPRs relay those floods.
//!
//! A TC is triggered when the selector set differs from the last non-empty
//! set this node advertised. Triggered TCs restart the periodic TC timer and
//! are rate limited to one per `tc_min_interval`.

use std::collections::{BTreeMap, BTreeSet};

use crate::protocol::packet::{ControlPacket, HelloMessage, LinkStatus, TopologyControl};
use crate::protocol::{
    diff_routes, shortest_path_tree, AgentContext, AgentTimer, ControlCategory, ProtocolKind,
    ProtocolTimers, RoutingAgent, RoutingTableEntry, UpdateSample,
};
use crate::time::SimTime;
use crate::NodeId;

pub const TC_TTL: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcCause {
    Periodic,
    MprChange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsrConfig {
    pub hello_interval: SimTime,
    pub tc_interval: SimTime,
    pub tc_min_interval: SimTime,
}

impl OlsrConfig {
    pub fn from_timers(t: &ProtocolTimers) -> Self {
        OlsrConfig {
            hello_interval: t.hello,
            tc_interval: t.tc_default,
            tc_min_interval: SimTime::from_millis(500),
        }
    }

    /// Neighbour and two-hop tuples live for three Hello intervals.
    pub fn neighbor_hold(&self) -> SimTime {
        SimTime::from_micros(self.hello_interval.as_micros() * 3)
    }

    /// Topology tuples live for three TC intervals.
    pub fn topology_hold(&self) -> SimTime {
        SimTime::from_micros(self.tc_interval.as_micros() * 3)
    }
}

impl Default for OlsrConfig {
    fn default() -> Self {
        Self::from_timers(&ProtocolTimers::default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct LinkTuple {
    sym: bool,
    expires: SimTime,
    /// Symmetric neighbours of this neighbour, excluding us.
    two_hop: NodeBits,
}

#[derive(Debug, Clone)]
struct TopologyTuple {
    ansn: u64,
    selectors: Vec<NodeId>,
    expires: SimTime,
}

#[derive(Debug, Clone)]
pub struct OlsrAgent {
    id: NodeId,
    kind: ProtocolKind,
    cfg: OlsrConfig,
    links: BTreeMap<NodeId, LinkTuple>,
    mpr_set: BTreeSet<NodeId>,
    selectors: BTreeMap<NodeId, SimTime>,
    topology: BTreeMap<NodeId, TopologyTuple>,
    /// Highest TC message sequence seen per originator.
    seen_tc: BTreeMap<NodeId, u64>,
    tc_seq: u64,
    ansn: u64,
    advertised: Vec<NodeId>,
    last_tc_at: Option<SimTime>,
    tc_generation: u64,
    deferred_trigger: bool,
    routes: Vec<Option<(NodeId, u32)>>,
    installed_at: Vec<SimTime>,
    last_sample: Vec<Option<(NodeId, u32)>>,
    dirty: bool,
    clock: SimTime,
    coverage_checks: u64,
    coverage_violations: u64,
    coverage_ok: bool,
    mpr_changes: u64,
}

impl OlsrAgent {
    pub fn new(id: NodeId, n: usize, kind: ProtocolKind, cfg: OlsrConfig) -> Self {
        let mut routes = vec![None; n];
        if id.index() < n {
            routes[id.index()] = Some((id, 0));
        }
        OlsrAgent {
            id,
            kind,
            cfg,
            links: BTreeMap::new(),
            mpr_set: BTreeSet::new(),
            selectors: BTreeMap::new(),
            topology: BTreeMap::new(),
            seen_tc: BTreeMap::new(),
            tc_seq: 0,
            ansn: 0,
            advertised: Vec::new(),
            last_tc_at: None,
            tc_generation: 0,
            deferred_trigger: false,
            installed_at: vec![SimTime::ZERO; n],
            last_sample: routes.clone(),
            routes,
            dirty: false,
            clock: SimTime::ZERO,
            coverage_checks: 0,
            coverage_violations: 0,
            coverage_ok: true,
            mpr_changes: 0,
        }
    }

    pub fn config(&self) -> &OlsrConfig {
        &self.cfg
    }

    pub fn symmetric_neighbors(&self) -> Vec<NodeId> {
        self.links
            .iter()
            .filter(|(_, l)| l.sym)
            .map(|(n, _)| *n)
            .collect()
    }

    /// Strict two-hop neighbours: reachable through a symmetric neighbour,
    /// neither ourselves nor a symmetric neighbour.
    pub fn strict_two_hop(&self) -> BTreeSet<NodeId> {
        self.two_hop_bits().iter().collect()
    }

    fn two_hop_bits(&self) -> NodeBits {
        let mut targets = NodeBits::new(self.routes.len());
        for l in self.links.values().filter(|l| l.sym) {
            targets.union_with(&l.two_hop);
        }
        targets.remove(self.id);
        for n in self.symmetric_neighbors() {
            targets.remove(n);
        }
        targets
    }

    /// Symmetric neighbours with the targets each of them reaches.
    fn cover_candidates(&self, targets: &NodeBits) -> Vec<(NodeId, NodeBits)> {
        self.links
            .iter()
            .filter(|(_, l)| l.sym)
            .map(|(n, l)| (*n, l.two_hop.intersection(targets)))
            .collect()
    }

    fn covers(&self, targets: &NodeBits, mprs: &BTreeSet<NodeId>) -> bool {
        let mut covered = NodeBits::new(targets.capacity());
        for m in mprs {
            if let Some(l) = self.links.get(m).filter(|l| l.sym) {
                covered.union_with(&l.two_hop);
            }
        }
        targets.is_subset(&covered)
    }

    pub fn mpr_set(&self) -> &BTreeSet<NodeId> {
        &self.mpr_set
    }

    pub fn mpr_selectors(&self) -> Vec<NodeId> {
        self.selectors.keys().copied().collect()
    }

    pub fn coverage_checks(&self) -> u64 {
        self.coverage_checks
    }

    pub fn coverage_violations(&self) -> u64 {
        self.coverage_violations
    }

    pub fn mpr_changes(&self) -> u64 {
        self.mpr_changes
    }

    /// Greedy MPR cover over the current neighbour tables.
    pub fn select_mprs(&self) -> BTreeSet<NodeId> {
        let targets = self.two_hop_bits();
        cover_bits(&targets, &self.cover_candidates(&targets))
            .into_iter()
            .collect()
    }

    /// True when every strict two-hop neighbour is adjacent to some MPR.
    pub fn mpr_coverage_holds(&self) -> bool {
        self.covers(&self.two_hop_bits(), &self.mpr_set)
    }

    pub fn hello(&self) -> HelloMessage {
        let neighbors = self
            .links
            .iter()
            .map(|(n, l)| {
                let status = if self.mpr_set.contains(n) {
                    LinkStatus::Mpr
                } else if l.sym {
                    LinkStatus::Sym
                } else {
                    LinkStatus::Asym
                };
                (*n, status)
            })
            .collect();
        HelloMessage {
            origin: self.id,
            neighbors,
        }
    }

    /// Drops expired state. Neighbour expiry reselects MPRs.
    fn purge(&mut self, now: SimTime) {
        let before = self.links.len();
        self.links.retain(|_, l| l.expires > now);
        if self.links.len() != before {
            self.neighborhood_changed();
        }
        self.selectors.retain(|_, exp| *exp > now);
        let before = self.topology.len();
        self.topology.retain(|_, t| t.expires > now);
        if self.topology.len() != before {
            self.dirty = true;
        }
    }

    /// Reselects MPRs and re-evaluates coverage; both depend only on the
    /// neighbour tables.
    fn neighborhood_changed(&mut self) {
        self.dirty = true;
        let targets = self.two_hop_bits();
        let mprs: BTreeSet<NodeId> = cover_bits(&targets, &self.cover_candidates(&targets))
            .into_iter()
            .collect();
        if mprs != self.mpr_set {
            self.mpr_changes += 1;
            self.mpr_set = mprs;
        }
        self.coverage_ok = self.covers(&targets, &self.mpr_set);
    }

    fn check_coverage(&mut self) {
        self.coverage_checks += 1;
        if !self.coverage_ok {
            self.coverage_violations += 1;
        }
    }

    pub fn process_hello(&mut self, from: NodeId, hello: &HelloMessage, now: SimTime) {
        self.clock = now;
        self.purge(now);
        let listed = hello.neighbors.iter().find(|(n, _)| *n == self.id).map(|(_, s)| *s);
        let sym = listed.is_some();
        let mut two_hop = NodeBits::new(self.routes.len());
        if sym {
            for (n, st) in &hello.neighbors {
                if *n != self.id && *st != LinkStatus::Asym {
                    two_hop.insert(*n);
                }
            }
        }
        let changed = self
            .links
            .get(&from)
            .is_none_or(|l| l.sym != sym || l.two_hop != two_hop);
        self.links.insert(
            from,
            LinkTuple {
                sym,
                expires: now + self.cfg.neighbor_hold(),
                two_hop,
            },
        );
        if listed == Some(LinkStatus::Mpr) {
            self.selectors.insert(from, now + self.cfg.neighbor_hold());
        } else {
            self.selectors.remove(&from);
        }
        if changed {
            self.neighborhood_changed();
        }
        self.check_coverage();
    }

    /// Merges a TC heard from `from`; returns the copy to relay, if any.
    pub fn process_tc(&mut self, from: NodeId, tc: &TopologyControl, now: SimTime) -> Option<TopologyControl> {
        self.clock = now;
        if tc.origin == self.id {
            return None;
        }
        // Only accept floods from symmetric neighbours.
        if !self.links.get(&from).is_some_and(|l| l.sym) {
            return None;
        }
        if self.seen_tc.get(&tc.origin).is_some_and(|s| tc.seq <= *s) {
            return None;
        }
        self.seen_tc.insert(tc.origin, tc.seq);
        let fresher = self.topology.get(&tc.origin).is_none_or(|t| tc.ansn >= t.ansn);
        if fresher {
            let changed = self
                .topology
                .get(&tc.origin)
                .is_none_or(|t| t.selectors != tc.selectors);
            self.topology.insert(
                tc.origin,
                TopologyTuple {
                    ansn: tc.ansn,
                    selectors: tc.selectors.clone(),
                    expires: now + self.cfg.topology_hold(),
                },
            );
            self.dirty |= changed;
        }
        let relay = self.selectors.contains_key(&from) && tc.ttl > 1;
        relay.then(|| TopologyControl {
            ttl: tc.ttl - 1,
            ..tc.clone()
        })
    }

    fn build_tc(&mut self, now: SimTime) -> TopologyControl {
        let selectors = self.mpr_selectors();
        if selectors != self.advertised {
            self.ansn += 1;
        }
        self.tc_seq += 1;
        self.advertised.clone_from(&selectors);
        self.last_tc_at = Some(now);
        TopologyControl {
            origin: self.id,
            seq: self.tc_seq,
            ansn: self.ansn,
            ttl: TC_TTL,
            selectors,
            triggered: false,
        }
    }

    /// Periodic or triggered TC emission. Nothing is sent while no neighbour
    /// has selected this node.
    pub fn tc_emit(&mut self, now: SimTime, cause: TcCause) -> Option<TopologyControl> {
        if self.selectors.is_empty() {
            return None;
        }
        let mut tc = self.build_tc(now);
        tc.triggered = cause == TcCause::MprChange;
        Some(tc)
    }

    fn selectors_unstable(&self) -> bool {
        !self.advertised.is_empty()
            && !self.selectors.is_empty()
            && self.mpr_selectors() != self.advertised
    }

    fn restart_tc_timer(&mut self, ctx: &mut AgentContext) {
        self.tc_generation += 1;
        ctx.set_timer(
            self.cfg.tc_interval,
            AgentTimer::OlsrTc {
                generation: self.tc_generation,
            },
        );
    }

    fn maybe_trigger(&mut self, ctx: &mut AgentContext) {
        if !self.selectors_unstable() || self.deferred_trigger {
            return;
        }
        let now = ctx.now;
        let earliest = self
            .last_tc_at
            .map_or(now, |t| t + self.cfg.tc_min_interval);
        if earliest <= now {
            if let Some(tc) = self.tc_emit(now, TcCause::MprChange) {
                ctx.emit(ControlPacket::Tc(tc), ControlCategory::Triggered, false);
                self.restart_tc_timer(ctx);
            }
        } else {
            self.deferred_trigger = true;
            ctx.set_timer(earliest - now, AgentTimer::OlsrTriggeredTc);
        }
    }

    fn refresh(&mut self) {
        if !self.dirty {
            return;
        }
        let id = self.id;
        let links = &self.links;
        let topology = &self.topology;
        let mut scratch: Vec<NodeId> = Vec::new();
        let next = shortest_path_tree(self.routes.len(), id, |u, out| {
            scratch.clear();
            if u == id {
                scratch.extend(links.iter().filter(|(_, l)| l.sym).map(|(n, _)| *n));
            } else {
                if let Some(l) = links.get(&u).filter(|l| l.sym) {
                    scratch.extend(l.two_hop.iter());
                }
                if let Some(t) = topology.get(&u) {
                    scratch.extend(t.selectors.iter().copied());
                }
                scratch.sort_unstable();
                scratch.dedup();
            }
            out.extend_from_slice(&scratch);
        });
        for (i, (old, new)) in self.routes.iter().zip(&next).enumerate() {
            if old != new {
                self.installed_at[i] = self.clock;
            }
        }
        self.routes = next;
        self.dirty = false;
    }

    pub fn hops_to(&mut self, dest: NodeId) -> Option<u32> {
        self.refresh();
        self.routes.get(dest.index()).and_then(|r| r.map(|(_, h)| h))
    }
}

/// Greedy set cover: first every candidate that is the only way to reach
/// some target, then repeatedly the candidate covering the most uncovered
/// targets (lowest id on ties).
pub fn select_cover(
    targets: &BTreeSet<NodeId>,
    candidates: &[(NodeId, BTreeSet<NodeId>)],
) -> BTreeSet<NodeId> {
    let size = targets
        .iter()
        .chain(candidates.iter().flat_map(|(_, c)| c))
        .map(|n| n.index() + 1)
        .max()
        .unwrap_or(0);
    let to_bits = |set: &BTreeSet<NodeId>| {
        let mut b = NodeBits::new(size);
        for n in set {
            b.insert(*n);
        }
        b
    };
    let mut sorted: Vec<(NodeId, NodeBits)> =
        candidates.iter().map(|(m, c)| (*m, to_bits(c))).collect();
    sorted.sort_by_key(|(m, _)| *m);
    cover_bits(&to_bits(targets), &sorted).into_iter().collect()
}

/// `select_cover` over bitsets; `candidates` must be sorted by id.
fn cover_bits(targets: &NodeBits, candidates: &[(NodeId, NodeBits)]) -> Vec<NodeId> {
    let mut chosen = vec![false; candidates.len()];
    for w in targets.iter() {
        let mut via = candidates.iter().enumerate().filter(|(_, (_, c))| c.contains(w));
        if let (Some((i, _)), None) = (via.next(), via.next()) {
            chosen[i] = true;
        }
    }
    let mut uncovered = targets.clone();
    for (i, (_, c)) in candidates.iter().enumerate() {
        if chosen[i] {
            uncovered.subtract(c);
        }
    }
    while !uncovered.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for (i, (_, c)) in candidates.iter().enumerate() {
            if chosen[i] {
                continue;
            }
            let gain = c.intersection_len(&uncovered);
            if gain > 0 && best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, i));
            }
        }
        let Some((_, i)) = best else { break };
        chosen[i] = true;
        uncovered.subtract(&candidates[i].1);
    }
    candidates
        .iter()
        .zip(chosen)
        .filter(|(_, c)| *c)
        .map(|((m, _), _)| *m)
        .collect()
}

/// Node set as a bitmap; grows on insert.
#[derive(Debug, Clone, Eq)]
struct NodeBits {
    words: Vec<u64>,
}

impl PartialEq for NodeBits {
    fn eq(&self, other: &Self) -> bool {
        let n = self.words.len().max(other.words.len());
        (0..n).all(|i| self.word(i) == other.word(i))
    }
}

impl NodeBits {
    fn new(capacity: usize) -> Self {
        NodeBits {
            words: vec![0; capacity.div_ceil(64)],
        }
    }

    fn word(&self, i: usize) -> u64 {
        self.words.get(i).copied().unwrap_or(0)
    }

    fn capacity(&self) -> usize {
        self.words.len() * 64
    }

    fn insert(&mut self, n: NodeId) {
        let i = n.index();
        if i / 64 >= self.words.len() {
            self.words.resize(i / 64 + 1, 0);
        }
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn remove(&mut self, n: NodeId) {
        let i = n.index();
        if let Some(w) = self.words.get_mut(i / 64) {
            *w &= !(1 << (i % 64));
        }
    }

    fn contains(&self, n: NodeId) -> bool {
        let i = n.index();
        self.word(i / 64) & (1 << (i % 64)) != 0
    }

    fn union_with(&mut self, other: &NodeBits) {
        if other.words.len() > self.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    fn intersection(&self, other: &NodeBits) -> NodeBits {
        NodeBits {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    fn subtract(&mut self, other: &NodeBits) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    fn intersection_len(&self, other: &NodeBits) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    fn is_subset(&self, other: &NodeBits) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, a)| a & !other.word(i) == 0)
    }

    fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            (0..64)
                .filter(move |b| w & (1 << b) != 0)
                .map(move |b| NodeId((i * 64 + b) as u32))
        })
    }
}

impl RoutingAgent for OlsrAgent {
    fn id(&self) -> NodeId {
        self.id
    }

    fn protocol(&self) -> ProtocolKind {
        self.kind
    }

    fn start(&mut self, ctx: &mut AgentContext) {
        ctx.set_timer(self.cfg.hello_interval, AgentTimer::OlsrHello);
        ctx.set_timer(
            self.cfg.tc_interval,
            AgentTimer::OlsrTc {
                generation: self.tc_generation,
            },
        );
    }

    fn on_timer(&mut self, timer: AgentTimer, ctx: &mut AgentContext) {
        let now = ctx.now;
        self.clock = now;
        match timer {
            AgentTimer::OlsrHello => {
                self.purge(now);
                // Purging may have dropped neighbours; MPRs follow.
                let mprs = self.select_mprs();
                if mprs != self.mpr_set {
                    self.mpr_changes += 1;
                    self.mpr_set = mprs;
                    self.dirty = true;
                }
                ctx.emit(ControlPacket::Hello(self.hello()), ControlCategory::LinkSensing, false);
                ctx.set_timer(self.cfg.hello_interval, AgentTimer::OlsrHello);
                self.maybe_trigger(ctx);
                ctx.routes_changed |= self.dirty;
            }
            AgentTimer::OlsrTc { generation } => {
                if generation != self.tc_generation {
                    return;
                }
                self.purge(now);
                if let Some(tc) = self.tc_emit(now, TcCause::Periodic) {
                    ctx.emit(ControlPacket::Tc(tc), ControlCategory::Periodic, false);
                }
                self.deferred_trigger = false;
                self.restart_tc_timer(ctx);
            }
            AgentTimer::OlsrTriggeredTc => {
                self.deferred_trigger = false;
                self.maybe_trigger(ctx);
            }
            _ => {}
        }
    }

    fn on_control(&mut self, from: NodeId, packet: &ControlPacket, ctx: &mut AgentContext) {
        match packet {
            ControlPacket::Hello(h) => {
                self.process_hello(from, h, ctx.now);
                self.maybe_trigger(ctx);
            }
            ControlPacket::Tc(tc) => {
                if let Some(relay) = self.process_tc(from, tc, ctx.now) {
                    let category = if relay.triggered {
                        ControlCategory::Triggered
                    } else {
                        ControlCategory::Periodic
                    };
                    ctx.emit(ControlPacket::Tc(relay), category, true);
                }
            }
            _ => return,
        }
        ctx.routes_changed |= self.dirty;
    }

    fn on_link_change(&mut self, _neighbor: NodeId, _up: bool, _ctx: &mut AgentContext) {
        // Link sensing is Hello-based.
    }

    /// Link-layer failure feedback: the neighbour is lost immediately instead
    /// of after the hold time. A later Hello re-establishes it.
    fn on_transmit_failure(&mut self, neighbor: NodeId, ctx: &mut AgentContext) -> bool {
        self.clock = ctx.now;
        if self.links.remove(&neighbor).is_none() {
            return false;
        }
        self.selectors.remove(&neighbor);
        self.neighborhood_changed();
        self.maybe_trigger(ctx);
        ctx.routes_changed = true;
        true
    }

    fn next_hop(&mut self, destination: NodeId) -> Option<NodeId> {
        self.refresh();
        self.routes
            .get(destination.index())
            .and_then(|r| r.map(|(next, _)| next))
    }

    fn routing_table(&mut self) -> Vec<RoutingTableEntry> {
        self.refresh();
        self.routes
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                r.map(|(next, hops)| RoutingTableEntry {
                    destination: NodeId(i as u32),
                    next_hop: next,
                    hops,
                    seq_no: 0,
                    installed_at: self.installed_at[i],
                    advertisable_at: self.installed_at[i],
                    source_protocol: self.kind,
                })
            })
            .collect()
    }

    fn take_update_sample(&mut self) -> UpdateSample {
        self.refresh();
        let sample = diff_routes(&self.last_sample, &self.routes);
        self.last_sample.clone_from(&self.routes);
        sample
    }
}
