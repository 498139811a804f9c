//! Fisheye State Routing with two scopes.
//!
//! A node learns its own links from MAC-layer sensing and floods its
//! neighbour list with TTL 2 every intra-scope interval and TTL 255 every
//! inter-scope interval. Routes are a full shortest-path recomputation over
//! the merged link-state table, done lazily when a lookup needs them. FSR
//! never sends anything in reaction to a link break.

use crate::protocol::packet::{ControlPacket, LinkStateUpdate};
use crate::protocol::{
    diff_routes, shortest_path_tree, AgentContext, AgentTimer, ControlCategory, ProtocolKind,
    ProtocolTimers, RoutingAgent, RoutingTableEntry, UpdateSample,
};
use crate::time::SimTime;
use crate::NodeId;

pub const INTRA_SCOPE_TTL: u8 = 2;
pub const INTER_SCOPE_TTL: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Intra,
    Inter,
}

impl Scope {
    pub fn ttl(self) -> u8 {
        match self {
            Scope::Intra => INTRA_SCOPE_TTL,
            Scope::Inter => INTER_SCOPE_TTL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsrConfig {
    pub intra_interval: SimTime,
    pub inter_interval: SimTime,
}

impl FsrConfig {
    pub fn from_timers(t: &ProtocolTimers) -> Self {
        FsrConfig {
            intra_interval: t.intra_scope,
            inter_interval: t.inter_scope,
        }
    }
}

impl Default for FsrConfig {
    fn default() -> Self {
        Self::from_timers(&ProtocolTimers::default())
    }
}

#[derive(Debug, Clone)]
struct LinkState {
    seq: u64,
    neighbors: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct FsrAgent {
    id: NodeId,
    cfg: FsrConfig,
    seq: u64,
    /// Own links, sorted, with the time each came up.
    own: Vec<(NodeId, SimTime)>,
    table: Vec<Option<LinkState>>,
    routes: Vec<Option<(NodeId, u32)>>,
    installed_at: Vec<SimTime>,
    dirty: bool,
    last_sample: Vec<Option<(NodeId, u32)>>,
    /// Time of the latest event seen; stamps lazily recomputed routes.
    clock: SimTime,
}

impl FsrAgent {
    pub fn new(id: NodeId, n: usize, cfg: FsrConfig) -> Self {
        let mut routes = vec![None; n];
        if id.index() < n {
            routes[id.index()] = Some((id, 0));
        }
        FsrAgent {
            id,
            cfg,
            seq: 0,
            own: Vec::new(),
            table: vec![None; n],
            installed_at: vec![SimTime::ZERO; n],
            last_sample: routes.clone(),
            routes,
            dirty: false,
            clock: SimTime::ZERO,
        }
    }

    pub fn own_neighbors(&self) -> Vec<NodeId> {
        self.own.iter().map(|(n, _)| *n).collect()
    }

    /// Neighbour list this node holds for `origin`, if any.
    pub fn link_state_of(&self, origin: NodeId) -> Option<&[NodeId]> {
        self.table
            .get(origin.index())
            .and_then(|e| e.as_ref())
            .map(|ls| ls.neighbors.as_slice())
    }

    pub fn scope_update(&mut self, scope: Scope) -> LinkStateUpdate {
        self.seq += 1;
        LinkStateUpdate {
            origin: self.id,
            seq: self.seq,
            ttl: scope.ttl(),
            neighbors: self.own.clone(),
        }
    }

    /// Merges `lsu`; returns the copy to relay, if any.
    pub fn merge(&mut self, lsu: &LinkStateUpdate) -> Option<LinkStateUpdate> {
        if lsu.origin == self.id || lsu.origin.index() >= self.table.len() {
            return None;
        }
        let slot = &mut self.table[lsu.origin.index()];
        if let Some(held) = slot {
            if lsu.seq <= held.seq {
                return None;
            }
        }
        let neighbors: Vec<NodeId> = lsu.neighbors.iter().map(|(n, _)| *n).collect();
        let changed = slot.as_ref().is_none_or(|h| h.neighbors != neighbors);
        *slot = Some(LinkState {
            seq: lsu.seq,
            neighbors,
        });
        self.dirty |= changed;
        let ttl = lsu.ttl.saturating_sub(1);
        (ttl > 0).then(|| LinkStateUpdate {
            ttl,
            ..lsu.clone()
        })
    }

    /// Shortest-path tree over own links plus the merged link-state table.
    pub fn compute_routes(&mut self, now: SimTime) {
        let own: Vec<NodeId> = self.own_neighbors();
        let id = self.id;
        let table = &self.table;
        let next = shortest_path_tree(self.routes.len(), id, |u, out| {
            if u == id {
                out.extend_from_slice(&own);
            } else if let Some(Some(ls)) = table.get(u.index()) {
                out.extend_from_slice(&ls.neighbors);
            }
        });
        for (i, (old, new)) in self.routes.iter().zip(&next).enumerate() {
            if old != new {
                self.installed_at[i] = now;
            }
        }
        self.routes = next;
        self.dirty = false;
    }

    fn refresh(&mut self) {
        if self.dirty {
            self.compute_routes(self.clock);
        }
    }

    pub fn hops_to(&mut self, dest: NodeId) -> Option<u32> {
        self.refresh();
        self.routes.get(dest.index()).and_then(|r| r.map(|(_, h)| h))
    }
}

impl RoutingAgent for FsrAgent {
    fn id(&self) -> NodeId {
        self.id
    }

    fn protocol(&self) -> ProtocolKind {
        ProtocolKind::Fsr
    }

    fn start(&mut self, ctx: &mut AgentContext) {
        ctx.set_timer(self.cfg.intra_interval, AgentTimer::FsrIntraScope);
        ctx.set_timer(self.cfg.inter_interval, AgentTimer::FsrInterScope);
    }

    fn on_timer(&mut self, timer: AgentTimer, ctx: &mut AgentContext) {
        let (scope, interval) = match timer {
            AgentTimer::FsrIntraScope => (Scope::Intra, self.cfg.intra_interval),
            AgentTimer::FsrInterScope => (Scope::Inter, self.cfg.inter_interval),
            _ => return,
        };
        let lsu = self.scope_update(scope);
        ctx.emit(ControlPacket::Lsu(lsu), ControlCategory::Periodic, false);
        ctx.set_timer(interval, timer);
    }

    fn on_control(&mut self, _from: NodeId, packet: &ControlPacket, ctx: &mut AgentContext) {
        if let ControlPacket::Lsu(lsu) = packet {
            self.clock = ctx.now;
            if let Some(relay) = self.merge(lsu) {
                ctx.emit(ControlPacket::Lsu(relay), ControlCategory::Periodic, true);
            }
            ctx.routes_changed |= self.dirty;
        }
    }

    fn on_link_change(&mut self, neighbor: NodeId, up: bool, ctx: &mut AgentContext) {
        match self.own.binary_search_by_key(&neighbor, |(n, _)| *n) {
            Ok(pos) if !up => {
                self.own.remove(pos);
            }
            Err(pos) if up => self.own.insert(pos, (neighbor, ctx.now)),
            _ => return,
        }
        self.dirty = true;
        self.clock = ctx.now;
        ctx.routes_changed = true;
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
                    source_protocol: ProtocolKind::Fsr,
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
