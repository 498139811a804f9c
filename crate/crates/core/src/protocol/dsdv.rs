//! Destination-Sequenced Distance Vector.
//!
//! Periodic updates carry the self route plus every entry that changed since
//! it was last advertised and has cleared its settling gate. A link break
//! sensed by the MAC marks every route through that neighbour with the next
//! odd ("infinity") sequence number; if any of them carried data recently the
//! node advertises them at once, otherwise they wait for the next periodic
//! update.

use std::collections::BTreeMap;

use crate::protocol::packet::{ControlPacket, NpduKind, NpduPacket};
use crate::protocol::{
    AgentContext, AgentTimer, ControlCategory, ProtocolKind, ProtocolTimers, RoutingAgent,
    RoutingTableEntry, UpdateSample, INFINITE_HOPS,
};
use crate::time::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsdvConfig {
    pub period: SimTime,
    /// Delay before advertising a route that did not improve the metric.
    pub settling: SimTime,
    /// A route is active if it carried data within this window.
    pub active_window: SimTime,
    /// Routing entries per NPDU.
    pub npdu_capacity: usize,
}

impl DsdvConfig {
    pub fn from_timers(t: &ProtocolTimers) -> Self {
        DsdvConfig {
            period: t.ru_per,
            ..DsdvConfig::default()
        }
    }
}

impl Default for DsdvConfig {
    fn default() -> Self {
        DsdvConfig {
            period: SimTime::from_whole_secs(15),
            settling: SimTime::from_whole_secs(6),
            active_window: SimTime::from_whole_secs(10),
            npdu_capacity: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Route {
    next_hop: NodeId,
    hops: u32,
    seq: u64,
    installed_at: SimTime,
    advertisable_at: SimTime,
    /// Changed since last advertised.
    pending: bool,
    last_used: Option<SimTime>,
}

/// What processing one NPDU did to the table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableDelta {
    pub adopted: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct DsdvAgent {
    id: NodeId,
    cfg: DsdvConfig,
    self_seq: u64,
    table: BTreeMap<NodeId, Route>,
    updated: Vec<NodeId>,
}

impl DsdvAgent {
    pub fn new(id: NodeId, cfg: DsdvConfig) -> Self {
        DsdvAgent {
            id,
            cfg,
            self_seq: 0,
            table: BTreeMap::new(),
            updated: Vec::new(),
        }
    }

    pub fn config(&self) -> &DsdvConfig {
        &self.cfg
    }

    pub fn self_seq(&self) -> u64 {
        self.self_seq
    }

    pub fn seq_for(&self, dest: NodeId) -> Option<u64> {
        if dest == self.id {
            Some(self.self_seq)
        } else {
            self.table.get(&dest).map(|r| r.seq)
        }
    }

    pub fn hops_to(&self, dest: NodeId) -> Option<u32> {
        if dest == self.id {
            return Some(0);
        }
        self.table.get(&dest).map(|r| r.hops).filter(|h| *h != INFINITE_HOPS)
    }

    fn mark_updated(&mut self, dest: NodeId) {
        self.updated.push(dest);
    }

    /// Splits `entries` into NPDUs of at most `npdu_capacity` entries. When
    /// more than one packet is needed the first is labelled a full dump.
    fn pack(&self, entries: Vec<(NodeId, u64, u32)>) -> Vec<NpduPacket> {
        let cap = self.cfg.npdu_capacity.max(1);
        let chunks: Vec<Vec<_>> = entries.chunks(cap).map(|c| c.to_vec()).collect();
        let multi = chunks.len() > 1;
        chunks
            .into_iter()
            .enumerate()
            .map(|(i, entries)| NpduPacket {
                origin: self.id,
                kind: if multi && i == 0 {
                    NpduKind::Full
                } else {
                    NpduKind::Incremental
                },
                entries,
            })
            .collect()
    }

    /// Periodic update: bump the self sequence number and advertise every
    /// changed entry that has cleared its settling gate.
    pub fn periodic_update(&mut self, now: SimTime) -> Vec<NpduPacket> {
        self.self_seq += 2;
        let mut entries = vec![(self.id, self.self_seq, 0)];
        for (&dest, route) in self.table.iter_mut() {
            if route.pending && route.advertisable_at <= now {
                route.pending = false;
                entries.push((dest, route.seq, route.hops));
            }
        }
        self.pack(entries)
    }

    /// Link to `neighbor` went down. Returns the triggered NPDUs, if any
    /// affected route was active.
    pub fn trigger_update(&mut self, neighbor: NodeId, now: SimTime) -> Vec<NpduPacket> {
        let window = self.cfg.active_window;
        let mut affected = Vec::new();
        let mut active = false;
        for (&dest, route) in self.table.iter_mut() {
            if route.next_hop != neighbor || route.hops == INFINITE_HOPS {
                continue;
            }
            // Odd sequence number one past the last valid one.
            route.seq += 1;
            route.hops = INFINITE_HOPS;
            route.pending = true;
            route.advertisable_at = now;
            if let Some(used) = route.last_used {
                if now.saturating_sub(used) <= window {
                    active = true;
                }
            }
            affected.push(dest);
        }
        for &d in &affected {
            self.mark_updated(d);
        }
        if !active {
            return Vec::new();
        }
        let entries: Vec<_> = affected
            .iter()
            .map(|d| {
                let r = self.table.get_mut(d).expect("affected entry");
                r.pending = false;
                (*d, r.seq, r.hops)
            })
            .collect();
        self.pack(entries)
    }

    /// Merges an NPDU heard from `from`.
    pub fn process_npdu(&mut self, from: NodeId, packet: &NpduPacket, now: SimTime) -> TableDelta {
        let mut delta = TableDelta::default();
        for &(dest, seq, hops) in &packet.entries {
            if dest == self.id {
                continue;
            }
            let new_hops = if hops == INFINITE_HOPS {
                INFINITE_HOPS
            } else {
                hops + 1
            };
            let adopt = match self.table.get(&dest) {
                None => new_hops != INFINITE_HOPS,
                Some(r) => seq > r.seq || (seq == r.seq && new_hops < r.hops),
            };
            if !adopt {
                continue;
            }
            let settling = self.cfg.settling;
            let route = self.table.entry(dest).or_insert(Route {
                next_hop: from,
                hops: INFINITE_HOPS,
                seq: 0,
                installed_at: now,
                advertisable_at: now,
                pending: true,
                last_used: None,
            });
            let improving =
                new_hops != INFINITE_HOPS && (route.hops == INFINITE_HOPS || new_hops < route.hops);
            if route.next_hop != from || route.hops != new_hops {
                route.installed_at = now;
            }
            route.advertisable_at = if improving || new_hops == INFINITE_HOPS {
                now
            } else {
                now + settling
            };
            route.next_hop = from;
            route.hops = new_hops;
            route.seq = seq;
            route.pending = true;
            delta.adopted.push(dest);
        }
        for &d in &delta.adopted {
            self.mark_updated(d);
        }
        delta
    }

    fn emit_all(ctx: &mut AgentContext, packets: Vec<NpduPacket>, category: ControlCategory) {
        for p in packets {
            ctx.emit(ControlPacket::Npdu(p), category, false);
        }
    }
}

impl RoutingAgent for DsdvAgent {
    fn id(&self) -> NodeId {
        self.id
    }

    fn protocol(&self) -> ProtocolKind {
        ProtocolKind::Dsdv
    }

    fn start(&mut self, ctx: &mut AgentContext) {
        ctx.set_timer(self.cfg.period, AgentTimer::DsdvPeriodic);
    }

    fn on_timer(&mut self, timer: AgentTimer, ctx: &mut AgentContext) {
        if timer == AgentTimer::DsdvPeriodic {
            let packets = self.periodic_update(ctx.now);
            Self::emit_all(ctx, packets, ControlCategory::Periodic);
            ctx.set_timer(self.cfg.period, AgentTimer::DsdvPeriodic);
        }
    }

    fn on_control(&mut self, from: NodeId, packet: &ControlPacket, ctx: &mut AgentContext) {
        if let ControlPacket::Npdu(p) = packet {
            let delta = self.process_npdu(from, p, ctx.now);
            ctx.routes_changed |= !delta.adopted.is_empty();
        }
    }

    fn on_link_change(&mut self, neighbor: NodeId, up: bool, ctx: &mut AgentContext) {
        if up {
            return;
        }
        let had_routes = self
            .table
            .values()
            .any(|r| r.next_hop == neighbor && r.hops != INFINITE_HOPS);
        let packets = self.trigger_update(neighbor, ctx.now);
        Self::emit_all(ctx, packets, ControlCategory::Triggered);
        ctx.routes_changed |= had_routes;
    }

    fn on_data_forwarded(&mut self, destination: NodeId, now: SimTime) {
        if let Some(r) = self.table.get_mut(&destination) {
            r.last_used = Some(now);
        }
    }

    fn next_hop(&mut self, destination: NodeId) -> Option<NodeId> {
        if destination == self.id {
            return Some(self.id);
        }
        self.table
            .get(&destination)
            .filter(|r| r.hops != INFINITE_HOPS)
            .map(|r| r.next_hop)
    }

    fn routing_table(&mut self) -> Vec<RoutingTableEntry> {
        let mut out = vec![RoutingTableEntry {
            destination: self.id,
            next_hop: self.id,
            hops: 0,
            seq_no: self.self_seq,
            installed_at: SimTime::ZERO,
            advertisable_at: SimTime::ZERO,
            source_protocol: ProtocolKind::Dsdv,
        }];
        out.extend(self.table.iter().map(|(&d, r)| RoutingTableEntry {
            destination: d,
            next_hop: r.next_hop,
            hops: r.hops,
            seq_no: r.seq,
            installed_at: r.installed_at,
            advertisable_at: r.advertisable_at,
            source_protocol: ProtocolKind::Dsdv,
        }));
        out
    }

    fn take_update_sample(&mut self) -> UpdateSample {
        let mut updated = std::mem::take(&mut self.updated);
        updated.sort_unstable();
        updated.dedup();
        UpdateSample {
            updated: updated.len(),
            known: self.table.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent() -> DsdvAgent {
        DsdvAgent::new(NodeId(0), DsdvConfig::default())
    }

    fn npdu(origin: u32, entries: &[(u32, u64, u32)]) -> NpduPacket {
        NpduPacket {
            origin: NodeId(origin),
            kind: NpduKind::Incremental,
            entries: entries
                .iter()
                .map(|&(d, s, h)| (NodeId(d), s, h))
                .collect(),
        }
    }

    fn t(s: u64) -> SimTime {
        SimTime::from_whole_secs(s)
    }

    #[test]
    fn cold_start_advertises_only_self_with_seq_two() {
        let mut a = agent();
        let out = a.periodic_update(t(15));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].entries, vec![(NodeId(0), 2, 0)]);
        assert_eq!(a.self_seq() % 2, 0);
    }

    fn seed_changes(a: &mut DsdvAgent, count: u32) {
        let entries: Vec<_> = (1..=count).map(|d| (d, 10, 0)).collect();
        a.process_npdu(NodeId(1), &npdu(1, &entries), SimTime::ZERO);
    }

    #[test]
    fn few_changes_fit_one_npdu() {
        let mut a = agent();
        seed_changes(&mut a, 2); // self + 2 changed = 3 entries
        let out = a.periodic_update(t(15));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].entries.len(), 3);
    }

    #[test]
    fn overflow_splits_by_capacity() {
        let mut a = agent();
        seed_changes(&mut a, 119); // self + 119 = 120 entries
        let out = a.periodic_update(t(15));
        let sizes: Vec<usize> = out.iter().map(|p| p.entries.len()).collect();
        // Oracle: ceil(120 / 50) packets, all full but the last.
        assert_eq!(out.len(), 120_usize.div_ceil(50));
        assert_eq!(sizes, vec![50, 50, 20]);
        assert_eq!(out[0].kind, NpduKind::Full);
        assert_eq!(out[1].kind, NpduKind::Incremental);
    }

    #[test]
    fn newer_sequence_wins_even_with_more_hops() {
        let mut a = agent();
        a.process_npdu(NodeId(1), &npdu(1, &[(9, 100, 2)]), t(0));
        assert_eq!(a.hops_to(NodeId(9)), Some(3));
        a.process_npdu(NodeId(2), &npdu(2, &[(9, 102, 4)]), t(1));
        assert_eq!(a.hops_to(NodeId(9)), Some(5));
        assert_eq!(a.next_hop(NodeId(9)), Some(NodeId(2)));
    }

    #[test]
    fn equal_sequence_fewer_hops_wins() {
        let mut a = agent();
        a.process_npdu(NodeId(1), &npdu(1, &[(9, 100, 2)]), t(0));
        a.process_npdu(NodeId(2), &npdu(2, &[(9, 100, 1)]), t(1));
        assert_eq!(a.hops_to(NodeId(9)), Some(2));
        assert_eq!(a.next_hop(NodeId(9)), Some(NodeId(2)));
    }

    #[test]
    fn equal_sequence_equal_hops_is_ignored() {
        let mut a = agent();
        a.process_npdu(NodeId(1), &npdu(1, &[(9, 100, 2)]), t(0));
        let delta = a.process_npdu(NodeId(2), &npdu(2, &[(9, 100, 2)]), t(1));
        assert!(delta.adopted.is_empty());
        assert_eq!(a.next_hop(NodeId(9)), Some(NodeId(1)));
    }

    #[test]
    fn non_improving_routes_wait_for_settling() {
        let mut a = agent();
        a.process_npdu(NodeId(1), &npdu(1, &[(9, 100, 2)]), t(0));
        a.periodic_update(t(1));
        a.process_npdu(NodeId(1), &npdu(1, &[(9, 102, 2)]), t(10));
        let early = a.periodic_update(t(12));
        assert_eq!(early[0].entries.len(), 1);
        let later = a.periodic_update(t(16));
        assert!(later[0].entries.contains(&(NodeId(9), 102, 3)));
    }

    fn table_with_two_via(a: &mut DsdvAgent, via: u32) {
        a.process_npdu(NodeId(via), &npdu(via, &[(via, 10, 0), (7, 20, 1)]), t(0));
        a.process_npdu(NodeId(3), &npdu(3, &[(3, 4, 0)]), t(0));
    }

    #[test]
    fn idle_break_sends_nothing() {
        let mut a = agent();
        table_with_two_via(&mut a, 1);
        assert!(a.trigger_update(NodeId(1), t(5)).is_empty());
        // Routes are still invalidated for forwarding.
        assert_eq!(a.next_hop(NodeId(7)), None);
    }

    #[test]
    fn active_break_marks_downstream_with_infinity() {
        let mut a = agent();
        table_with_two_via(&mut a, 1);
        a.on_data_forwarded(NodeId(7), t(3));
        let out = a.trigger_update(NodeId(1), t(5));
        assert_eq!(out.len(), 1);
        // Oracle: every entry whose next hop is the broken neighbour.
        let expected: Vec<_> = a
            .routing_table()
            .into_iter()
            .filter(|e| e.next_hop == NodeId(1) && e.destination != NodeId(0))
            .map(|e| e.destination)
            .collect();
        assert_eq!(expected.len(), 2);
        let advertised: Vec<_> = out[0].entries.iter().map(|e| e.0).collect();
        assert_eq!(advertised, expected);
        for &(_, seq, hops) in &out[0].entries {
            assert_eq!(seq % 2, 1);
            assert_eq!(hops, INFINITE_HOPS);
        }
        assert_eq!(a.next_hop(NodeId(7)), None);
        assert_eq!(a.next_hop(NodeId(3)), Some(NodeId(3)));
    }

    #[test]
    fn stale_activity_does_not_trigger() {
        let mut a = agent();
        table_with_two_via(&mut a, 1);
        a.on_data_forwarded(NodeId(7), t(3));
        assert!(a.trigger_update(NodeId(1), t(20)).is_empty());
    }

    #[test]
    fn self_route_and_infinity_lookup() {
        let mut a = agent();
        assert_eq!(a.next_hop(NodeId(0)), Some(NodeId(0)));
        a.process_npdu(NodeId(1), &npdu(1, &[(9, 100, 2)]), t(0));
        a.process_npdu(NodeId(1), &npdu(1, &[(9, 101, INFINITE_HOPS)]), t(1));
        assert_eq!(a.next_hop(NodeId(9)), None);
        assert_eq!(a.seq_for(NodeId(9)), Some(101));
    }
}
