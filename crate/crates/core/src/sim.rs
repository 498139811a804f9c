//! The simulated network: one scheduler, one channel, one agent per node.

use std::rc::Rc;

use crate::channel::Channel;
use crate::kernel::{QueueStats, Scheduler};
use crate::metrics::{
    check_constraints, DelayInputs, DropCause, MetricsReport, TopologySummary,
};
use crate::mobility::{
    ConnectivityGraph, LinkChange, LinkEvent, MobilityModel, MobilityParams, NodeState,
    WaypointDecision,
};
use crate::protocol::fsr::INTRA_SCOPE_TTL;
use crate::protocol::{
    Agent, AgentContext, AgentTimer, ControlCategory, ControlPacket,
    ProtocolTimers, RoutingAgent,
};
use crate::rng::{RandomStream, StreamLabel};
use crate::scenario::{ScenarioConfig, ScenarioError};
use crate::time::SimTime;
use crate::trace::ControlTraceRecord;
use crate::traffic::{random_flows, BufferedRequest, DataPacket, FlowSpec, DATA_HOP_LIMIT};
use crate::NodeId;

/// Connectivity is recomputed this often.
pub const MOBILITY_TICK: SimTime = SimTime::from_millis(100);
/// Route-update ratios and mean degree are sampled this often.
pub const SAMPLE_INTERVAL: SimTime = SimTime::from_whole_secs(5);

#[derive(Debug, Clone)]
pub enum SimEvent {
    ControlArrival {
        to: NodeId,
        from: NodeId,
        packet: Rc<ControlPacket>,
        category: ControlCategory,
        sent_at: SimTime,
        /// Transmissions this copy has gone through since origination.
        travelled: u8,
    },
    DataArrival {
        to: NodeId,
        packet: DataPacket,
    },
    TimerExpiry {
        node: NodeId,
        timer: AgentTimer,
    },
    MobilityTick,
    FlowPacketDue {
        flow: usize,
    },
    BufferDeadline {
        node: NodeId,
        packet: u64,
        deadline: SimTime,
    },
    /// Retry buffered packets after a route repair during forwarding.
    FlushBuffer {
        node: NodeId,
    },
    Sample,
    SimulationEnd,
}

/// Emission-time hop distances of the latest TTL-2 update of one origin,
/// valid while no link has changed since.
struct ScopeProbe {
    seq: u64,
    link_changes: u64,
    distances: Rc<Vec<Option<u32>>>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub control_trace: Vec<ControlTraceRecord>,
    pub mobility_trace: Vec<WaypointDecision>,
    pub queue: QueueStats,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    timers: ProtocolTimers,
    sched: Scheduler<SimEvent>,
    mobility: MobilityModel,
    moving: bool,
    channel: Channel,
    jitter_rng: RandomStream,
    agents: Vec<Agent>,
    flows: Vec<FlowSpec>,
    buffers: Vec<Vec<BufferedRequest>>,
    buffer_timeout: SimTime,
    report: MetricsReport,
    trace: Option<Vec<ControlTraceRecord>>,
    next_packet_id: u64,
    data_in_flight: u64,
    scope: Vec<Option<ScopeProbe>>,
    /// Hops travelled by the control copy being processed, if any.
    relay_depth: u8,
    degree_sum: f64,
    degree_samples: u64,
    delivered_hops: u64,
    trigger_delay_us: u64,
    trigger_receipts: u64,
    started: bool,
    finished: bool,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, ScenarioError> {
        cfg.validate()?;
        let n = cfg.nodes;
        let timers = cfg.timers();
        if !timers.all_positive() {
            return Err(ScenarioError::invalid("intervals: must be positive"));
        }
        let lifetime = cfg.lifetime();
        let params = MobilityParams {
            width: cfg.width,
            height: cfg.height,
            max_speed: cfg.max_speed,
            pause: SimTime::from_secs_f64(cfg.pause),
            range: cfg.range,
        };
        let mobility_rng = RandomStream::new(cfg.seed, StreamLabel::Mobility);
        let mobility = match &cfg.positions {
            Some(ps) => {
                let nodes = ps
                    .iter()
                    .enumerate()
                    .map(|(i, p)| NodeState::parked(NodeId(i as u32), *p))
                    .collect();
                MobilityModel::with_states(params, nodes, mobility_rng)
            }
            None => MobilityModel::random(params, n, mobility_rng),
        };
        let mut traffic_rng = RandomStream::new(cfg.seed, StreamLabel::Traffic);
        let flows = if cfg.flows.is_empty() {
            random_flows(&cfg.flow_defaults, n, lifetime, &mut traffic_rng)
        } else {
            cfg.flows.clone()
        };
        let agents = (0..n)
            .map(|i| Agent::new(cfg.protocol, NodeId(i as u32), n, &timers))
            .collect();
        let report = MetricsReport {
            protocol: Some(cfg.protocol),
            nodes: n,
            seed: cfg.seed,
            duration: lifetime.as_secs_f64(),
            buffer_timeout: cfg.buffer_timeout,
            ..MetricsReport::default()
        };
        Ok(Simulation {
            timers,
            sched: Scheduler::new(),
            moving: !cfg.is_static(),
            mobility,
            channel: Channel::new(cfg.bandwidth, SimTime::from_secs_f64(cfg.jitter)),
            jitter_rng: RandomStream::new(cfg.seed, StreamLabel::Jitter),
            agents,
            flows,
            buffers: vec![Vec::new(); n],
            buffer_timeout: SimTime::from_secs_f64(cfg.buffer_timeout),
            report,
            trace: None,
            next_packet_id: 0,
            data_in_flight: 0,
            scope: (0..n).map(|_| None).collect(),
            relay_depth: 0,
            degree_sum: 0.0,
            degree_samples: 0,
            delivered_hops: 0,
            trigger_delay_us: 0,
            trigger_receipts: 0,
            started: false,
            finished: false,
            cfg: cfg.clone(),
        })
    }

    /// Keeps a per-transmission control trace and the waypoint decisions.
    pub fn enable_traces(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
        self.mobility.record_decisions();
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn flows(&self) -> &[FlowSpec] {
        &self.flows
    }

    pub fn graph(&self) -> &ConnectivityGraph {
        self.mobility.graph()
    }

    pub fn mobility(&self) -> &MobilityModel {
        &self.mobility
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent_mut(&mut self, node: NodeId) -> &mut Agent {
        &mut self.agents[node.index()]
    }

    pub fn queue_stats(&self) -> QueueStats {
        self.sched.stats()
    }

    pub fn report(&self) -> &MetricsReport {
        &self.report
    }

    fn start(&mut self) {
        self.started = true;
        let lifetime = self.cfg.lifetime();
        // Links present at start-up are sensed immediately.
        let mut initial = Vec::new();
        for a in 0..self.agents.len() {
            let a = NodeId(a as u32);
            for &b in self.mobility.graph().neighbors(a).unwrap_or(&[]) {
                if a < b {
                    initial.push(LinkEvent {
                        time: SimTime::ZERO,
                        a,
                        b,
                        change: LinkChange::Up,
                    });
                }
            }
        }
        for ev in &initial {
            self.link_event(ev);
        }
        for i in 0..self.agents.len() {
            let node = NodeId(i as u32);
            let mut ctx = AgentContext::new(SimTime::ZERO);
            self.agents[i].start(&mut ctx);
            self.apply(node, ctx);
        }
        for i in 0..self.flows.len() {
            let start = self.flows[i].start;
            if start < lifetime {
                self.schedule(start, SimEvent::FlowPacketDue { flow: i });
            }
        }
        if self.moving {
            self.schedule(MOBILITY_TICK, SimEvent::MobilityTick);
        }
        self.schedule(SAMPLE_INTERVAL, SimEvent::Sample);
        self.schedule(lifetime, SimEvent::SimulationEnd);
    }

    fn schedule(&mut self, at: SimTime, ev: SimEvent) {
        self.sched
            .schedule(at, ev)
            .expect("simulation events are never scheduled in the past");
    }

    /// Runs up to `until` (capped at the scenario lifetime).
    pub fn run_until(&mut self, until: SimTime) {
        if !self.started {
            self.start();
        }
        let until = until.min(self.cfg.lifetime());
        while let Some((at, ev)) = self.sched.pop_until(until) {
            self.dispatch(at, ev);
        }
    }

    /// Runs to the end and returns the final report.
    pub fn run(mut self) -> RunOutput {
        self.run_until(self.cfg.lifetime());
        self.finish()
    }

    fn dispatch(&mut self, now: SimTime, ev: SimEvent) {
        match ev {
            SimEvent::ControlArrival {
                to,
                from,
                packet,
                category,
                sent_at,
                travelled,
            } => self.control_arrival(now, to, from, &packet, category, sent_at, travelled),
            SimEvent::DataArrival { to, packet } => {
                self.data_in_flight -= 1;
                if to == packet.dst {
                    self.report.data_received += 1;
                    self.report.bytes_received += packet.size_bits / 8;
                    self.report.sum_e2e_delay_us += (now - packet.created_at).as_micros();
                    self.delivered_hops += packet.hops as u64;
                } else {
                    self.forward_data(to, packet, now);
                }
            }
            SimEvent::TimerExpiry { node, timer } => {
                let mut ctx = AgentContext::new(now);
                self.agents[node.index()].on_timer(timer, &mut ctx);
                self.apply(node, ctx);
            }
            SimEvent::MobilityTick => {
                let events = self.mobility.advance_positions(now);
                for ev in &events {
                    self.link_event(ev);
                }
                let next = now + MOBILITY_TICK;
                if next <= self.cfg.lifetime() {
                    self.schedule(next, SimEvent::MobilityTick);
                }
            }
            SimEvent::FlowPacketDue { flow } => self.flow_packet(flow, now),
            SimEvent::BufferDeadline {
                node,
                packet,
                deadline,
            } => {
                let buf = &mut self.buffers[node.index()];
                if let Some(pos) = buf
                    .iter()
                    .position(|b| b.packet.id == packet && b.deadline == deadline)
                {
                    buf.remove(pos);
                    self.drop_data(DropCause::NoRouteTimeout);
                }
            }
            SimEvent::Sample => {
                self.sample();
                let next = now + SAMPLE_INTERVAL;
                if next <= self.cfg.lifetime() {
                    self.schedule(next, SimEvent::Sample);
                }
            }
            SimEvent::FlushBuffer { node } => {
                if !self.buffers[node.index()].is_empty() {
                    self.flush_buffer(node, now);
                }
            }
            SimEvent::SimulationEnd => self.finished = true,
        }
    }

    fn link_event(&mut self, ev: &LinkEvent) {
        let up = ev.change == LinkChange::Up;
        for (node, nb) in [(ev.a, ev.b), (ev.b, ev.a)] {
            let mut ctx = AgentContext::new(ev.time);
            self.agents[node.index()].on_link_change(nb, up, &mut ctx);
            self.apply(node, ctx);
        }
    }

    /// Carries out what an agent asked for.
    fn apply(&mut self, node: NodeId, ctx: AgentContext) {
        let now = ctx.now;
        if self.apply_actions(node, ctx) && !self.buffers[node.index()].is_empty() {
            self.flush_buffer(node, now);
        }
    }

    /// Sends emissions and arms timers; returns whether routes changed.
    fn apply_actions(&mut self, node: NodeId, ctx: AgentContext) -> bool {
        let now = ctx.now;
        for e in ctx.emissions {
            let travelled = if e.forwarded { self.relay_depth.saturating_add(1) } else { 1 };
            self.transmit_control(node, e.packet, e.category, e.forwarded, now, travelled);
        }
        for (delay, timer) in ctx.timers {
            self.schedule(now + delay, SimEvent::TimerExpiry { node, timer });
        }
        ctx.routes_changed
    }

    fn transmit_control(
        &mut self,
        node: NodeId,
        packet: Rc<ControlPacket>,
        category: ControlCategory,
        forwarded: bool,
        now: SimTime,
        travelled: u8,
    ) {
        let bits = packet.size_bits();
        let deliveries = match self.channel.broadcast_delivery(
            self.mobility.graph(),
            node,
            bits,
            now,
            &mut self.jitter_rng,
        ) {
            Ok(d) => d,
            Err(_) => {
                self.report.control.dropped += 1;
                return;
            }
        };
        let c = &mut self.report.control;
        c.transmissions += 1;
        c.bits += bits;
        if forwarded {
            c.forwardings += 1;
        } else {
            c.originations += 1;
        }
        *c.by_kind.entry(packet.kind_name().to_string()).or_default() += 1;
        let cat = c.by_category.entry(category).or_default();
        cat.transmissions += 1;
        cat.bits += bits;
        if !forwarded {
            cat.originations += 1;
        }
        if let Some(trace) = self.trace.as_mut() {
            trace.push(ControlTraceRecord {
                time: now,
                node,
                protocol: self.cfg.protocol,
                kind: packet.kind_name(),
                size_bits: bits,
                ttl: packet.ttl(),
                category,
                forwarded,
            });
        }
        if let ControlPacket::Lsu(lsu) = packet.as_ref() {
            if lsu.ttl <= INTRA_SCOPE_TTL {
                self.report.control.intra_scope += 1;
            }
            if !forwarded && lsu.ttl == INTRA_SCOPE_TTL {
                self.scope[node.index()] = Some(ScopeProbe {
                    seq: lsu.seq,
                    link_changes: self.mobility.log().changes,
                    distances: Rc::new(self.mobility.graph().hop_distances(node)),
                });
            }
        }
        for (to, at) in deliveries {
            self.schedule(
                at,
                SimEvent::ControlArrival {
                    to,
                    from: node,
                    packet: Rc::clone(&packet),
                    category,
                    sent_at: now,
                    travelled,
                },
            );
        }
    }

    fn control_arrival(
        &mut self,
        now: SimTime,
        to: NodeId,
        from: NodeId,
        packet: &ControlPacket,
        category: ControlCategory,
        sent_at: SimTime,
        travelled: u8,
    ) {
        if let ControlPacket::Lsu(lsu) = packet {
            if let Some(probe) = self.scope[lsu.origin.index()].as_ref() {
                if probe.seq == lsu.seq {
                    self.report.monitors.scope_checks += 1;
                    let unchanged = probe.link_changes == self.mobility.log().changes;
                    let too_far = unchanged && probe.distances[to.index()].is_none_or(|d| d > 2);
                    if travelled > INTRA_SCOPE_TTL || too_far {
                        self.report.monitors.scope_violations += 1;
                    }
                }
            }
        }
        if category == ControlCategory::Triggered {
            self.trigger_delay_us += (now - sent_at).as_micros();
            self.trigger_receipts += 1;
        }
        let mut ctx = AgentContext::new(now);
        self.agents[to.index()].on_control(from, packet, &mut ctx);
        self.relay_depth = travelled;
        self.apply(to, ctx);
        self.relay_depth = 0;
    }

    fn flow_packet(&mut self, flow: usize, now: SimTime) {
        let f = self.flows[flow];
        let packet = DataPacket {
            id: self.next_packet_id,
            flow,
            src: f.src,
            dst: f.dst,
            size_bits: f.packet_size,
            created_at: now,
            hops: 0,
            waited: false,
        };
        self.next_packet_id += 1;
        self.report.data_sent += 1;
        let next = now + f.interval();
        if next < f.stop {
            self.schedule(next, SimEvent::FlowPacketDue { flow });
        }
        self.forward_data(f.src, packet, now);
    }

    /// Next hop from `node` if the agent has one and it is a current neighbour.
    /// Next hop toward `dst` if it is in range. An out-of-range next hop is
    /// reported to the agent as a failed transmission and the lookup retried.
    fn usable_next_hop(&mut self, node: NodeId, dst: NodeId) -> Option<NodeId> {
        for _ in 0..self.agents.len() {
            let next = self.agents[node.index()].next_hop(dst)?;
            if next == node {
                return None;
            }
            if self.mobility.graph().has_edge(node, next) {
                return Some(next);
            }
            let mut ctx = AgentContext::new(self.now());
            if !self.agents[node.index()].on_transmit_failure(next, &mut ctx) {
                return None;
            }
            if self.apply_actions(node, ctx) && !self.buffers[node.index()].is_empty() {
                let now = self.now();
                self.schedule(now, SimEvent::FlushBuffer { node });
            }
        }
        None
    }

    fn forward_data(&mut self, node: NodeId, mut packet: DataPacket, now: SimTime) {
        if packet.hops >= DATA_HOP_LIMIT {
            self.drop_data(DropCause::TtlExpired);
            return;
        }
        let Some(next) = self.usable_next_hop(node, packet.dst) else {
            if !packet.waited {
                packet.waited = true;
                self.report.no_route_requests += 1;
            }
            let req = BufferedRequest::new(packet, now, self.buffer_timeout);
            self.schedule(
                req.deadline,
                SimEvent::BufferDeadline {
                    node,
                    packet: packet.id,
                    deadline: req.deadline,
                },
            );
            self.buffers[node.index()].push(req);
            return;
        };
        let m = &mut self.report.monitors;
        m.hop_checks += 1;
        let (a, b) = (
            self.mobility.nodes()[node.index()].position,
            self.mobility.nodes()[next.index()].position,
        );
        if a.distance(&b) > self.cfg.range {
            m.hop_violations += 1;
        }
        match self
            .channel
            .unicast_delivery(packet.size_bits, now, &mut self.jitter_rng)
        {
            Ok(at) => {
                packet.hops += 1;
                self.agents[node.index()].on_data_forwarded(packet.dst, now);
                self.data_in_flight += 1;
                self.schedule(at, SimEvent::DataArrival { to: next, packet });
            }
            Err(_) => self.drop_data(DropCause::ChannelSaturated),
        }
    }

    fn flush_buffer(&mut self, node: NodeId, now: SimTime) {
        let waiting = std::mem::take(&mut self.buffers[node.index()]);
        let mut keep = Vec::new();
        for req in waiting {
            if self.usable_next_hop(node, req.packet.dst).is_some() {
                self.forward_data(node, req.packet, now);
            } else {
                keep.push(req);
            }
        }
        // Forwarding never re-buffers here, so the slot is still empty.
        self.buffers[node.index()] = keep;
    }

    fn drop_data(&mut self, cause: DropCause) {
        *self.report.drops.entry(cause).or_default() += 1;
    }

    fn sample(&mut self) {
        let m = &mut self.report.monitors;
        for a in &mut self.agents {
            let s = a.take_update_sample();
            let r = s.ratio();
            m.update_samples += 1;
            if !(0.0..=1.0).contains(&r) {
                m.update_ratio_out_of_range += 1;
            }
            m.update_ratio_max = m.update_ratio_max.max(r);
        }
        let g = self.mobility.graph();
        let n = g.len().max(1);
        let total: usize = (0..g.len()).map(|i| g.degree(NodeId(i as u32))).sum();
        self.degree_sum += total as f64 / n as f64;
        self.degree_samples += 1;
    }

    fn topology_summary(&self) -> TopologySummary {
        let g = self.mobility.graph();
        let n = g.len();
        let degrees: Vec<u32> = (0..n).map(|i| g.degree(NodeId(i as u32)) as u32).collect();
        let mut max_ball = 0u32;
        let mut seen = vec![usize::MAX; n];
        for i in 0..n {
            let mut ball = 0u32;
            let mut mark = |v: usize, ball: &mut u32| {
                if seen[v] != i {
                    seen[v] = i;
                    *ball += 1;
                }
            };
            mark(i, &mut ball);
            for &u in g.neighbors(NodeId(i as u32)).unwrap_or(&[]) {
                mark(u.index(), &mut ball);
                for &w in g.neighbors(u).unwrap_or(&[]) {
                    mark(w.index(), &mut ball);
                }
            }
            max_ball = max_ball.max(ball);
        }
        let mpr_nodes = self
            .agents
            .iter()
            .filter_map(Agent::as_olsr)
            .filter(|a| !a.mpr_selectors().is_empty())
            .count() as u32;
        TopologySummary {
            degrees,
            max_two_hop_ball: max_ball,
            connected: g.is_connected(),
            mpr_nodes,
        }
    }

    fn delay_inputs(&self) -> DelayInputs {
        let t = &self.timers;
        let lsm = if self.cfg.protocol.is_olsr() { t.hello } else { t.lsm_mac };
        let mean_degree = if self.degree_samples == 0 {
            let g = self.mobility.graph();
            2.0 * g.edge_count() as f64 / g.len().max(1) as f64
        } else {
            self.degree_sum / self.degree_samples as f64
        };
        let mean_route_hops = if self.report.data_received == 0 {
            1.0
        } else {
            self.delivered_hops as f64 / self.report.data_received as f64
        };
        let trigger_hop_delay = if self.trigger_receipts == 0 {
            0.0
        } else {
            self.trigger_delay_us as f64 / self.trigger_receipts as f64 / 1e6
        };
        DelayInputs {
            lsm_interval: lsm.as_secs_f64(),
            periodic_interval: t.longest_for(self.cfg.protocol).as_secs_f64(),
            mean_degree,
            mean_route_hops,
            trigger_hop_delay,
        }
    }

    /// Resolves leftover packets, drains the queue and fills in the report.
    pub fn finish(mut self) -> RunOutput {
        if !self.started {
            self.start();
        }
        let leftover: u64 = self.buffers.iter().map(|b| b.len() as u64).sum::<u64>()
            + self.data_in_flight;
        for _ in 0..leftover {
            self.drop_data(DropCause::EndOfRun);
        }
        self.sched.drain();
        let log = self.mobility.log();
        self.report.link_changes = log.changes;
        self.report.link_breaks = log.breaks;
        for a in self.agents.iter().filter_map(Agent::as_olsr) {
            let m = &mut self.report.monitors;
            m.mpr_checks += a.coverage_checks();
            m.mpr_violations += a.coverage_violations();
            m.mpr_changes += a.mpr_changes();
        }
        self.report.delay_inputs = self.delay_inputs();
        self.report.topology = self.topology_summary();
        self.report.constraint_verdicts = check_constraints(&self.report, &self.cfg.thresholds);
        RunOutput {
            report: self.report,
            control_trace: self.trace.unwrap_or_default(),
            mobility_trace: self.mobility.decisions().to_vec(),
            queue: self.sched.stats(),
        }
    }
}

/// Builds and runs `cfg` to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsReport, ScenarioError> {
    Ok(Simulation::new(cfg)?.run().report)
}

/// Like [`run_scenario`] but keeps the control and mobility traces.
pub fn run_scenario_traced(cfg: &ScenarioConfig) -> Result<RunOutput, ScenarioError> {
    let mut sim = Simulation::new(cfg)?;
    sim.enable_traces();
    Ok(sim.run())
}

/// Hop counts each agent currently holds, for every destination.
pub fn agent_hop_counts(agent: &mut Agent, n: usize) -> Vec<Option<u32>> {
    let table = agent.routing_table();
    let mut out = vec![None; n];
    for e in table {
        if e.is_usable() && e.destination.index() < n {
            out[e.destination.index()] = Some(e.hops);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ProtocolKind;
    use crate::Position;

    fn pair(protocol: ProtocolKind, duration: f64) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::fixed(
            protocol,
            vec![Position::new(0.0, 0.0), Position::new(100.0, 0.0)],
            duration,
        );
        cfg.jitter = 0.0;
        cfg
    }

    #[test]
    fn idle_node_runs_sixty_dsdv_periods() {
        let mut cfg = ScenarioConfig::fixed(ProtocolKind::Dsdv, vec![Position::new(0.0, 0.0)], 900.0);
        cfg.flow_defaults.count = 0;
        let out = Simulation::new(&cfg).unwrap().run();
        assert_eq!(out.report.control.transmissions, 60);
        let q = out.queue;
        assert_eq!(q.scheduled, q.dispatched + q.cancelled);
    }

    #[test]
    fn lossless_pair_delivers_everything() {
        let mut cfg = pair(ProtocolKind::Fsr, 20.0);
        cfg.flows = vec![FlowSpec {
            src: NodeId(0),
            dst: NodeId(1),
            packet_size: 4096,
            rate: 4.0,
            start: SimTime::from_whole_secs(5),
            stop: SimTime::from_whole_secs(15),
        }];
        let r = run_scenario(&cfg).unwrap();
        assert_eq!((r.data_sent, r.data_received), (40, 40));
        assert!(r.accounting_balances());
    }

    #[test]
    fn waiting_for_a_route_counts_in_the_delay() {
        // DSDV learns the neighbour only from its first periodic update at 15 s.
        let mut cfg = pair(ProtocolKind::Dsdv, 20.0);
        cfg.flows = vec![FlowSpec {
            src: NodeId(0),
            dst: NodeId(1),
            packet_size: 1000,
            rate: 1.0,
            start: SimTime::from_whole_secs(14),
            stop: SimTime::from_millis(14_500),
        }];
        let r = run_scenario(&cfg).unwrap();
        assert_eq!(r.data_received, 1);
        assert_eq!(r.no_route_requests, 1);
        // Buffered 14 s -> 15 s plus the NPDU and data transmission times.
        let npdu_bits = ControlPacket::Npdu(crate::protocol::NpduPacket {
            origin: NodeId(1),
            kind: crate::protocol::NpduKind::Incremental,
            entries: vec![(NodeId(1), 2, 0)],
        })
        .size_bits();
        let npdu_us = (npdu_bits * 1_000_000).div_ceil(2_000_000);
        assert_eq!(r.sum_e2e_delay_us, 1_000_000 + npdu_us + 500);
    }

    #[test]
    fn unreachable_destination_times_out() {
        let mut cfg = ScenarioConfig::fixed(
            ProtocolKind::Olsr,
            vec![Position::new(0.0, 0.0), Position::new(900.0, 0.0)],
            60.0,
        );
        cfg.flows = vec![FlowSpec {
            src: NodeId(0),
            dst: NodeId(1),
            packet_size: 1000,
            rate: 1.0,
            start: SimTime::from_whole_secs(1),
            stop: SimTime::from_millis(1_500),
        }];
        let r = run_scenario(&cfg).unwrap();
        assert_eq!(r.drop_count(DropCause::NoRouteTimeout), 1);
        assert_eq!(r.no_route_requests, 1);
        assert_eq!(r.data_received, 0);
    }
}
