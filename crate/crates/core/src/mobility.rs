//! Random Waypoint motion and the range-based connectivity graph.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::within_range;
use crate::rng::RandomStream;
use crate::time::SimTime;
use crate::{NodeId, Position};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// Lower bound of the speed draw; a zero speed would stall a node forever.
pub const MIN_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityParams {
    pub width: f64,
    pub height: f64,
    pub max_speed: f64,
    pub pause: SimTime,
    pub range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeState {
    pub id: NodeId,
    pub position: Position,
    pub waypoint: Position,
    pub speed: f64,
    pub paused_until: SimTime,
}

impl NodeState {
    pub fn parked(id: NodeId, position: Position) -> Self {
        NodeState {
            id,
            position,
            waypoint: position,
            speed: 0.0,
            paused_until: SimTime::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkChange {
    Up,
    Down,
}

/// A link appearing or disappearing. `a < b` always.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkEvent {
    pub time: SimTime,
    pub a: NodeId,
    pub b: NodeId,
    pub change: LinkChange,
}

#[derive(Debug, Clone, Default)]
pub struct LinkEventLog {
    pub events: Vec<LinkEvent>,
    /// Running count of link breaks.
    pub breaks: u64,
    /// Running count of link changes, ups and downs together.
    pub changes: u64,
}

impl LinkEventLog {
    fn record(&mut self, ev: LinkEvent) {
        if ev.change == LinkChange::Down {
            self.breaks += 1;
        }
        self.changes += 1;
        self.events.push(ev);
    }
}

/// Symmetric adjacency of nodes within `range` of each other.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityGraph {
    range: f64,
    adj: Vec<Vec<NodeId>>,
    matrix: Vec<bool>,
}

impl ConnectivityGraph {
    pub fn empty(n: usize, range: f64) -> Self {
        ConnectivityGraph {
            range,
            adj: vec![Vec::new(); n],
            matrix: vec![false; n * n],
        }
    }

    /// Builds the graph by bucketing nodes into `range`-sized cells and only
    /// comparing nodes in adjacent cells.
    pub fn from_positions(positions: &[Position], range: f64) -> Self {
        let n = positions.len();
        let mut g = ConnectivityGraph::empty(n, range);
        if n == 0 {
            return g;
        }
        let cell = if range > 0.0 { range } else { 1.0 };
        let key = |p: &Position| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
        let mut cells: std::collections::HashMap<(i64, i64), Vec<usize>> =
            std::collections::HashMap::new();
        for (i, p) in positions.iter().enumerate() {
            cells.entry(key(p)).or_default().push(i);
        }
        for (i, p) in positions.iter().enumerate() {
            let (cx, cy) = key(p);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(bucket) = cells.get(&(cx + dx, cy + dy)) {
                        for &j in bucket {
                            if j > i && within_range(p, &positions[j], range) {
                                g.matrix[i * n + j] = true;
                                g.matrix[j * n + i] = true;
                            }
                        }
                    }
                }
            }
        }
        for i in 0..n {
            g.adj[i] = (0..n)
                .filter(|&j| g.matrix[i * n + j])
                .map(|j| NodeId(j as u32))
                .collect();
        }
        g
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    /// Neighbours in ascending id order.
    pub fn neighbors(&self, node: NodeId) -> Result<&[NodeId], TopologyError> {
        self.adj
            .get(node.index())
            .map(|v| v.as_slice())
            .ok_or(TopologyError::UnknownNode(node))
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adj.get(node.index()).map_or(0, |v| v.len())
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        let n = self.adj.len();
        a.index() < n && b.index() < n && self.matrix[a.index() * n + b.index()]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Hop distances from `src`; `None` for unreachable nodes.
    pub fn hop_distances(&self, src: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.adj.len()];
        if src.index() >= self.adj.len() {
            return dist;
        }
        let mut queue = std::collections::VecDeque::new();
        dist[src.index()] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()].unwrap_or(0);
            for &v in &self.adj[u.index()] {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.adj.is_empty() || self.hop_distances(NodeId(0)).iter().all(Option::is_some)
    }

    /// Edge insertions and removals turning `self` into `next`.
    pub fn diff(&self, next: &ConnectivityGraph, time: SimTime) -> Vec<LinkEvent> {
        let n = self.adj.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let before = self.matrix[i * n + j];
                let after = next.matrix[i * n + j];
                if before != after {
                    out.push(LinkEvent {
                        time,
                        a: NodeId(i as u32),
                        b: NodeId(j as u32),
                        change: if after { LinkChange::Up } else { LinkChange::Down },
                    });
                }
            }
        }
        out
    }

    pub fn apply(&mut self, ev: &LinkEvent) {
        let n = self.adj.len();
        let (a, b) = (ev.a.index(), ev.b.index());
        let up = ev.change == LinkChange::Up;
        self.matrix[a * n + b] = up;
        self.matrix[b * n + a] = up;
        for (x, y) in [(a, b), (b, a)] {
            let list = &mut self.adj[x];
            let id = NodeId(y as u32);
            match list.binary_search(&id) {
                Ok(pos) if !up => {
                    list.remove(pos);
                }
                Err(pos) if up => list.insert(pos, id),
                _ => {}
            }
        }
    }
}

/// One waypoint decision, for the optional mobility trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointDecision {
    pub time: SimTime,
    pub node: NodeId,
    pub waypoint: Position,
    pub speed: f64,
}

pub struct MobilityModel {
    params: MobilityParams,
    nodes: Vec<NodeState>,
    graph: ConnectivityGraph,
    last_advance: SimTime,
    log: LinkEventLog,
    rng: RandomStream,
    decisions: Option<Vec<WaypointDecision>>,
    static_network: bool,
}

impl MobilityModel {
    /// Places `n` nodes uniformly over the field. Every node first pauses for
    /// the configured pause time, then starts its waypoint cycle.
    pub fn random(params: MobilityParams, n: usize, mut rng: RandomStream) -> Self {
        let nodes = (0..n)
            .map(|i| {
                let p = Position::new(
                    rng.uniform(0.0, params.width),
                    rng.uniform(0.0, params.height),
                );
                NodeState {
                    id: NodeId(i as u32),
                    position: p,
                    waypoint: p,
                    speed: 0.0,
                    paused_until: params.pause,
                }
            })
            .collect();
        Self::with_states(params, nodes, rng)
    }

    pub fn with_states(params: MobilityParams, nodes: Vec<NodeState>, rng: RandomStream) -> Self {
        let positions: Vec<Position> = nodes.iter().map(|s| s.position).collect();
        let graph = ConnectivityGraph::from_positions(&positions, params.range);
        MobilityModel {
            params,
            nodes,
            graph,
            last_advance: SimTime::ZERO,
            log: LinkEventLog::default(),
            rng,
            decisions: None,
            static_network: false,
        }
    }

    /// Keeps a record of every waypoint decision from now on.
    pub fn record_decisions(&mut self) {
        self.decisions.get_or_insert_with(Vec::new);
    }

    pub fn decisions(&self) -> &[WaypointDecision] {
        self.decisions.as_deref().unwrap_or(&[])
    }

    pub fn params(&self) -> &MobilityParams {
        &self.params
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn graph(&self) -> &ConnectivityGraph {
        &self.graph
    }

    pub fn log(&self) -> &LinkEventLog {
        &self.log
    }

    pub fn position(&self, node: NodeId) -> Result<Position, TopologyError> {
        self.nodes
            .get(node.index())
            .map(|s| s.position)
            .ok_or(TopologyError::UnknownNode(node))
    }

    pub fn neighbors(&self, node: NodeId) -> Result<&[NodeId], TopologyError> {
        self.graph.neighbors(node)
    }

    fn choose_waypoint(&mut self, idx: usize, at_secs: f64) {
        let p = &self.params;
        let (w, h, vmax) = (p.width, p.height, p.max_speed);
        let waypoint = Position::new(self.rng.uniform(0.0, w), self.rng.uniform(0.0, h));
        let speed = if vmax > MIN_SPEED {
            self.rng.uniform_left_open(MIN_SPEED, vmax)
        } else {
            vmax.max(0.0)
        };
        let node = &mut self.nodes[idx];
        node.waypoint = waypoint;
        node.speed = speed;
        node.paused_until = SimTime::from_secs_f64(at_secs);
        if let Some(log) = self.decisions.as_mut() {
            log.push(WaypointDecision {
                time: SimTime::from_secs_f64(at_secs),
                node: node.id,
                waypoint,
                speed,
            });
        }
    }

    fn advance_node(&mut self, idx: usize, from: f64, to: f64) -> bool {
        let pause = self.params.pause.as_secs_f64();
        let mut t = from;
        let mut moved = false;
        // Bounded: each pass either finishes or consumes a waypoint leg.
        for _ in 0..1_000_000 {
            let paused_until = self.nodes[idx].paused_until.as_secs_f64();
            if self.nodes[idx].speed <= 0.0 || paused_until > t {
                if paused_until >= to || self.nodes[idx].paused_until == SimTime::MAX {
                    break;
                }
                t = t.max(paused_until);
                self.choose_waypoint(idx, t);
                if self.nodes[idx].speed <= 0.0 {
                    break;
                }
            }
            let node = &mut self.nodes[idx];
            let dist = node.position.distance(&node.waypoint);
            let needed = dist / node.speed;
            if t + needed <= to {
                node.position = node.waypoint;
                t += needed;
                moved |= dist > 0.0;
                node.speed = 0.0;
                node.paused_until = SimTime::from_secs_f64(t + pause);
                if pause > 0.0 {
                    continue;
                }
                // Zero pause: pick the next leg immediately.
                self.choose_waypoint(idx, t);
            } else {
                let (p, _) = node.position.step_toward(&node.waypoint, node.speed * (to - t));
                node.position = p.clamp_to(self.params.width, self.params.height);
                moved = true;
                break;
            }
        }
        moved
    }

    /// Moves every node to its position at `to`, recomputes the graph and
    /// returns the resulting link events (all stamped `to`).
    pub fn advance_positions(&mut self, to: SimTime) -> Vec<LinkEvent> {
        if to <= self.last_advance {
            return Vec::new();
        }
        let from = self.last_advance.as_secs_f64();
        let to_s = to.as_secs_f64();
        self.last_advance = to;
        if self.static_network {
            return Vec::new();
        }
        let mut any_moved = false;
        let mut any_pending = false;
        for i in 0..self.nodes.len() {
            any_moved |= self.advance_node(i, from, to_s);
            any_pending |= self.nodes[i].paused_until != SimTime::MAX;
        }
        if !any_pending {
            self.static_network = true;
        }
        if !any_moved {
            return Vec::new();
        }
        let positions: Vec<Position> = self.nodes.iter().map(|s| s.position).collect();
        let next = ConnectivityGraph::from_positions(&positions, self.params.range);
        let events = self.graph.diff(&next, to);
        self.graph = next;
        for ev in &events {
            self.log.record(*ev);
        }
        events
    }
}

/// `time node x y speed` lines, one per waypoint decision.
pub fn format_mobility_trace(decisions: &[WaypointDecision]) -> String {
    let mut out = String::new();
    for d in decisions {
        let _ = writeln!(
            out,
            "{} {} {:.3} {:.3} {:.3}",
            d.time, d.node, d.waypoint.x, d.waypoint.y, d.speed
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamLabel;

    fn params(pause: f64) -> MobilityParams {
        MobilityParams {
            width: 1000.0,
            height: 1000.0,
            max_speed: 30.0,
            pause: SimTime::from_secs_f64(pause),
            range: 250.0,
        }
    }

    fn moving(id: u32, from: (f64, f64), to: (f64, f64), speed: f64) -> NodeState {
        NodeState {
            id: NodeId(id),
            position: Position::new(from.0, from.1),
            waypoint: Position::new(to.0, to.1),
            speed,
            paused_until: SimTime::ZERO,
        }
    }

    #[test]
    fn linear_kinematics() {
        let states = vec![moving(0, (0.0, 0.0), (100.0, 0.0), 10.0)];
        let mut m = MobilityModel::with_states(
            params(1000.0),
            states,
            RandomStream::new(1, StreamLabel::Mobility),
        );
        m.advance_positions(SimTime::from_whole_secs(5));
        assert_eq!(m.position(NodeId(0)).unwrap(), Position::new(50.0, 0.0));
    }

    #[test]
    fn full_pause_keeps_network_static() {
        let mut m = MobilityModel::random(params(900.0), 50, RandomStream::new(3, StreamLabel::Mobility));
        let before: Vec<_> = m.nodes().iter().map(|s| s.position).collect();
        let mut events = 0;
        for k in 1..=9000u64 {
            events += m.advance_positions(SimTime::from_millis(k * 100)).len();
        }
        assert_eq!(events, 0);
        let after: Vec<_> = m.nodes().iter().map(|s| s.position).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn drifting_pair_breaks_once_at_the_quantized_crossing() {
        // Node 1 leaves node 0 at 10 m/s from 200 m apart. Distance reaches
        // 250 m at t = 5 s exactly, so the link is still up at 5.0 and the
        // first tick that observes it down is 5.1.
        let states = vec![
            NodeState::parked(NodeId(0), Position::new(100.0, 500.0)),
            moving(1, (300.0, 500.0), (900.0, 500.0), 10.0),
        ];
        let mut m = MobilityModel::with_states(
            params(1000.0),
            states,
            RandomStream::new(1, StreamLabel::Mobility),
        );
        let crossing = (250.0_f64 - 200.0) / 10.0;
        let mut downs = Vec::new();
        for k in 1..=200u64 {
            for ev in m.advance_positions(SimTime::from_millis(k * 100)) {
                downs.push(ev);
            }
        }
        assert_eq!(downs.len(), 1);
        assert_eq!(downs[0].change, LinkChange::Down);
        let expected_tick = ((crossing / 0.1).floor() + 1.0) * 0.1;
        assert_eq!(downs[0].time, SimTime::from_secs_f64(expected_tick));
    }

    #[test]
    fn collinear_neighbors() {
        let pos = [
            Position::new(0.0, 0.0),
            Position::new(200.0, 0.0),
            Position::new(400.0, 0.0),
        ];
        let g = ConnectivityGraph::from_positions(&pos, 250.0);
        assert_eq!(g.neighbors(NodeId(1)).unwrap(), &[NodeId(0), NodeId(2)]);
        assert_eq!(g.neighbors(NodeId(0)).unwrap(), &[NodeId(1)]);
        assert_eq!(g.neighbors(NodeId(2)).unwrap(), &[NodeId(1)]);
        assert_eq!(g.neighbors(NodeId(3)), Err(TopologyError::UnknownNode(NodeId(3))));
    }

    #[test]
    fn isolated_and_full_mesh() {
        let g = ConnectivityGraph::from_positions(&[Position::new(10.0, 10.0)], 250.0);
        assert!(g.neighbors(NodeId(0)).unwrap().is_empty());

        let square = [
            Position::new(0.0, 0.0),
            Position::new(100.0, 0.0),
            Position::new(0.0, 100.0),
            Position::new(100.0, 100.0),
            Position::new(50.0, 50.0),
        ];
        let g = ConnectivityGraph::from_positions(&square, 250.0);
        for i in 0..5 {
            assert_eq!(g.degree(NodeId(i)), 4);
        }
    }

    #[test]
    fn speeds_are_never_zero() {
        let mut m = MobilityModel::random(params(0.0), 20, RandomStream::new(9, StreamLabel::Mobility));
        m.record_decisions();
        m.advance_positions(SimTime::from_whole_secs(300));
        assert!(!m.decisions().is_empty());
        for d in m.decisions() {
            assert!(d.speed > MIN_SPEED && d.speed <= 30.0);
        }
        let trace = format_mobility_trace(m.decisions());
        assert_eq!(trace.lines().count(), m.decisions().len());
        assert_eq!(trace.lines().next().unwrap().split(' ').count(), 5);
    }
}
