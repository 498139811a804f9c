//! Constant-bit-rate flows and the data packets they produce.

use serde::{Deserialize, Serialize};

use crate::rng::RandomStream;
use crate::time::SimTime;
use crate::NodeId;

/// Hop budget carried by every data packet.
pub const DATA_HOP_LIMIT: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub src: NodeId,
    pub dst: NodeId,
    /// On-air size of one packet, in bits.
    pub packet_size: u64,
    /// Packets per second.
    pub rate: f64,
    pub start: SimTime,
    pub stop: SimTime,
}

impl FlowSpec {
    pub fn validate(&self, lifetime: SimTime) -> Result<(), String> {
        if self.src == self.dst {
            return Err(format!("flow {}->{}: source equals destination", self.src, self.dst));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(format!("flow {}->{}: rate must be positive", self.src, self.dst));
        }
        if self.packet_size == 0 {
            return Err(format!("flow {}->{}: packet size must be positive", self.src, self.dst));
        }
        if self.start >= self.stop || self.stop > lifetime {
            return Err(format!(
                "flow {}->{}: need start < stop <= duration",
                self.src, self.dst
            ));
        }
        Ok(())
    }

    pub fn interval(&self) -> SimTime {
        SimTime::from_secs_f64(1.0 / self.rate).max(SimTime::from_micros(1))
    }

    /// Emission times of every packet of this flow.
    pub fn send_times(&self) -> impl Iterator<Item = SimTime> + '_ {
        let step = self.interval().as_micros();
        let start = self.start.as_micros();
        (0u64..)
            .map(move |k| SimTime::from_micros(start + k * step))
            .take_while(move |t| *t < self.stop)
    }
}

/// Parameters for the default random flow set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowDefaults {
    pub count: usize,
    pub packet_bytes: u64,
    pub rate: f64,
    /// Flow starts are uniform in `[0, start_window)`.
    pub start_window: SimTime,
}

impl Default for FlowDefaults {
    fn default() -> Self {
        FlowDefaults {
            count: 10,
            packet_bytes: 512,
            rate: 4.0,
            start_window: SimTime::from_whole_secs(10),
        }
    }
}

/// Draws `defaults.count` flows with distinct endpoints from the traffic
/// substream. All flows stop at `lifetime`.
pub fn random_flows(
    defaults: &FlowDefaults,
    nodes: usize,
    lifetime: SimTime,
    rng: &mut RandomStream,
) -> Vec<FlowSpec> {
    if nodes < 2 {
        return Vec::new();
    }
    let window = defaults.start_window.min(lifetime).as_secs_f64();
    (0..defaults.count)
        .map(|_| {
            let src = rng.index(nodes);
            let mut dst = rng.index(nodes - 1);
            if dst >= src {
                dst += 1;
            }
            let start = SimTime::from_secs_f64(rng.uniform(0.0, window));
            FlowSpec {
                src: NodeId(src as u32),
                dst: NodeId(dst as u32),
                packet_size: defaults.packet_bytes * 8,
                rate: defaults.rate,
                start: start.min(lifetime.saturating_sub(SimTime::from_micros(1))),
                stop: lifetime,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataPacket {
    pub id: u64,
    pub flow: usize,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bits: u64,
    pub created_at: SimTime,
    pub hops: u32,
    /// Set once the packet has waited for a route, so it is counted once.
    pub waited: bool,
}

/// A packet parked at `node` until a route shows up or the deadline passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferedRequest {
    pub packet: DataPacket,
    pub enqueued_at: SimTime,
    pub deadline: SimTime,
}

impl BufferedRequest {
    pub fn new(packet: DataPacket, enqueued_at: SimTime, timeout: SimTime) -> Self {
        BufferedRequest {
            packet,
            enqueued_at,
            deadline: enqueued_at + timeout,
        }
    }
}
