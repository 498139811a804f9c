//! Idealized shared radio channel.
//!
//! There is no MAC: every transmission reaches all current neighbours of the
//! sender after `bits / capacity` plus a per-receiver jitter. The channel as a
//! whole may carry at most `capacity` bits in each whole-second window;
//! transmissions past that budget are dropped.

use thiserror::Error;

use crate::mobility::ConnectivityGraph;
use crate::rng::RandomStream;
use crate::time::{SimTime, TICKS_PER_SECOND};
use crate::NodeId;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum ChannelError {
    #[error("channel budget exhausted in second {window}")]
    ChannelSaturated { window: u64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelStats {
    pub transmissions: u64,
    pub bits_sent: u64,
    pub saturated: u64,
    pub bits_dropped: u64,
}

pub struct Channel {
    capacity_bps: u64,
    jitter_max_us: u64,
    window: u64,
    used: u64,
    stats: ChannelStats,
}

impl Channel {
    pub fn new(capacity_bps: u64, jitter_max: SimTime) -> Self {
        Channel {
            capacity_bps,
            jitter_max_us: jitter_max.as_micros(),
            window: 0,
            used: 0,
            stats: ChannelStats::default(),
        }
    }

    pub fn capacity_bps(&self) -> u64 {
        self.capacity_bps
    }

    pub fn stats(&self) -> ChannelStats {
        self.stats
    }

    /// Serialization time of `bits`, rounded up to the next microsecond.
    pub fn transmission_delay(&self, bits: u64) -> SimTime {
        if self.capacity_bps == 0 {
            return SimTime::MAX;
        }
        let us = (bits * TICKS_PER_SECOND).div_ceil(self.capacity_bps);
        SimTime::from_micros(us)
    }

    /// Reserves `bits` of the budget for the window containing `at`.
    pub fn admit(&mut self, bits: u64, at: SimTime) -> Result<SimTime, ChannelError> {
        let window = at.whole_secs();
        if window != self.window {
            self.window = window;
            self.used = 0;
        }
        if self.used + bits > self.capacity_bps {
            self.stats.saturated += 1;
            self.stats.bits_dropped += bits;
            return Err(ChannelError::ChannelSaturated { window });
        }
        self.used += bits;
        self.stats.transmissions += 1;
        self.stats.bits_sent += bits;
        Ok(self.transmission_delay(bits))
    }

    pub fn jitter(&self, rng: &mut RandomStream) -> SimTime {
        if self.jitter_max_us == 0 {
            SimTime::ZERO
        } else {
            SimTime::from_micros(rng.below_inclusive(self.jitter_max_us))
        }
    }

    /// One broadcast from `sender`: every current neighbour gets a copy.
    pub fn broadcast_delivery(
        &mut self,
        graph: &ConnectivityGraph,
        sender: NodeId,
        bits: u64,
        at: SimTime,
        rng: &mut RandomStream,
    ) -> Result<Vec<(NodeId, SimTime)>, ChannelError> {
        let base = self.admit(bits, at)?;
        let neighbors = graph.neighbors(sender).unwrap_or(&[]);
        Ok(neighbors
            .iter()
            .map(|&r| (r, at + base + self.jitter(rng)))
            .collect())
    }

    /// Point-to-point transmission; the caller has already checked adjacency.
    pub fn unicast_delivery(
        &mut self,
        bits: u64,
        at: SimTime,
        rng: &mut RandomStream,
    ) -> Result<SimTime, ChannelError> {
        let base = self.admit(bits, at)?;
        Ok(at + base + self.jitter(rng))
    }
}
