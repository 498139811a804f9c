//! Discrete-event simulation of proactive routing in wireless multi-hop
//! networks.
//!
//! The simulator drives DSDV, FSR and OLSR agents over a Random Waypoint
//! topology and an idealized shared channel, measures throughput, end-to-end
//! delay and control overhead, and checks runs against closed-form overhead
//! predictions.
//!
//! Geometry and statistics are generic over the float type; the aliases
//! below fix the simulator itself to `f64`.

pub mod analytical;
pub mod channel;
pub mod geometry;
pub mod harness;
pub mod kernel;
pub mod metrics;
pub mod mobility;
pub mod protocol;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod stats;
pub mod time;
pub mod trace;
pub mod traffic;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use time::SimTime;

/// Simulator positions, in meters.
pub type Position = geometry::Point2<f64>;
/// Single-precision positions, for callers that store large traces.
pub type PositionF32 = geometry::Point2<f32>;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
