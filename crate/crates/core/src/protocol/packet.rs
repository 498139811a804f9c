use crate::time::SimTime;
use crate::NodeId;

/// IP + UDP + routing message header, in bits.
pub const CONTROL_HEADER_BITS: u64 = 256;
/// Destination, sequence number and metric.
pub const NPDU_ENTRY_BITS: u64 = 96;
/// Neighbour address and link-up timestamp.
pub const LSU_ENTRY_BITS: u64 = 64;
/// Neighbour address and link code.
pub const HELLO_ENTRY_BITS: u64 = 40;
/// Advertised selector address.
pub const TC_ENTRY_BITS: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpduKind {
    Full,
    Incremental,
}

/// DSDV routing update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NpduPacket {
    pub origin: NodeId,
    pub kind: NpduKind,
    /// `(destination, seq_no, hops)`.
    pub entries: Vec<(NodeId, u64, u32)>,
}

/// FSR link-state update: the origin's neighbour list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkStateUpdate {
    pub origin: NodeId,
    pub seq: u64,
    pub ttl: u8,
    /// Neighbours with the time each link was sensed up.
    pub neighbors: Vec<(NodeId, SimTime)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LinkStatus {
    /// Heard, not yet confirmed bidirectional.
    Asym,
    Sym,
    /// Symmetric and selected as multipoint relay by the sender.
    Mpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelloMessage {
    pub origin: NodeId,
    pub neighbors: Vec<(NodeId, LinkStatus)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyControl {
    pub origin: NodeId,
    pub seq: u64,
    /// Advertised neighbour sequence number; bumps when `selectors` changes.
    pub ansn: u64,
    pub ttl: u8,
    pub selectors: Vec<NodeId>,
    /// Simulation bookkeeping, not part of the wire size: set on TCs sent in
    /// reaction to an MPR change so relayed copies are accounted the same way.
    pub triggered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlPacket {
    Npdu(NpduPacket),
    Lsu(LinkStateUpdate),
    Hello(HelloMessage),
    Tc(TopologyControl),
}

impl ControlPacket {
    pub fn size_bits(&self) -> u64 {
        let (n, per) = match self {
            ControlPacket::Npdu(p) => (p.entries.len(), NPDU_ENTRY_BITS),
            ControlPacket::Lsu(p) => (p.neighbors.len(), LSU_ENTRY_BITS),
            ControlPacket::Hello(p) => (p.neighbors.len(), HELLO_ENTRY_BITS),
            ControlPacket::Tc(p) => (p.selectors.len(), TC_ENTRY_BITS),
        };
        CONTROL_HEADER_BITS + n as u64 * per
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ControlPacket::Npdu(_) => "npdu",
            ControlPacket::Lsu(_) => "lsu",
            ControlPacket::Hello(_) => "hello",
            ControlPacket::Tc(_) => "tc",
        }
    }

    pub fn ttl(&self) -> u8 {
        match self {
            ControlPacket::Npdu(_) | ControlPacket::Hello(_) => 1,
            ControlPacket::Lsu(p) => p.ttl,
            ControlPacket::Tc(p) => p.ttl,
        }
    }

    pub fn origin(&self) -> NodeId {
        match self {
            ControlPacket::Npdu(p) => p.origin,
            ControlPacket::Lsu(p) => p.origin,
            ControlPacket::Hello(p) => p.origin,
            ControlPacket::Tc(p) => p.origin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_grow_with_entries() {
        let empty = ControlPacket::Hello(HelloMessage {
            origin: NodeId(0),
            neighbors: vec![],
        });
        assert_eq!(empty.size_bits(), CONTROL_HEADER_BITS);
        let npdu = ControlPacket::Npdu(NpduPacket {
            origin: NodeId(0),
            kind: NpduKind::Full,
            entries: vec![(NodeId(0), 2, 0); 50],
        });
        assert_eq!(npdu.size_bits(), CONTROL_HEADER_BITS + 50 * NPDU_ENTRY_BITS);
        assert_eq!(npdu.ttl(), 1);
    }
}
