//! Per-emission control trace.

use std::fmt::Write as _;

use crate::protocol::{ControlCategory, ProtocolKind};
use crate::time::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlTraceRecord {
    pub time: SimTime,
    pub node: NodeId,
    pub protocol: ProtocolKind,
    pub kind: &'static str,
    pub size_bits: u64,
    pub ttl: u8,
    pub category: ControlCategory,
    pub forwarded: bool,
}

/// `time node proto pkt_kind size_bits ttl`, one line per transmission.
pub fn format_control_trace(records: &[ControlTraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            r.time, r.node, r.protocol, r.kind, r.size_bits, r.ttl
        );
    }
    out
}
