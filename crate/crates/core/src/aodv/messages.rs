use serde::{Deserialize, Serialize};

use crate::packet::PacketKind;
use crate::world::NodeId;

/// Per-node freshness counter. Plain integer order, no wraparound.
pub type SequenceNumber = u64;

/// Per-source RREQ counter; `(src, BroadcastId)` names one flood.
pub type BroadcastId = u64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rreq {
    pub src: NodeId,
    pub src_seq: SequenceNumber,
    pub bcast_id: BroadcastId,
    pub dst: NodeId,
    /// Last sequence number the source knew for `dst`, 0 if none.
    pub dst_last_seq: SequenceNumber,
    pub hop_count: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rrep {
    /// Originator of the discovery this answers.
    pub src: NodeId,
    pub dst: NodeId,
    pub dst_seq: SequenceNumber,
    pub hop_count: u32,
    /// Route lifetime in microseconds.
    pub lifetime_us: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rerr {
    pub unreachable: Vec<(NodeId, SequenceNumber)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlMessage {
    Rreq(Rreq),
    Rrep(Rrep),
    Rerr(Rerr),
    Hello { src: NodeId, seq: SequenceNumber },
}

impl ControlMessage {
    pub fn kind(&self) -> PacketKind {
        match self {
            ControlMessage::Rreq(_) => PacketKind::Rreq,
            ControlMessage::Rrep(_) => PacketKind::Rrep,
            ControlMessage::Rerr(_) => PacketKind::Rerr,
            ControlMessage::Hello { .. } => PacketKind::Hello,
        }
    }

    /// Size on the wire in bytes, following the usual AODV field layout.
    pub fn size(&self) -> u32 {
        match self {
            ControlMessage::Rreq(_) => 24,
            ControlMessage::Rrep(_) | ControlMessage::Hello { .. } => 20,
            ControlMessage::Rerr(e) => 4 + 8 * e.unreachable.len() as u32,
        }
    }

    /// `(src, dst)` columns for the trace.
    pub fn endpoints(&self) -> (Option<NodeId>, Option<NodeId>) {
        match self {
            ControlMessage::Rreq(r) => (Some(r.src), Some(r.dst)),
            ControlMessage::Rrep(r) => (Some(r.src), Some(r.dst)),
            ControlMessage::Rerr(e) => (None, e.unreachable.first().map(|u| u.0)),
            ControlMessage::Hello { src, .. } => (Some(*src), None),
        }
    }
}
