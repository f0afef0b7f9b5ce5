use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;
use crate::world::NodeId;

/// Application payload carried hop by hop from a flow source to its sink.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataPacket {
    pub uid: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub size: u32,
    pub created_at: SimTime,
}

/// What a frame on the air carries; the trace `subkind` column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PacketKind {
    Data,
    Rreq,
    Rrep,
    Rerr,
    Hello,
    DsdvUpdate,
}

impl PacketKind {
    pub const CONTROL: [PacketKind; 5] =
        [PacketKind::Rreq, PacketKind::Rrep, PacketKind::Rerr, PacketKind::Hello, PacketKind::DsdvUpdate];

    pub fn is_control(self) -> bool {
        self != PacketKind::Data
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Data => "DATA",
            PacketKind::Rreq => "RREQ",
            PacketKind::Rrep => "RREP",
            PacketKind::Rerr => "RERR",
            PacketKind::Hello => "HELLO",
            PacketKind::DsdvUpdate => "DSDV-UPDATE",
        }
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PacketKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "DATA" => PacketKind::Data,
            "RREQ" => PacketKind::Rreq,
            "RREP" => PacketKind::Rrep,
            "RERR" => PacketKind::Rerr,
            "HELLO" => PacketKind::Hello,
            "DSDV-UPDATE" => PacketKind::DsdvUpdate,
            other => return Err(format!("unknown packet kind `{other}`")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    /// Next hop out of range at transmission time.
    LinkBreak,
    /// No usable route at a forwarding node.
    NoRoute,
    /// Discovery buffer overflowed; the oldest packet is evicted.
    BufferFull,
    /// Route discovery gave up after its last retry.
    DiscoveryFailed,
}
