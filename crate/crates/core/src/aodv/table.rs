use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::messages::SequenceNumber;
use crate::engine::EventHandle;
use crate::packet::DataPacket;
use crate::time::SimTime;
use crate::world::NodeId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteEntry {
    pub dst: NodeId,
    pub next_hop: NodeId,
    pub hop_count: u32,
    pub dst_seq: SequenceNumber,
    pub expires_at: SimTime,
    pub active: bool,
    /// Upstream neighbors that use this node as next hop toward `dst`.
    pub precursors: BTreeSet<NodeId>,
}

impl RouteEntry {
    pub fn is_usable(&self, now: SimTime) -> bool {
        self.active && self.expires_at > now
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReversePathEntry {
    /// RREQ originator.
    pub toward: NodeId,
    /// Neighbor the RREQ arrived from.
    pub via: NodeId,
    pub expires_at: SimTime,
}

#[derive(Debug)]
pub struct PendingDiscovery {
    pub dst: NodeId,
    pub retries_left: u32,
    pub timer: EventHandle,
    pub started_at: SimTime,
    pub buffered: VecDeque<DataPacket>,
}

#[derive(Clone, Debug, Default)]
pub struct RouteTable {
    entries: BTreeMap<NodeId, RouteEntry>,
}

impl RouteTable {
    pub fn get(&self, dst: NodeId) -> Option<&RouteEntry> {
        self.entries.get(&dst)
    }

    pub fn get_mut(&mut self, dst: NodeId) -> Option<&mut RouteEntry> {
        self.entries.get_mut(&dst)
    }

    pub fn usable(&self, dst: NodeId, now: SimTime) -> Option<&RouteEntry> {
        self.entries.get(&dst).filter(|e| e.is_usable(now))
    }

    pub fn iter(&self) -> impl Iterator<Item = &RouteEntry> {
        self.entries.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut RouteEntry> {
        self.entries.values_mut()
    }

    pub fn has_usable(&self, now: SimTime) -> bool {
        self.entries.values().any(|e| e.is_usable(now))
    }

    /// Installs `candidate` if it is fresher (higher sequence number), equally
    /// fresh but shorter, or equally fresh while the existing entry is no
    /// longer usable. Precursors of a replaced entry carry over.
    pub fn update(&mut self, mut candidate: RouteEntry, now: SimTime) -> bool {
        match self.entries.get(&candidate.dst) {
            None => {}
            Some(cur) => {
                let better = candidate.dst_seq > cur.dst_seq
                    || (candidate.dst_seq == cur.dst_seq && candidate.hop_count < cur.hop_count)
                    || (candidate.dst_seq == cur.dst_seq && !cur.is_usable(now));
                if !better {
                    return false;
                }
                candidate.precursors.extend(cur.precursors.iter().copied());
            }
        }
        candidate.precursors.remove(&candidate.next_hop);
        self.entries.insert(candidate.dst, candidate);
        true
    }

    /// Marks entries whose lifetime has run out as inactive.
    pub fn expire(&mut self, now: SimTime) -> Vec<NodeId> {
        let mut expired = Vec::new();
        for e in self.entries.values_mut() {
            if e.active && e.expires_at <= now {
                e.active = false;
                expired.push(e.dst);
            }
        }
        expired
    }
}
