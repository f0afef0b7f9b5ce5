//! Destination-Sequenced Distance Vector, the proactive baseline.
//!
//! Every node periodically broadcasts its full table and stamps its own entry
//! with a fresh even sequence number. Topology changes trigger incremental
//! updates that flood the whole network; a broken route is advertised with
//! the next odd sequence number and an unreachable metric.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::aodv::{ForwardAction, SequenceNumber};
use crate::net::NodeContext;
use crate::packet::{DataPacket, DropReason};
use crate::time::SimTime;
use crate::world::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    Hops(u32),
    Unreachable,
}

impl Metric {
    fn plus_one(self) -> Metric {
        match self {
            Metric::Hops(h) => Metric::Hops(h + 1),
            Metric::Unreachable => Metric::Unreachable,
        }
    }

    pub fn hops(self) -> Option<u32> {
        match self {
            Metric::Hops(h) => Some(h),
            Metric::Unreachable => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DsdvEntry {
    pub dst: NodeId,
    pub next_hop: NodeId,
    pub metric: Metric,
    /// Even while reachable, odd once reported broken.
    pub dst_seq: SequenceNumber,
    pub install_time: SimTime,
}

impl DsdvEntry {
    pub fn is_reachable(&self) -> bool {
        self.metric != Metric::Unreachable && self.dst_seq.is_multiple_of(2)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Advert {
    pub dst: NodeId,
    pub dst_seq: SequenceNumber,
    pub metric: Metric,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdatePacket {
    pub origin: NodeId,
    pub entries: Vec<Advert>,
    pub full_dump: bool,
}

impl UpdatePacket {
    pub fn size(&self) -> u32 {
        4 + 12 * self.entries.len() as u32
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DsdvConfig {
    pub update_interval: SimTime,
}

impl Default for DsdvConfig {
    fn default() -> Self {
        DsdvConfig { update_interval: SimTime::from_secs(1.0) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DsdvTimer {
    Dump,
}

type Ctx<'a> = dyn NodeContext<Msg = UpdatePacket, Timer = DsdvTimer> + 'a;

#[derive(Debug)]
pub struct DsdvNode {
    id: NodeId,
    config: DsdvConfig,
    table: BTreeMap<NodeId, DsdvEntry>,
    neighbors: BTreeSet<NodeId>,
}

impl DsdvNode {
    pub fn new(id: NodeId, config: DsdvConfig) -> Self {
        let mut table = BTreeMap::new();
        table.insert(
            id,
            DsdvEntry { dst: id, next_hop: id, metric: Metric::Hops(0), dst_seq: 0, install_time: SimTime::ZERO },
        );
        DsdvNode { id, config, table, neighbors: BTreeSet::new() }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn own_seq(&self) -> SequenceNumber {
        self.table[&self.id].dst_seq
    }

    pub fn table(&self) -> impl Iterator<Item = &DsdvEntry> {
        self.table.values()
    }

    pub fn entry(&self, dst: NodeId) -> Option<&DsdvEntry> {
        self.table.get(&dst)
    }

    /// Seeds the neighbor set without announcing anything (start of run).
    pub fn set_neighbors(&mut self, neighbors: impl IntoIterator<Item = NodeId>) {
        self.neighbors = neighbors.into_iter().collect();
    }

    fn bump_own(&mut self, now: SimTime) {
        let me = self.table.get_mut(&self.id).unwrap();
        me.dst_seq += 2;
        me.install_time = now;
    }

    fn advert(&self, dst: NodeId) -> Advert {
        let e = &self.table[&dst];
        Advert { dst, dst_seq: e.dst_seq, metric: e.metric }
    }

    /// Broadcasts the full table with a fresh own sequence number and re-arms.
    pub fn periodic_dump(&mut self, ctx: &mut Ctx<'_>) -> UpdatePacket {
        let now = ctx.now();
        ctx.set_timer(now + self.config.update_interval, DsdvTimer::Dump);
        self.bump_own(now);
        let pkt = UpdatePacket {
            origin: self.id,
            entries: self.table.keys().map(|&d| self.advert(d)).collect(),
            full_dump: true,
        };
        ctx.broadcast(pkt.clone());
        pkt
    }

    /// Broadcasts an incremental update for the listed destinations now.
    pub fn triggered_update(&mut self, ctx: &mut Ctx<'_>, changed: &[NodeId]) -> Option<UpdatePacket> {
        if changed.is_empty() {
            return None;
        }
        let pkt = UpdatePacket {
            origin: self.id,
            entries: changed.iter().map(|&d| self.advert(d)).collect(),
            full_dump: false,
        };
        ctx.broadcast(pkt.clone());
        Some(pkt)
    }

    pub fn on_timer(&mut self, ctx: &mut Ctx<'_>, timer: DsdvTimer) {
        match timer {
            DsdvTimer::Dump => {
                self.periodic_dump(ctx);
            }
        }
    }

    /// A new neighbor came into range: announce a fresh own sequence number.
    pub fn link_up(&mut self, ctx: &mut Ctx<'_>, neighbor: NodeId) -> Option<UpdatePacket> {
        if !self.neighbors.insert(neighbor) {
            return None;
        }
        self.bump_own(ctx.now());
        self.triggered_update(ctx, &[self.id])
    }

    /// A neighbor went out of range: every route through it is advertised
    /// broken, together with a fresh own sequence number.
    pub fn link_down(&mut self, ctx: &mut Ctx<'_>, neighbor: NodeId) -> Option<UpdatePacket> {
        if !self.neighbors.remove(&neighbor) {
            return None;
        }
        let now = ctx.now();
        self.bump_own(now);
        let mut changed = vec![self.id];
        for e in self.table.values_mut() {
            if e.dst != self.id && e.next_hop == neighbor && e.is_reachable() {
                e.dst_seq += 1;
                e.metric = Metric::Unreachable;
                e.install_time = now;
                changed.push(e.dst);
            }
        }
        self.triggered_update(ctx, &changed)
    }

    /// Merges a neighbor's advertisement. Returns how many entries changed;
    /// route changes, and anything learned from an incremental update, are
    /// re-advertised at once so the flood continues.
    pub fn handle_update(&mut self, ctx: &mut Ctx<'_>, from: NodeId, pkt: UpdatePacket) -> usize {
        let now = ctx.now();
        let mut adopted = 0;
        let mut readvertise = Vec::new();
        for adv in pkt.entries {
            if adv.dst == self.id {
                continue;
            }
            let metric = adv.metric.plus_one();
            let significant = match self.table.get(&adv.dst) {
                None if metric == Metric::Unreachable => continue,
                None => true,
                Some(cur) => {
                    let newer = adv.dst_seq > cur.dst_seq || (adv.dst_seq == cur.dst_seq && metric < cur.metric);
                    if !newer {
                        continue;
                    }
                    cur.next_hop != from || cur.metric != metric
                }
            };
            self.table.insert(
                adv.dst,
                DsdvEntry { dst: adv.dst, next_hop: from, metric, dst_seq: adv.dst_seq, install_time: now },
            );
            adopted += 1;
            if significant || !pkt.full_dump {
                readvertise.push(adv.dst);
            }
        }
        self.triggered_update(ctx, &readvertise);
        adopted
    }

    fn forward(&mut self, ctx: &mut Ctx<'_>, pkt: DataPacket) -> ForwardAction {
        let next = match self.table.get(&pkt.dst) {
            Some(e) if e.is_reachable() => e.next_hop,
            _ => {
                ctx.drop_data(pkt, DropReason::NoRoute);
                return ForwardAction::Dropped(DropReason::NoRoute);
            }
        };
        match ctx.send_data(next, pkt) {
            Ok(()) => ForwardAction::Forwarded(next),
            Err(pkt) => {
                ctx.drop_data(pkt, DropReason::LinkBreak);
                self.link_down(ctx, next);
                ForwardAction::Dropped(DropReason::LinkBreak)
            }
        }
    }

    /// Sends via the current table; DSDV never buffers.
    pub fn forward_data(&mut self, ctx: &mut Ctx<'_>, pkt: DataPacket) -> ForwardAction {
        self.forward(ctx, pkt)
    }

    pub fn handle_data(&mut self, ctx: &mut Ctx<'_>, pkt: DataPacket) -> ForwardAction {
        if pkt.dst == self.id {
            ctx.deliver(pkt);
            return ForwardAction::Delivered;
        }
        self.forward(ctx, pkt)
    }
}
