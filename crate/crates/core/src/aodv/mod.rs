//! Ad hoc On-demand Distance Vector routing, one state machine per node.
//!
//! A node keeps routes only for destinations that traffic actually needs.
//! When a source has no usable route it buffers data and floods an RREQ;
//! every node that sees the flood remembers which neighbor it came from
//! (the reverse path) so the destination's RREP can be unicast back,
//! installing forward routes on the way. Broken links are reported upstream
//! with RERR until the source is reached, which rediscovers if its flow is
//! still running.

mod messages;
mod table;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

pub use messages::{BroadcastId, ControlMessage, Rerr, Rrep, Rreq, SequenceNumber};
pub use table::{PendingDiscovery, ReversePathEntry, RouteEntry, RouteTable};

use crate::net::NodeContext;
use crate::packet::{DataPacket, DropReason, PacketKind};
use crate::time::SimTime;
use crate::world::NodeId;

#[derive(Clone, Debug, PartialEq)]
pub struct AodvConfig {
    pub reverse_path_lifetime: SimTime,
    pub rrep_wait: SimTime,
    pub rreq_retries: u32,
    pub active_route_timeout: SimTime,
    /// `None` disables hello beaconing entirely.
    pub hello_interval: Option<SimTime>,
    pub allowed_hello_loss: u32,
    /// Beacon even without an active route.
    pub hello_always: bool,
    pub buffer_capacity: usize,
    /// Upper bound of the random delay before an RREQ is rebroadcast. Must
    /// stay below `hop_latency / (N - 1)` for first-arrival to mean fewest hops.
    pub rreq_jitter: SimTime,
}

impl Default for AodvConfig {
    fn default() -> Self {
        AodvConfig {
            reverse_path_lifetime: SimTime::from_secs(1.0),
            rrep_wait: SimTime::from_secs(0.2),
            rreq_retries: 2,
            active_route_timeout: SimTime::from_secs(3.0),
            hello_interval: Some(SimTime::from_secs(1.0)),
            allowed_hello_loss: 2,
            hello_always: false,
            buffer_capacity: 64,
            rreq_jitter: SimTime::from_micros(100),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AodvTimer {
    RrepWait { dst: NodeId },
    Hello,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AodvError {
    #[error("node {node} has no reverse path toward {toward}")]
    NoReversePath { node: NodeId, toward: NodeId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForwardAction {
    Forwarded(NodeId),
    Delivered,
    Buffered,
    Dropped(DropReason),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RreqAction {
    Duplicate,
    Replied(Rrep),
    /// Reply was due but the reverse neighbor is already out of range.
    ReplyLost,
    Rebroadcast(Rreq),
}

/// One completed route discovery at a source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscoveryRecord {
    pub dst: NodeId,
    /// Time the RREQ that succeeded was broadcast.
    pub started_at: SimTime,
    pub completed_at: SimTime,
    pub hop_count: u32,
}

#[derive(Debug)]
pub struct AodvNode {
    id: NodeId,
    config: AodvConfig,
    seq: SequenceNumber,
    bcast_id: BroadcastId,
    routes: RouteTable,
    reverse: BTreeMap<NodeId, ReversePathEntry>,
    seen: BTreeSet<(NodeId, BroadcastId)>,
    pending: BTreeMap<NodeId, PendingDiscovery>,
    last_heard: BTreeMap<NodeId, SimTime>,
    last_data_rx: Option<SimTime>,
    flows: Vec<(NodeId, SimTime)>,
    discoveries: Vec<DiscoveryRecord>,
}

type Ctx<'a> = dyn NodeContext<Msg = ControlMessage, Timer = AodvTimer> + 'a;

impl AodvNode {
    pub fn new(id: NodeId, config: AodvConfig) -> Self {
        AodvNode {
            id,
            config,
            seq: 0,
            bcast_id: 0,
            routes: RouteTable::default(),
            reverse: BTreeMap::new(),
            seen: BTreeSet::new(),
            pending: BTreeMap::new(),
            last_heard: BTreeMap::new(),
            last_data_rx: None,
            flows: Vec::new(),
            discoveries: Vec::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn own_seq(&self) -> SequenceNumber {
        self.seq
    }

    pub fn routes(&self) -> &RouteTable {
        &self.routes
    }

    pub fn reverse_paths(&self) -> impl Iterator<Item = &ReversePathEntry> {
        self.reverse.values()
    }

    pub fn pending(&self, dst: NodeId) -> Option<&PendingDiscovery> {
        self.pending.get(&dst)
    }

    pub fn buffered_packets(&self) -> usize {
        self.pending.values().map(|p| p.buffered.len()).sum()
    }

    pub fn discoveries(&self) -> &[DiscoveryRecord] {
        &self.discoveries
    }

    /// Registers traffic this node originates toward `dst` until `stop`, so
    /// that a lost route is rediscovered rather than abandoned.
    pub fn add_flow(&mut self, dst: NodeId, stop: SimTime) {
        self.flows.push((dst, stop));
    }

    fn needs_route(&self, dst: NodeId, now: SimTime) -> bool {
        self.flows.iter().any(|&(d, stop)| d == dst && stop > now)
    }

    fn heard(&mut self, from: NodeId, now: SimTime) {
        self.last_heard.insert(from, now);
    }

    fn refresh(&mut self, dst: NodeId, now: SimTime) {
        let lifetime = now + self.config.active_route_timeout;
        if let Some(e) = self.routes.get_mut(dst) {
            if e.is_usable(now) && e.expires_at < lifetime {
                e.expires_at = lifetime;
            }
        }
    }

    /// Sends `pkt` along a usable route. On a link break the packet is
    /// dropped and route maintenance runs.
    fn forward(&mut self, ctx: &mut Ctx<'_>, pkt: DataPacket) -> Result<ForwardAction, DataPacket> {
        let now = ctx.now();
        let Some(next) = self.routes.usable(pkt.dst, now).map(|e| e.next_hop) else {
            return Err(pkt);
        };
        let dst = pkt.dst;
        match ctx.send_data(next, pkt) {
            Ok(()) => {
                self.refresh(dst, now);
                Ok(ForwardAction::Forwarded(next))
            }
            Err(pkt) => {
                ctx.drop_data(pkt, DropReason::LinkBreak);
                self.on_link_break(ctx, next);
                Ok(ForwardAction::Dropped(DropReason::LinkBreak))
            }
        }
    }

    /// Entry point for a packet generated at this node.
    pub fn originate_data(&mut self, ctx: &mut Ctx<'_>, pkt: DataPacket) -> ForwardAction {
        debug_assert_ne!(pkt.dst, self.id);
        match self.forward(ctx, pkt) {
            Ok(action) => action,
            Err(pkt) => self.buffer(ctx, pkt),
        }
    }

    fn buffer(&mut self, ctx: &mut Ctx<'_>, pkt: DataPacket) -> ForwardAction {
        let dst = pkt.dst;
        if !self.pending.contains_key(&dst) {
            self.start_discovery(ctx, dst);
        }
        let cap = self.config.buffer_capacity;
        let pending = self.pending.get_mut(&dst).expect("discovery pending");
        pending.buffered.push_back(pkt);
        if pending.buffered.len() > cap {
            let oldest = pending.buffered.pop_front().unwrap();
            ctx.drop_data(oldest, DropReason::BufferFull);
        }
        ForwardAction::Buffered
    }

    fn next_rreq(&mut self, dst: NodeId) -> Rreq {
        self.seq += 1;
        self.bcast_id += 1;
        self.seen.insert((self.id, self.bcast_id));
        Rreq {
            src: self.id,
            src_seq: self.seq,
            bcast_id: self.bcast_id,
            dst,
            dst_last_seq: self.routes.get(dst).map_or(0, |e| e.dst_seq),
            hop_count: 0,
        }
    }

    /// Floods an RREQ for `dst` and arms the reply timer. Returns `None` if a
    /// discovery for `dst` is already running.
    pub fn start_discovery(&mut self, ctx: &mut Ctx<'_>, dst: NodeId) -> Option<Rreq> {
        if self.pending.contains_key(&dst) {
            return None;
        }
        let now = ctx.now();
        let rreq = self.next_rreq(dst);
        ctx.broadcast(ControlMessage::Rreq(rreq.clone()));
        let timer = ctx.set_timer(now + self.config.rrep_wait, AodvTimer::RrepWait { dst });
        self.pending.insert(
            dst,
            PendingDiscovery {
                dst,
                retries_left: self.config.rreq_retries,
                timer,
                started_at: now,
                buffered: VecDeque::new(),
            },
        );
        Some(rreq)
    }

    fn rrep_timeout(&mut self, ctx: &mut Ctx<'_>, dst: NodeId) {
        let now = ctx.now();
        let Some(p) = self.pending.get(&dst) else { return };
        if p.retries_left > 0 {
            let rreq = self.next_rreq(dst);
            ctx.broadcast(ControlMessage::Rreq(rreq));
            let timer = ctx.set_timer(now + self.config.rrep_wait, AodvTimer::RrepWait { dst });
            let p = self.pending.get_mut(&dst).unwrap();
            p.retries_left -= 1;
            p.timer = timer;
            p.started_at = now;
        } else {
            let p = self.pending.remove(&dst).unwrap();
            for pkt in p.buffered {
                ctx.drop_data(pkt, DropReason::DiscoveryFailed);
            }
        }
    }

    pub fn on_timer(&mut self, ctx: &mut Ctx<'_>, timer: AodvTimer) {
        match timer {
            AodvTimer::RrepWait { dst } => self.rrep_timeout(ctx, dst),
            AodvTimer::Hello => self.hello_tick(ctx),
        }
    }

    pub fn handle_message(&mut self, ctx: &mut Ctx<'_>, from: NodeId, msg: ControlMessage) {
        match msg {
            ControlMessage::Rreq(r) => {
                self.handle_rreq(ctx, from, r);
            }
            ControlMessage::Rrep(r) => {
                let _ = self.handle_rrep(ctx, from, r);
            }
            ControlMessage::Rerr(r) => {
                self.handle_rerr(ctx, from, r);
            }
            ControlMessage::Hello { .. } => self.heard(from, ctx.now()),
        }
    }

    fn reverse_via(&mut self, toward: NodeId, now: SimTime) -> Option<NodeId> {
        match self.reverse.get(&toward) {
            Some(r) if r.expires_at > now => Some(r.via),
            Some(_) => {
                self.reverse.remove(&toward);
                None
            }
            None => None,
        }
    }

    /// Unicasts an RREP one hop back toward its originator.
    fn send_rrep(&mut self, ctx: &mut Ctx<'_>, rrep: Rrep) -> Result<bool, AodvError> {
        let now = ctx.now();
        let Some(via) = self.reverse_via(rrep.src, now) else {
            ctx.drop_control(PacketKind::Rrep);
            return Err(AodvError::NoReversePath { node: self.id, toward: rrep.src });
        };
        if ctx.unicast(via, ControlMessage::Rrep(rrep)) {
            Ok(true)
        } else {
            ctx.drop_control(PacketKind::Rrep);
            Ok(false)
        }
    }

    pub fn handle_rreq(&mut self, ctx: &mut Ctx<'_>, from: NodeId, rreq: Rreq) -> RreqAction {
        let now = ctx.now();
        self.heard(from, now);
        if rreq.src == self.id || !self.seen.insert((rreq.src, rreq.bcast_id)) {
            return RreqAction::Duplicate;
        }
        self.reverse.insert(
            rreq.src,
            ReversePathEntry { toward: rreq.src, via: from, expires_at: now + self.config.reverse_path_lifetime },
        );

        let reply = if rreq.dst == self.id {
            self.seq = self.seq.max(rreq.dst_last_seq) + 1;
            Some(Rrep {
                src: rreq.src,
                dst: self.id,
                dst_seq: self.seq,
                hop_count: 0,
                lifetime_us: self.config.active_route_timeout.as_micros(),
            })
        } else {
            match self.routes.get_mut(rreq.dst) {
                Some(e) if e.is_usable(now) && e.dst_seq >= rreq.dst_last_seq && e.next_hop != from => {
                    e.precursors.insert(from);
                    Some(Rrep {
                        src: rreq.src,
                        dst: rreq.dst,
                        dst_seq: e.dst_seq,
                        hop_count: e.hop_count,
                        lifetime_us: (e.expires_at - now).as_micros(),
                    })
                }
                _ => None,
            }
        };

        match reply {
            Some(rrep) => match self.send_rrep(ctx, rrep.clone()) {
                Ok(true) => RreqAction::Replied(rrep),
                _ => RreqAction::ReplyLost,
            },
            None => {
                let fwd = Rreq { hop_count: rreq.hop_count + 1, ..rreq };
                let delay = ctx.random_delay(self.config.rreq_jitter);
                ctx.broadcast_after(delay, ControlMessage::Rreq(fwd.clone()));
                RreqAction::Rebroadcast(fwd)
            }
        }
    }

    pub fn handle_rrep(&mut self, ctx: &mut Ctx<'_>, from: NodeId, rrep: Rrep) -> Result<(), AodvError> {
        let now = ctx.now();
        self.heard(from, now);
        let candidate = RouteEntry {
            dst: rrep.dst,
            next_hop: from,
            hop_count: rrep.hop_count + 1,
            dst_seq: rrep.dst_seq,
            expires_at: now + SimTime::from_micros(rrep.lifetime_us),
            active: true,
            precursors: BTreeSet::new(),
        };
        let installed = self.update_route(candidate, now);

        if rrep.src == self.id {
            if let Some(p) = self.pending.remove(&rrep.dst) {
                ctx.cancel_timer(p.timer);
                if let Some(e) = self.routes.usable(rrep.dst, now) {
                    self.discoveries.push(DiscoveryRecord {
                        dst: rrep.dst,
                        started_at: p.started_at,
                        completed_at: now,
                        hop_count: e.hop_count,
                    });
                }
                for pkt in p.buffered {
                    self.originate_data(ctx, pkt);
                }
            }
            return Ok(());
        }
        if !installed {
            return Ok(());
        }
        let Some(via) = self.reverse_via(rrep.src, now) else {
            ctx.drop_control(PacketKind::Rrep);
            return Err(AodvError::NoReversePath { node: self.id, toward: rrep.src });
        };
        if let Some(e) = self.routes.get_mut(rrep.dst) {
            if e.next_hop != via {
                e.precursors.insert(via);
            }
        }
        self.send_rrep(ctx, Rrep { hop_count: rrep.hop_count + 1, ..rrep }).map(|_| ())
    }

    pub fn update_route(&mut self, candidate: RouteEntry, now: SimTime) -> bool {
        self.routes.update(candidate, now)
    }

    /// Handles a data packet arriving from neighbor `from`.
    pub fn handle_data(&mut self, ctx: &mut Ctx<'_>, from: NodeId, pkt: DataPacket) -> ForwardAction {
        let now = ctx.now();
        self.heard(from, now);
        if pkt.dst == self.id {
            self.last_data_rx = Some(now);
            ctx.deliver(pkt);
            return ForwardAction::Delivered;
        }
        match self.forward(ctx, pkt) {
            Ok(action) => action,
            Err(pkt) => {
                let dst = pkt.dst;
                ctx.drop_data(pkt, DropReason::NoRoute);
                if let Some(e) = self.routes.get(dst) {
                    let rerr = Rerr { unreachable: vec![(dst, e.dst_seq)] };
                    if !ctx.unicast(from, ControlMessage::Rerr(rerr)) {
                        ctx.drop_control(PacketKind::Rerr);
                    }
                }
                ForwardAction::Dropped(DropReason::NoRoute)
            }
        }
    }

    fn notify_precursors(&mut self, ctx: &mut Ctx<'_>, rerr: &Rerr, precursors: &BTreeSet<NodeId>) {
        for &p in precursors {
            if !ctx.unicast(p, ControlMessage::Rerr(rerr.clone())) {
                ctx.drop_control(PacketKind::Rerr);
            }
        }
    }

    fn rediscover(&mut self, ctx: &mut Ctx<'_>, dsts: &[NodeId]) {
        let now = ctx.now();
        for &d in dsts {
            if self.needs_route(d, now) && self.routes.usable(d, now).is_none() {
                self.start_discovery(ctx, d);
            }
        }
    }

    /// Invalidates every usable route through `dead` and reports the
    /// destinations to their precursors. No-op if no route uses `dead`.
    pub fn on_link_break(&mut self, ctx: &mut Ctx<'_>, dead: NodeId) -> Option<Rerr> {
        let now = ctx.now();
        let mut unreachable = Vec::new();
        let mut precursors = BTreeSet::new();
        for e in self.routes.iter_mut() {
            if e.next_hop == dead && e.is_usable(now) {
                e.active = false;
                e.dst_seq += 1;
                unreachable.push((e.dst, e.dst_seq));
                precursors.extend(e.precursors.iter().copied());
            }
        }
        if unreachable.is_empty() {
            return None;
        }
        self.last_heard.remove(&dead);
        let dsts: Vec<NodeId> = unreachable.iter().map(|u| u.0).collect();
        for d in &dsts {
            if let Some(p) = self.pending.remove(d) {
                ctx.cancel_timer(p.timer);
                for pkt in p.buffered {
                    ctx.drop_data(pkt, DropReason::LinkBreak);
                }
            }
        }
        let rerr = Rerr { unreachable };
        self.notify_precursors(ctx, &rerr, &precursors);
        self.rediscover(ctx, &dsts);
        (!precursors.is_empty()).then_some(rerr)
    }

    /// Invalidates routes via `from` that the error reports, and passes the
    /// error upstream. Returns the destinations invalidated here.
    pub fn handle_rerr(&mut self, ctx: &mut Ctx<'_>, from: NodeId, rerr: Rerr) -> Vec<NodeId> {
        let now = ctx.now();
        self.heard(from, now);
        let mut unreachable = Vec::new();
        let mut precursors = BTreeSet::new();
        for &(dst, seq) in &rerr.unreachable {
            if let Some(e) = self.routes.get_mut(dst) {
                if e.next_hop == from && e.is_usable(now) && e.dst_seq <= seq {
                    e.active = false;
                    e.dst_seq = seq;
                    unreachable.push((dst, seq));
                    precursors.extend(e.precursors.iter().copied());
                }
            }
        }
        let dsts: Vec<NodeId> = unreachable.iter().map(|u| u.0).collect();
        if !unreachable.is_empty() {
            self.notify_precursors(ctx, &Rerr { unreachable }, &precursors);
            self.rediscover(ctx, &dsts);
        }
        dsts
    }

    pub fn expire_routes(&mut self, now: SimTime) -> Vec<NodeId> {
        self.reverse.retain(|_, r| r.expires_at > now);
        self.routes.expire(now)
    }

    /// A node beacons while it is part of an active route: it holds a usable
    /// route, or it is a destination that received data recently.
    fn beacons(&self, now: SimTime) -> bool {
        self.config.hello_always
            || self.routes.has_usable(now)
            || self.last_data_rx.is_some_and(|t| now < t + self.config.active_route_timeout)
    }

    /// Periodic beacon and neighbor liveness check; re-arms itself.
    pub fn hello_tick(&mut self, ctx: &mut Ctx<'_>) {
        let Some(interval) = self.config.hello_interval else { return };
        let now = ctx.now();
        ctx.set_timer(now + interval, AodvTimer::Hello);
        self.expire_routes(now);
        if self.beacons(now) {
            ctx.broadcast(ControlMessage::Hello { src: self.id, seq: self.seq });
        }
        let allowance = interval.times(self.config.allowed_hello_loss as u64);
        let silent: BTreeSet<NodeId> = self
            .routes
            .iter()
            .filter(|e| e.is_usable(now))
            .map(|e| e.next_hop)
            .filter(|n| self.last_heard.get(n).is_none_or(|&t| now.saturating_sub(t) > allowance))
            .collect();
        for n in silent {
            self.on_link_break(ctx, n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::mock::{MockCtx, Out};

    type M = MockCtx<ControlMessage, AodvTimer>;

    fn n(i: u16) -> NodeId {
        NodeId(i)
    }

    fn pkt(uid: u64, src: u16, dst: u16) -> DataPacket {
        DataPacket { uid, src: n(src), dst: n(dst), size: 512, created_at: SimTime::ZERO }
    }

    fn route(dst: u16, next: u16, hops: u32, seq: u64) -> RouteEntry {
        RouteEntry {
            dst: n(dst),
            next_hop: n(next),
            hop_count: hops,
            dst_seq: seq,
            expires_at: SimTime::from_secs(10.0),
            active: true,
            precursors: BTreeSet::new(),
        }
    }

    fn rreq_from(src: u16, id: u64, dst: u16) -> Rreq {
        Rreq { src: n(src), src_seq: 1, bcast_id: id, dst: n(dst), dst_last_seq: 0, hop_count: 0 }
    }

    #[test]
    fn data_with_route_is_forwarded() {
        let mut node = AodvNode::new(n(0), AodvConfig::default());
        node.update_route(route(5, 2, 3, 1), SimTime::ZERO);
        let mut ctx = M::new(0, &[2]).at(1.0);
        assert_eq!(node.originate_data(&mut ctx, pkt(1, 0, 5)), ForwardAction::Forwarded(n(2)));
        assert_eq!(ctx.take(), vec![Out::Data(n(2), 1)]);
    }

    #[test]
    fn data_without_route_buffers_and_discovers() {
        let mut node = AodvNode::new(n(0), AodvConfig::default());
        let mut ctx = M::new(0, &[]).at(1.0);
        assert_eq!(node.originate_data(&mut ctx, pkt(1, 0, 5)), ForwardAction::Buffered);
        let out = ctx.take();
        assert!(matches!(&out[0], Out::Broadcast(ControlMessage::Rreq(r)) if r.dst == n(5) && r.dst_last_seq == 0));
        assert!(matches!(&out[1], Out::Timer(t, AodvTimer::RrepWait { .. }) if *t == SimTime::from_secs(1.2)));
        assert_eq!(node.buffered_packets(), 1);
        // second packet joins the same discovery
        node.originate_data(&mut ctx, pkt(2, 0, 5));
        assert!(ctx.take().is_empty());
        assert_eq!(node.buffered_packets(), 2);
    }

    #[test]
    fn buffer_overflow_drops_oldest() {
        let mut node = AodvNode::new(n(0), AodvConfig::default());
        let mut ctx = M::new(0, &[]);
        for uid in 0..65 {
            node.originate_data(&mut ctx, pkt(uid, 0, 5));
        }
        assert_eq!(node.buffered_packets(), 64);
        assert!(ctx.take().contains(&Out::Drop(0, DropReason::BufferFull)));
        assert_eq!(node.pending(n(5)).unwrap().buffered.front().unwrap().uid, 1);
    }

    #[test]
    fn consecutive_discoveries_bump_broadcast_id() {
        let mut node = AodvNode::new(n(0), AodvConfig::default());
        let mut ctx = M::new(0, &[]);
        let a = node.start_discovery(&mut ctx, n(5)).unwrap();
        assert!(node.start_discovery(&mut ctx, n(5)).is_none());
        let b = node.start_discovery(&mut ctx, n(6)).unwrap();
        assert_eq!(b.bcast_id, a.bcast_id + 1);
        assert!(b.src_seq > a.src_seq);
    }

    #[test]
    fn retries_then_gives_up() {
        let mut node = AodvNode::new(n(0), AodvConfig::default());
        let mut ctx = M::new(0, &[]);
        node.originate_data(&mut ctx, pkt(7, 0, 5));
        ctx.take();
        for _ in 0..2 {
            node.on_timer(&mut ctx, AodvTimer::RrepWait { dst: n(5) });
            assert!(matches!(ctx.take()[0], Out::Broadcast(ControlMessage::Rreq(_))));
        }
        assert_eq!(node.pending(n(5)).unwrap().retries_left, 0);
        node.on_timer(&mut ctx, AodvTimer::RrepWait { dst: n(5) });
        assert_eq!(ctx.take(), vec![Out::Drop(7, DropReason::DiscoveryFailed)]);
        assert!(node.pending(n(5)).is_none());
    }

    #[test]
    fn destination_replies_along_reverse_path() {
        let mut node = AodvNode::new(n(5), AodvConfig::default());
        let mut ctx = M::new(5, &[4]).at(1.0);
        let action = node.handle_rreq(&mut ctx, n(4), rreq_from(0, 1, 5));
        let RreqAction::Replied(rrep) = action else { panic!("{action:?}") };
        assert_eq!(rrep.hop_count, 0);
        assert_eq!(rrep.dst, n(5));
        assert!(matches!(&ctx.take()[0], Out::Unicast(to, ControlMessage::Rrep(_)) if *to == n(4)));
    }

    #[test]
    fn duplicate_rreq_is_discarded() {
        let mut node = AodvNode::new(n(3), AodvConfig::default());
        let mut ctx = M::new(3, &[]);
        assert!(
            matches!(node.handle_rreq(&mut ctx, n(1), rreq_from(0, 1, 5)), RreqAction::Rebroadcast(r) if r.hop_count == 1)
        );
        assert_eq!(node.handle_rreq(&mut ctx, n(2), rreq_from(0, 1, 5)), RreqAction::Duplicate);
        assert_eq!(node.reverse_paths().next().unwrap().via, n(1));
    }

    #[test]
    fn intermediate_with_fresh_route_replies() {
        let mut node = AodvNode::new(n(3), AodvConfig::default());
        node.update_route(route(5, 4, 2, 7), SimTime::ZERO);
        let mut ctx = M::new(3, &[1]);
        let mut r = rreq_from(0, 1, 5);
        r.dst_last_seq = 7;
        assert!(matches!(node.handle_rreq(&mut ctx, n(1), r), RreqAction::Replied(rrep) if rrep.hop_count == 2));
        assert!(node.routes().get(n(5)).unwrap().precursors.contains(&n(1)));

        // stale cached route does not answer
        let mut r = rreq_from(0, 2, 5);
        r.dst_last_seq = 8;
        assert!(matches!(node.handle_rreq(&mut ctx, n(1), r), RreqAction::Rebroadcast(_)));
    }

    #[test]
    fn source_flushes_buffer_on_rrep() {
        let mut node = AodvNode::new(n(0), AodvConfig::default());
        let mut ctx = M::new(0, &[2]);
        node.originate_data(&mut ctx, pkt(1, 0, 5));
        node.originate_data(&mut ctx, pkt(2, 0, 5));
        ctx.take();
        let rrep = Rrep { src: n(0), dst: n(5), dst_seq: 1, hop_count: 2, lifetime_us: 3_000_000 };
        node.handle_rrep(&mut ctx, n(2), rrep).unwrap();
        let out = ctx.take();
        assert!(matches!(out[0], Out::Cancel(_)));
        assert_eq!(&out[1..], &[Out::Data(n(2), 1), Out::Data(n(2), 2)]);
        assert_eq!(node.routes().get(n(5)).unwrap().hop_count, 3);
        assert_eq!(node.discoveries().len(), 1);
    }

    #[test]
    fn intermediate_installs_and_relays_rrep() {
        let mut node = AodvNode::new(n(2), AodvConfig::default());
        let mut ctx = M::new(2, &[0, 4]).at(1.0);
        node.handle_rreq(&mut ctx, n(0), rreq_from(0, 1, 5));
        ctx.take();
        let rrep = Rrep { src: n(0), dst: n(5), dst_seq: 1, hop_count: 1, lifetime_us: 3_000_000 };
        node.handle_rrep(&mut ctx, n(4), rrep).unwrap();
        let e = node.routes().get(n(5)).unwrap();
        assert_eq!((e.next_hop, e.hop_count), (n(4), 2));
        assert!(e.precursors.contains(&n(0)));
        assert!(matches!(&ctx.take()[0], Out::Unicast(to, ControlMessage::Rrep(r)) if *to == n(0) && r.hop_count == 2));
    }

    #[test]
    fn rrep_after_reverse_expiry_is_dropped() {
        let mut node = AodvNode::new(n(2), AodvConfig::default());
        let mut ctx = M::new(2, &[0, 4]).at(1.0);
        node.handle_rreq(&mut ctx, n(0), rreq_from(0, 1, 5));
        ctx.take();
        ctx.now = SimTime::from_secs(2.5);
        let rrep = Rrep { src: n(0), dst: n(5), dst_seq: 1, hop_count: 1, lifetime_us: 3_000_000 };
        assert_eq!(node.handle_rrep(&mut ctx, n(4), rrep), Err(AodvError::NoReversePath { node: n(2), toward: n(0) }));
        assert_eq!(ctx.take(), vec![Out::DropControl(PacketKind::Rrep)]);
    }

    #[test]
    fn link_break_poisons_and_notifies_precursors() {
        let mut node = AodvNode::new(n(4), AodvConfig::default());
        let mut r = route(5, 5, 1, 3);
        r.precursors.insert(n(2));
        node.update_route(r, SimTime::ZERO);
        let mut ctx = M::new(4, &[2]).at(3.0);
        let rerr = node.on_link_break(&mut ctx, n(5)).unwrap();
        assert_eq!(rerr.unreachable, vec![(n(5), 4)]);
        assert!(!node.routes().get(n(5)).unwrap().active);
        assert!(matches!(&ctx.take()[0], Out::Unicast(to, ControlMessage::Rerr(_)) if *to == n(2)));
        // second report of the same break is a no-op
        assert!(node.on_link_break(&mut ctx, n(5)).is_none());
        assert!(ctx.take().is_empty());
    }

    #[test]
    fn break_at_source_rediscovers_without_rerr() {
        let mut node = AodvNode::new(n(0), AodvConfig::default());
        node.add_flow(n(5), SimTime::from_secs(5.0));
        node.update_route(route(5, 2, 3, 3), SimTime::ZERO);
        let mut ctx = M::new(0, &[]).at(3.0);
        assert_eq!(node.originate_data(&mut ctx, pkt(9, 0, 5)), ForwardAction::Dropped(DropReason::LinkBreak));
        let out = ctx.take();
        assert_eq!(out[0], Out::Drop(9, DropReason::LinkBreak));
        assert!(matches!(&out[1], Out::Broadcast(ControlMessage::Rreq(r)) if r.dst_last_seq == 4));
        assert!(!out.iter().any(|o| matches!(o, Out::Unicast(_, ControlMessage::Rerr(_)))));
    }

    #[test]
    fn unused_neighbor_break_is_noop() {
        let mut node = AodvNode::new(n(0), AodvConfig::default());
        node.update_route(route(5, 2, 3, 3), SimTime::ZERO);
        let mut ctx = M::new(0, &[]);
        assert!(node.on_link_break(&mut ctx, n(7)).is_none());
        assert!(ctx.take().is_empty());
    }

    #[test]
    fn rerr_propagates_and_source_rediscovers() {
        let mut mid = AodvNode::new(n(2), AodvConfig::default());
        let mut r = route(5, 4, 2, 3);
        r.precursors.insert(n(0));
        mid.update_route(r, SimTime::ZERO);
        let mut ctx = M::new(2, &[0]);
        assert_eq!(mid.handle_rerr(&mut ctx, n(4), Rerr { unreachable: vec![(n(5), 4)] }), vec![n(5)]);
        assert!(matches!(&ctx.take()[0], Out::Unicast(to, ControlMessage::Rerr(_)) if *to == n(0)));

        let mut src = AodvNode::new(n(0), AodvConfig::default());
        src.add_flow(n(5), SimTime::from_secs(5.0));
        src.update_route(route(5, 2, 3, 3), SimTime::ZERO);
        let mut ctx = M::new(0, &[]);
        src.handle_rerr(&mut ctx, n(2), Rerr { unreachable: vec![(n(5), 4)] });
        assert!(matches!(&ctx.take()[0], Out::Broadcast(ControlMessage::Rreq(_))));

        // unknown destination: ignored
        let mut other = AodvNode::new(n(8), AodvConfig::default());
        let mut ctx = M::new(8, &[]);
        assert!(other.handle_rerr(&mut ctx, n(2), Rerr { unreachable: vec![(n(5), 4)] }).is_empty());
        assert!(ctx.take().is_empty());
    }

    #[test]
    fn hello_timeout_declares_break() {
        let mut node = AodvNode::new(n(4), AodvConfig::default());
        node.update_route(route(5, 5, 1, 3), SimTime::ZERO);
        let mut ctx = M::new(4, &[]).at(0.5);
        node.handle_message(&mut ctx, n(5), ControlMessage::Hello { src: n(5), seq: 3 });
        ctx.now = SimTime::from_secs(1.0);
        node.hello_tick(&mut ctx);
        assert!(node.routes().get(n(5)).unwrap().active);
        ctx.now = SimTime::from_secs(3.0);
        node.hello_tick(&mut ctx);
        assert!(!node.routes().get(n(5)).unwrap().active);
    }

    #[test]
    fn hello_received_changes_no_route() {
        let mut node = AodvNode::new(n(1), AodvConfig::default());
        let mut ctx = M::new(1, &[]);
        node.handle_message(&mut ctx, n(2), ControlMessage::Hello { src: n(2), seq: 9 });
        assert!(node.routes().iter().next().is_none());
    }

    #[test]
    fn idle_node_does_not_beacon() {
        let mut node = AodvNode::new(n(1), AodvConfig::default());
        let mut ctx = M::new(1, &[]);
        node.hello_tick(&mut ctx);
        let out = ctx.take();
        assert!(!out.iter().any(|o| matches!(o, Out::Broadcast(_))));
        assert!(matches!(out[0], Out::Timer(_, AodvTimer::Hello)));
    }

    #[test]
    fn routes_expire_unless_used() {
        let mut node = AodvNode::new(n(0), AodvConfig::default());
        let mut r = route(5, 2, 3, 3);
        r.expires_at = SimTime::from_secs(3.0);
        node.update_route(r, SimTime::ZERO);
        let mut ctx = M::new(0, &[2]).at(2.0);
        node.originate_data(&mut ctx, pkt(1, 0, 5));
        assert_eq!(node.routes().get(n(5)).unwrap().expires_at, SimTime::from_secs(5.0));
        assert!(node.expire_routes(SimTime::from_secs(4.0)).is_empty());
        assert_eq!(node.expire_routes(SimTime::from_secs(5.0)), vec![n(5)]);
        ctx.now = SimTime::from_secs(5.1);
        assert_eq!(node.originate_data(&mut ctx, pkt(2, 0, 5)), ForwardAction::Buffered);
    }
}
