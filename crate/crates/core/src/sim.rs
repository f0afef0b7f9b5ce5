//! Runs one routing protocol over one scenario.
//!
//! Every node's protocol state machine sees the network only through
//! [`NodeContext`]; the context implemented here turns its actions into
//! engine events (one delivery per receiver, `hop_latency` later) and ledger
//! records.

use std::fmt;
use std::marker::PhantomData;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aodv::{AodvConfig, AodvNode, AodvTimer, ControlMessage, DiscoveryRecord};
use crate::dsdv::{DsdvConfig, DsdvNode, DsdvTimer, UpdatePacket};
use crate::engine::{Engine, EventHandle, RngSeed, SimEvent};
use crate::metrics::{EventKind, Ledger, LedgerEvent};
use crate::net::NodeContext;
use crate::packet::{DataPacket, DropReason, PacketKind};
use crate::scenario::{compile, ScenarioError, ScenarioSpec, TrafficFlow};
use crate::time::SimTime;
use crate::world::{NodeId, UnicastOutcome, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Aodv,
    Dsdv,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Aodv => "aodv",
            Protocol::Dsdv => "dsdv",
        })
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aodv" => Ok(Protocol::Aodv),
            "dsdv" => Ok(Protocol::Dsdv),
            _ => Err(format!("unknown protocol `{s}` (expected aodv or dsdv)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub protocol: Protocol,
    pub seed: RngSeed,
    pub aodv: AodvConfig,
    pub dsdv: DsdvConfig,
    /// How often DSDV nodes notice neighbors appearing or disappearing.
    pub link_sense_interval: SimTime,
    /// Check every destination's next-hop graph for cycles after each event.
    pub check_loops: bool,
}

impl SimConfig {
    pub fn new(protocol: Protocol, seed: u64) -> Self {
        SimConfig {
            protocol,
            seed: RngSeed(seed),
            aodv: AodvConfig::default(),
            dsdv: DsdvConfig::default(),
            link_sense_interval: SimTime::from_secs(0.01),
            check_loops: true,
        }
    }
}

/// Data packets dropped, by cause.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropTally {
    pub link_break: u64,
    pub no_route: u64,
    pub buffer_full: u64,
    pub discovery_failed: u64,
}

impl DropTally {
    fn add(&mut self, reason: DropReason) {
        match reason {
            DropReason::LinkBreak => self.link_break += 1,
            DropReason::NoRoute => self.no_route += 1,
            DropReason::BufferFull => self.buffer_full += 1,
            DropReason::DiscoveryFailed => self.discovery_failed += 1,
        }
    }
}

/// A routing loop seen at an event boundary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopViolation {
    pub t: SimTime,
    pub dst: NodeId,
    pub cycle: Vec<NodeId>,
}

#[derive(Debug)]
pub struct SimOutcome {
    pub ledger: Ledger,
    pub end: SimTime,
    pub steps: usize,
    /// Data packets still waiting for a route when the run ended.
    pub buffered: u64,
    /// Data packets on the air when the run ended.
    pub in_flight: u64,
    pub drops: DropTally,
    /// Event boundaries at which the next-hop graphs were checked.
    pub loop_checks: u64,
    pub loop_violations: Vec<LoopViolation>,
    /// Completed AODV discoveries, by source.
    pub discoveries: Vec<(NodeId, DiscoveryRecord)>,
    /// Mean of installed hop count minus shortest-path hop count at the
    /// moment each discovery started; `None` without discoveries.
    pub route_length_excess: Option<f64>,
}

impl SimOutcome {
    pub fn unresolved(&self) -> u64 {
        self.buffered + self.in_flight
    }
}

#[derive(Clone, Debug)]
enum Frame {
    Data(DataPacket),
    Aodv(ControlMessage),
    Dsdv(UpdatePacket),
}

#[derive(Debug)]
enum Payload {
    Deliver {
        to: NodeId,
        from: NodeId,
        uid: u64,
        frame: Frame,
    },
    /// A broadcast held back by jitter; neighbors are evaluated when it fires.
    Transmit {
        node: NodeId,
        frame: Frame,
    },
    AodvTimer {
        node: NodeId,
        timer: AodvTimer,
    },
    DsdvTimer {
        node: NodeId,
        timer: DsdvTimer,
    },
    Emit {
        flow: usize,
    },
    Sense,
}

/// How a protocol's message and timer types travel through the engine.
trait Wire: Clone {
    type Timer;
    fn frame(self) -> Frame;
    fn timer(node: NodeId, timer: Self::Timer) -> Payload;
    fn kind(&self) -> PacketKind;
    fn size(&self) -> u32;
    fn endpoints(&self) -> (Option<NodeId>, Option<NodeId>);
}

impl Wire for ControlMessage {
    type Timer = AodvTimer;
    fn frame(self) -> Frame {
        Frame::Aodv(self)
    }
    fn timer(node: NodeId, timer: AodvTimer) -> Payload {
        Payload::AodvTimer { node, timer }
    }
    fn kind(&self) -> PacketKind {
        ControlMessage::kind(self)
    }
    fn size(&self) -> u32 {
        ControlMessage::size(self)
    }
    fn endpoints(&self) -> (Option<NodeId>, Option<NodeId>) {
        ControlMessage::endpoints(self)
    }
}

impl Wire for UpdatePacket {
    type Timer = DsdvTimer;
    fn frame(self) -> Frame {
        Frame::Dsdv(self)
    }
    fn timer(node: NodeId, timer: DsdvTimer) -> Payload {
        Payload::DsdvTimer { node, timer }
    }
    fn kind(&self) -> PacketKind {
        PacketKind::DsdvUpdate
    }
    fn size(&self) -> u32 {
        UpdatePacket::size(self)
    }
    fn endpoints(&self) -> (Option<NodeId>, Option<NodeId>) {
        (Some(self.origin), None)
    }
}

/// Everything a node's actions touch, apart from the nodes themselves.
struct Env {
    world: World,
    ledger: Ledger,
    next_uid: u64,
    drops: DropTally,
}

impl Env {
    fn fresh_uid(&mut self) -> u64 {
        self.next_uid += 1;
        self.next_uid
    }

    #[allow(clippy::too_many_arguments)]
    fn log(
        &mut self,
        t: SimTime,
        kind: EventKind,
        node: NodeId,
        subkind: PacketKind,
        size: u32,
        uid: u64,
        ends: (Option<NodeId>, Option<NodeId>),
    ) {
        let ev = LedgerEvent { t, kind, node, subkind, size, uid, src: ends.0, dst: ends.1 };
        self.ledger.record(ev).expect("simulator keeps the ledger consistent");
    }

    fn log_data(&mut self, t: SimTime, kind: EventKind, node: NodeId, pkt: &DataPacket) {
        self.log(t, kind, node, PacketKind::Data, pkt.size, pkt.uid, (Some(pkt.src), Some(pkt.dst)));
    }
}

struct Ctx<'a, M> {
    me: NodeId,
    /// Uid of the frame being handled, charged for control frames lost here.
    incoming: Option<u64>,
    engine: &'a mut Engine<Payload>,
    env: &'a mut Env,
    _msg: PhantomData<M>,
}

impl<'a, M: Wire> Ctx<'a, M> {
    fn new(me: NodeId, incoming: Option<u64>, engine: &'a mut Engine<Payload>, env: &'a mut Env) -> Self {
        Ctx { me, incoming, engine, env, _msg: PhantomData }
    }
}

impl<M: Wire> NodeContext for Ctx<'_, M> {
    type Msg = M;
    type Timer = M::Timer;

    fn me(&self) -> NodeId {
        self.me
    }

    fn now(&self) -> SimTime {
        self.engine.now()
    }

    fn broadcast(&mut self, msg: M) {
        let uid = self.env.fresh_uid();
        let now = self.now();
        self.env.log(now, EventKind::ControlTx, self.me, msg.kind(), msg.size(), uid, msg.endpoints());
        let me = self.me;
        let frame = msg.frame();
        self.env
            .world
            .broadcast(self.engine, me, |to| Payload::Deliver { to, from: me, uid, frame: frame.clone() })
            .expect("known node");
    }

    fn broadcast_after(&mut self, delay: SimTime, msg: M) {
        if delay == SimTime::ZERO {
            self.broadcast(msg);
        } else {
            self.engine.schedule_in(delay, Payload::Transmit { node: self.me, frame: msg.frame() });
        }
    }

    fn unicast(&mut self, next: NodeId, msg: M) -> bool {
        let me = self.me;
        let uid = self.env.next_uid + 1;
        let (kind, size, ends) = (msg.kind(), msg.size(), msg.endpoints());
        let frame = msg.frame();
        let outcome = self
            .env
            .world
            .unicast(self.engine, me, next, || Payload::Deliver { to: next, from: me, uid, frame })
            .expect("known node");
        match outcome {
            UnicastOutcome::Sent(_) => {
                self.env.fresh_uid();
                let now = self.now();
                self.env.log(now, EventKind::ControlTx, me, kind, size, uid, ends);
                true
            }
            UnicastOutcome::LinkBreak => false,
        }
    }

    fn send_data(&mut self, next: NodeId, pkt: DataPacket) -> Result<(), DataPacket> {
        let me = self.me;
        let (uid, size, ends) = (pkt.uid, pkt.size, (Some(pkt.src), Some(pkt.dst)));
        let mut slot = Some(pkt);
        let outcome = self
            .env
            .world
            .unicast(self.engine, me, next, || Payload::Deliver {
                to: next,
                from: me,
                uid,
                frame: Frame::Data(slot.take().expect("called once")),
            })
            .expect("known node");
        match outcome {
            UnicastOutcome::Sent(_) => {
                let now = self.now();
                self.env.log(now, EventKind::DataTx, me, PacketKind::Data, size, uid, ends);
                Ok(())
            }
            UnicastOutcome::LinkBreak => Err(slot.take().expect("not consumed on a link break")),
        }
    }

    fn deliver(&mut self, pkt: DataPacket) {
        let now = self.now();
        self.env.log_data(now, EventKind::Received, self.me, &pkt);
    }

    fn drop_data(&mut self, pkt: DataPacket, reason: DropReason) {
        let now = self.now();
        self.env.drops.add(reason);
        self.env.log_data(now, EventKind::Dropped, self.me, &pkt);
    }

    fn drop_control(&mut self, kind: PacketKind) {
        let uid = match self.incoming {
            Some(uid) => uid,
            None => self.env.fresh_uid(),
        };
        let now = self.now();
        self.env.log(now, EventKind::Dropped, self.me, kind, 0, uid, (None, None));
    }

    fn set_timer(&mut self, at: SimTime, timer: M::Timer) -> EventHandle {
        self.engine.schedule(at, M::timer(self.me, timer)).expect("timers are set in the future")
    }

    fn cancel_timer(&mut self, handle: EventHandle) -> bool {
        self.engine.cancel(handle)
    }

    fn random_delay(&mut self, max: SimTime) -> SimTime {
        match max.as_micros() {
            0 => SimTime::ZERO,
            m => SimTime::from_micros(self.engine.rng().gen_range(0..m)),
        }
    }
}

enum Nodes {
    Aodv(Vec<AodvNode>),
    Dsdv(Vec<DsdvNode>),
}

pub struct Simulator {
    engine: Engine<Payload>,
    env: Env,
    nodes: Nodes,
    flows: Vec<TrafficFlow>,
    end: SimTime,
    config: SimConfig,
    loop_checks: u64,
    violations: Vec<LoopViolation>,
}

/// Violations kept in full; later ones are only counted in `loop_checks`.
const MAX_RECORDED_VIOLATIONS: usize = 64;

impl Simulator {
    pub fn new(spec: &ScenarioSpec, config: &SimConfig) -> Result<Self, ScenarioError> {
        let batch = compile(spec)?;
        let world = spec.world();
        let mut engine = Engine::new(config.seed);
        let ids: Vec<NodeId> = world.nodes().collect();

        let nodes = match config.protocol {
            Protocol::Aodv => {
                let mut nodes: Vec<AodvNode> = ids.iter().map(|&id| AodvNode::new(id, config.aodv.clone())).collect();
                for f in &spec.flows {
                    nodes[f.src.index()].add_flow(f.dst, f.stop);
                }
                if let Some(interval) = config.aodv.hello_interval {
                    for &id in &ids {
                        let phase = random_phase(&mut engine, interval);
                        engine.schedule(phase, Payload::AodvTimer { node: id, timer: AodvTimer::Hello }).unwrap();
                    }
                }
                Nodes::Aodv(nodes)
            }
            Protocol::Dsdv => {
                let links = world.connectivity(SimTime::ZERO);
                let mut nodes: Vec<DsdvNode> = ids.iter().map(|&id| DsdvNode::new(id, config.dsdv.clone())).collect();
                for (node, neighbors) in nodes.iter_mut().zip(links) {
                    node.set_neighbors(neighbors);
                }
                for &id in &ids {
                    let phase = random_phase(&mut engine, config.dsdv.update_interval);
                    engine.schedule(phase, Payload::DsdvTimer { node: id, timer: DsdvTimer::Dump }).unwrap();
                }
                if config.link_sense_interval > SimTime::ZERO {
                    engine.schedule(config.link_sense_interval, Payload::Sense).unwrap();
                }
                Nodes::Dsdv(nodes)
            }
        };
        for e in &batch.emissions {
            engine.schedule(e.at, Payload::Emit { flow: e.flow }).unwrap();
        }

        Ok(Simulator {
            engine,
            env: Env { world, ledger: Ledger::new(), next_uid: 0, drops: DropTally::default() },
            nodes,
            flows: spec.flows.clone(),
            end: batch.end,
            config: config.clone(),
            loop_checks: 0,
            violations: Vec::new(),
        })
    }

    pub fn run(mut self) -> SimOutcome {
        let end = self.end;
        let mut steps = 0;
        if self.config.check_loops {
            self.check_loops();
        }
        while let Some(ev) = self.engine.pop_due(end) {
            self.dispatch(ev);
            steps += 1;
            if self.config.check_loops {
                self.check_loops();
            }
        }
        self.engine.advance_to(end);
        self.finish(steps)
    }

    fn dispatch(&mut self, ev: SimEvent<Payload>) {
        let engine = &mut self.engine;
        let env = &mut self.env;
        match (ev.payload, &mut self.nodes) {
            (Payload::Deliver { to, from, uid, frame }, Nodes::Aodv(nodes)) => {
                let mut ctx = Ctx::<ControlMessage>::new(to, Some(uid), engine, env);
                let node = &mut nodes[to.index()];
                match frame {
                    Frame::Data(pkt) => {
                        node.handle_data(&mut ctx, from, pkt);
                    }
                    Frame::Aodv(msg) => node.handle_message(&mut ctx, from, msg),
                    Frame::Dsdv(_) => unreachable!("DSDV frame in an AODV run"),
                }
            }
            (Payload::Deliver { to, from, uid, frame }, Nodes::Dsdv(nodes)) => {
                let mut ctx = Ctx::<UpdatePacket>::new(to, Some(uid), engine, env);
                let node = &mut nodes[to.index()];
                match frame {
                    Frame::Data(pkt) => {
                        node.handle_data(&mut ctx, pkt);
                    }
                    Frame::Dsdv(update) => {
                        node.handle_update(&mut ctx, from, update);
                    }
                    Frame::Aodv(_) => unreachable!("AODV frame in a DSDV run"),
                }
            }
            (Payload::Transmit { node, frame: Frame::Aodv(msg) }, Nodes::Aodv(_)) => {
                Ctx::<ControlMessage>::new(node, None, engine, env).broadcast(msg);
            }
            (Payload::Transmit { node, frame: Frame::Dsdv(update) }, Nodes::Dsdv(_)) => {
                Ctx::<UpdatePacket>::new(node, None, engine, env).broadcast(update);
            }
            (Payload::Transmit { .. }, _) => unreachable!("delayed frame of the wrong protocol"),
            (Payload::AodvTimer { node, timer }, Nodes::Aodv(nodes)) => {
                let mut ctx = Ctx::<ControlMessage>::new(node, None, engine, env);
                nodes[node.index()].on_timer(&mut ctx, timer);
            }
            (Payload::DsdvTimer { node, timer }, Nodes::Dsdv(nodes)) => {
                let mut ctx = Ctx::<UpdatePacket>::new(node, None, engine, env);
                nodes[node.index()].on_timer(&mut ctx, timer);
            }
            (Payload::AodvTimer { .. } | Payload::DsdvTimer { .. }, _) => unreachable!("timer of the wrong protocol"),
            (Payload::Emit { flow }, nodes) => {
                let f = &self.flows[flow];
                let pkt = DataPacket {
                    uid: env.fresh_uid(),
                    src: f.src,
                    dst: f.dst,
                    size: f.packet_size,
                    created_at: engine.now(),
                };
                env.log_data(engine.now(), EventKind::Sent, f.src, &pkt);
                match nodes {
                    Nodes::Aodv(nodes) => {
                        let mut ctx = Ctx::<ControlMessage>::new(f.src, None, engine, env);
                        nodes[f.src.index()].originate_data(&mut ctx, pkt);
                    }
                    Nodes::Dsdv(nodes) => {
                        let mut ctx = Ctx::<UpdatePacket>::new(f.src, None, engine, env);
                        nodes[f.src.index()].forward_data(&mut ctx, pkt);
                    }
                }
            }
            (Payload::Sense, Nodes::Dsdv(nodes)) => {
                let now = engine.now();
                let links = env.world.connectivity(now);
                for (i, node) in nodes.iter_mut().enumerate() {
                    let me = NodeId(i as u16);
                    let mut ctx = Ctx::<UpdatePacket>::new(me, None, engine, env);
                    for other in (0..links.len() as u16).map(NodeId).filter(|&o| o != me) {
                        if links[i].contains(&other) {
                            node.link_up(&mut ctx, other);
                        } else {
                            node.link_down(&mut ctx, other);
                        }
                    }
                }
                let next = now + self.config.link_sense_interval;
                if next <= self.end {
                    engine.schedule(next, Payload::Sense).unwrap();
                }
            }
            (Payload::Sense, Nodes::Aodv(_)) => {}
        }
    }

    /// Next hop of every node toward `dst`, where one is in use.
    fn next_hops(&self, dst: NodeId) -> Vec<Option<NodeId>> {
        let now = self.engine.now();
        match &self.nodes {
            Nodes::Aodv(nodes) => nodes
                .iter()
                .map(|n| (n.id() != dst).then(|| n.routes().usable(dst, now).map(|e| e.next_hop)).flatten())
                .collect(),
            Nodes::Dsdv(nodes) => nodes
                .iter()
                .map(|n| {
                    (n.id() != dst).then(|| n.entry(dst).filter(|e| e.is_reachable()).map(|e| e.next_hop)).flatten()
                })
                .collect(),
        }
    }

    fn check_loops(&mut self) {
        self.loop_checks += 1;
        let n = self.env.world.node_count();
        for dst in (0..n as u16).map(NodeId) {
            if let Some(cycle) = find_cycle(&self.next_hops(dst)) {
                if self.violations.len() < MAX_RECORDED_VIOLATIONS {
                    self.violations.push(LoopViolation { t: self.engine.now(), dst, cycle });
                }
            }
        }
    }

    fn finish(self, steps: usize) -> SimOutcome {
        let in_flight =
            self.engine.pending().filter(|(_, p)| matches!(p, Payload::Deliver { frame: Frame::Data(_), .. })).count()
                as u64;
        let (buffered, discoveries) = match &self.nodes {
            Nodes::Aodv(nodes) => (
                nodes.iter().map(|n| n.buffered_packets() as u64).sum(),
                nodes.iter().flat_map(|n| n.discoveries().iter().map(|d| (n.id(), d.clone()))).collect(),
            ),
            Nodes::Dsdv(_) => (0, Vec::new()),
        };
        let world = &self.env.world;
        let excess: Vec<f64> = discoveries
            .iter()
            .filter_map(|(src, d): &(NodeId, DiscoveryRecord)| {
                world.hop_distance(*src, d.dst, d.started_at).map(|best| d.hop_count as f64 - best as f64)
            })
            .collect();
        let route_length_excess = (!excess.is_empty()).then(|| excess.iter().sum::<f64>() / excess.len() as f64);
        SimOutcome {
            ledger: self.env.ledger,
            end: self.end,
            steps,
            buffered,
            in_flight,
            drops: self.env.drops,
            loop_checks: self.loop_checks,
            loop_violations: self.violations,
            discoveries,
            route_length_excess,
        }
    }
}

fn random_phase(engine: &mut Engine<Payload>, interval: SimTime) -> SimTime {
    match interval.as_micros() {
        0 => SimTime::ZERO,
        m => SimTime::from_micros(engine.rng().gen_range(0..m)),
    }
}

/// A cycle in a functional graph given as `next[i]`, if any.
fn find_cycle(next: &[Option<NodeId>]) -> Option<Vec<NodeId>> {
    // 0 = unvisited, 1 = on the current walk, 2 = known to end without a cycle
    let mut state = vec![0u8; next.len()];
    for start in 0..next.len() {
        let mut walk = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            match state.get(i) {
                None | Some(2) => break,
                Some(1) => {
                    let at = walk.iter().position(|&w| w == i).unwrap();
                    return Some(walk[at..].iter().map(|&w| NodeId(w as u16)).collect());
                }
                _ => {}
            }
            state[i] = 1;
            walk.push(i);
            cur = next[i].map(NodeId::index);
        }
        for w in walk {
            state[w] = 2;
        }
    }
    None
}

/// Builds and runs a simulation in one call.
pub fn simulate(spec: &ScenarioSpec, config: &SimConfig) -> Result<SimOutcome, ScenarioError> {
    Ok(Simulator::new(spec, config)?.run())
}
