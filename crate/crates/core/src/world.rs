//! Node placement, waypoint mobility and unit-disk radio connectivity.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Engine, EventHandle};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u16);

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

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub fn contains(&self, p: &Position) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioModel {
    /// Transmission radius in meters; the boundary is inclusive.
    pub range: f64,
    /// Time for one link traversal.
    pub hop_latency: SimTime,
}

impl Default for RadioModel {
    fn default() -> Self {
        RadioModel { range: 250.0, hop_latency: SimTime::from_micros(1_000) }
    }
}

/// One straight-line movement: starting at `start_time` the node heads for
/// `dest` at `speed` m/s and then holds position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaypointLeg {
    pub node: NodeId,
    pub start_time: SimTime,
    pub dest: Position,
    pub speed: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("leg for node {node} starting at {start} s overlaps an existing leg")]
    OverlappingLeg { node: NodeId, start: SimTime },
    #[error("leg for node {node} starts at {start} s, before the current time {now} s")]
    LegInPast { node: NodeId, start: SimTime, now: SimTime },
    #[error("leg for node {0} has non-positive or non-finite speed")]
    BadSpeed(NodeId),
}

#[derive(Clone, Debug)]
struct ResolvedLeg {
    start: SimTime,
    origin: Position,
    dest: Position,
    end: f64,
}

impl ResolvedLeg {
    fn position_at(&self, t: f64) -> Position {
        let start = self.start.as_secs();
        if t <= start {
            return self.origin;
        }
        if t >= self.end {
            return self.dest;
        }
        let f = (t - start) / (self.end - start);
        Position::new(
            self.origin.x + (self.dest.x - self.origin.x) * f,
            self.origin.y + (self.dest.y - self.origin.y) * f,
        )
    }
}

#[derive(Clone, Debug)]
struct Track {
    initial: Position,
    legs: Vec<WaypointLeg>,
    resolved: Vec<ResolvedLeg>,
}

impl Track {
    fn resolve(initial: Position, legs: &[WaypointLeg]) -> Result<Vec<ResolvedLeg>, WorldError> {
        let mut out: Vec<ResolvedLeg> = Vec::with_capacity(legs.len());
        let mut here = initial;
        for leg in legs {
            if let Some(prev) = out.last() {
                if leg.start_time.as_secs() < prev.end {
                    return Err(WorldError::OverlappingLeg { node: leg.node, start: leg.start_time });
                }
            }
            let start = leg.start_time.as_secs();
            let end = start + here.distance(&leg.dest) / leg.speed;
            out.push(ResolvedLeg { start: leg.start_time, origin: here, dest: leg.dest, end });
            here = leg.dest;
        }
        Ok(out)
    }

    fn position_at(&self, t: f64) -> Position {
        // last leg that has started; before it the node rests at the previous destination
        match self.resolved.iter().rev().find(|l| l.start.as_secs() <= t) {
            Some(leg) => leg.position_at(t),
            None => self.initial,
        }
    }
}

/// Outcome of a unicast attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnicastOutcome {
    Sent(EventHandle),
    LinkBreak,
}

#[derive(Clone, Debug)]
pub struct World {
    area: Area,
    radio: RadioModel,
    tracks: Vec<Track>,
}

impl World {
    pub fn new(area: Area, radio: RadioModel, initial: &[Position]) -> Self {
        let tracks = initial.iter().map(|&p| Track { initial: p, legs: Vec::new(), resolved: Vec::new() }).collect();
        World { area, radio, tracks }
    }

    pub fn area(&self) -> Area {
        self.area
    }

    pub fn radio(&self) -> RadioModel {
        self.radio
    }

    pub fn node_count(&self) -> usize {
        self.tracks.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.tracks.len() as u16).map(NodeId)
    }

    fn track(&self, node: NodeId) -> Result<&Track, WorldError> {
        self.tracks.get(node.index()).ok_or(WorldError::UnknownNode(node))
    }

    pub fn position_at(&self, node: NodeId, t: SimTime) -> Result<Position, WorldError> {
        Ok(self.track(node)?.position_at(t.as_secs()))
    }

    pub fn in_range(&self, a: NodeId, b: NodeId, t: SimTime) -> Result<bool, WorldError> {
        let pa = self.position_at(a, t)?;
        let pb = self.position_at(b, t)?;
        Ok(pa.distance(&pb) <= self.radio.range)
    }

    /// All nodes other than `node` within range at `t`, ascending by id.
    pub fn neighbors(&self, node: NodeId, t: SimTime) -> Result<Vec<NodeId>, WorldError> {
        let here = self.position_at(node, t)?;
        Ok(self
            .nodes()
            .filter(|&n| n != node)
            .filter(|&n| self.tracks[n.index()].position_at(t.as_secs()).distance(&here) <= self.radio.range)
            .collect())
    }

    /// Adjacency lists of the unit-disk graph at `t`.
    pub fn connectivity(&self, t: SimTime) -> Vec<Vec<NodeId>> {
        self.nodes().map(|n| self.neighbors(n, t).expect("own node")).collect()
    }

    /// Fewest hops from `src` to `dst` in the graph at `t`; `None` if they
    /// are disconnected.
    pub fn hop_distance(&self, src: NodeId, dst: NodeId, t: SimTime) -> Option<u32> {
        let adj = self.connectivity(t);
        let mut dist = vec![None; adj.len()];
        *dist.get_mut(src.index())? = Some(0u32);
        let mut queue = VecDeque::from([src]);
        while let Some(n) = queue.pop_front() {
            let d = dist[n.index()].unwrap();
            if n == dst {
                return Some(d);
            }
            for &m in &adj[n.index()] {
                if dist[m.index()].is_none() {
                    dist[m.index()] = Some(d + 1);
                    queue.push_back(m);
                }
            }
        }
        None
    }

    /// Highest speed of any registered leg (zero if nobody moves).
    pub fn max_speed(&self) -> f64 {
        self.tracks.iter().flat_map(|t| t.legs.iter().map(|l| l.speed)).fold(0.0, f64::max)
    }

    pub fn legs(&self) -> impl Iterator<Item = &WaypointLeg> {
        self.tracks.iter().flat_map(|t| t.legs.iter())
    }

    /// Registers a movement leg. `now` is the current simulation time.
    pub fn apply_movement(&mut self, leg: WaypointLeg, now: SimTime) -> Result<(), WorldError> {
        if leg.start_time < now {
            return Err(WorldError::LegInPast { node: leg.node, start: leg.start_time, now });
        }
        if !(leg.speed.is_finite() && leg.speed > 0.0) {
            return Err(WorldError::BadSpeed(leg.node));
        }
        let track = self.tracks.get_mut(leg.node.index()).ok_or(WorldError::UnknownNode(leg.node))?;
        let mut legs = track.legs.clone();
        let at = legs.partition_point(|l| l.start_time <= leg.start_time);
        legs.insert(at, leg);
        track.resolved = Track::resolve(track.initial, &legs)?;
        track.legs = legs;
        Ok(())
    }

    /// Schedules one delivery per in-range neighbor at `now + hop_latency`.
    /// Returns the receivers; an isolated sender yields an empty list.
    pub fn broadcast<P, F>(
        &self,
        engine: &mut Engine<P>,
        sender: NodeId,
        mut make: F,
    ) -> Result<Vec<NodeId>, WorldError>
    where
        F: FnMut(NodeId) -> P,
    {
        let receivers = self.neighbors(sender, engine.now())?;
        for &r in &receivers {
            engine.schedule_in(self.radio.hop_latency, make(r));
        }
        Ok(receivers)
    }

    /// Schedules delivery to `next` if it is in range now; `make` is only
    /// invoked on success so the caller keeps the payload on a link break.
    pub fn unicast<P, F>(
        &self,
        engine: &mut Engine<P>,
        sender: NodeId,
        next: NodeId,
        make: F,
    ) -> Result<UnicastOutcome, WorldError>
    where
        F: FnOnce() -> P,
    {
        if self.in_range(sender, next, engine.now())? {
            Ok(UnicastOutcome::Sent(engine.schedule_in(self.radio.hop_latency, make())))
        } else {
            Ok(UnicastOutcome::LinkBreak)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RngSeed;
    use proptest::prelude::*;

    fn secs(s: f64) -> SimTime {
        SimTime::from_secs(s)
    }

    fn area() -> Area {
        Area { width: 800.0, height: 800.0 }
    }

    fn leg(node: u16, start: f64, x: f64, y: f64, speed: f64) -> WaypointLeg {
        WaypointLeg { node: NodeId(node), start_time: secs(start), dest: Position::new(x, y), speed }
    }

    #[test]
    fn stationary_node_keeps_initial_position() {
        let w = World::new(area(), RadioModel::default(), &[Position::new(10.0, 20.0)]);
        assert_eq!(w.position_at(NodeId(0), secs(4.2)).unwrap(), Position::new(10.0, 20.0));
    }

    #[test]
    fn linear_motion_and_clamp() {
        let mut w = World::new(area(), RadioModel::default(), &[Position::new(0.0, 0.0)]);
        w.apply_movement(leg(0, 1.0, 100.0, 0.0, 50.0), SimTime::ZERO).unwrap();
        assert_eq!(w.position_at(NodeId(0), secs(0.5)).unwrap(), Position::new(0.0, 0.0));
        assert_eq!(w.position_at(NodeId(0), secs(2.0)).unwrap(), Position::new(50.0, 0.0));
        assert_eq!(w.position_at(NodeId(0), secs(7.0)).unwrap(), Position::new(100.0, 0.0));
    }

    #[test]
    fn overlapping_leg_rejected() {
        let mut w = World::new(area(), RadioModel::default(), &[Position::new(0.0, 0.0)]);
        w.apply_movement(leg(0, 1.0, 100.0, 0.0, 50.0), SimTime::ZERO).unwrap();
        let err = w.apply_movement(leg(0, 2.0, 0.0, 100.0, 10.0), SimTime::ZERO).unwrap_err();
        assert!(matches!(err, WorldError::OverlappingLeg { .. }));
        // the rejected leg leaves the track untouched
        assert_eq!(w.position_at(NodeId(0), secs(3.0)).unwrap(), Position::new(100.0, 0.0));
        w.apply_movement(leg(0, 3.0, 100.0, 100.0, 10.0), SimTime::ZERO).unwrap();
        assert_eq!(w.position_at(NodeId(0), secs(8.0)).unwrap(), Position::new(100.0, 50.0));
    }

    #[test]
    fn leg_errors() {
        let mut w = World::new(area(), RadioModel::default(), &[Position::new(0.0, 0.0)]);
        assert_eq!(
            w.apply_movement(leg(3, 1.0, 1.0, 1.0, 1.0), SimTime::ZERO),
            Err(WorldError::UnknownNode(NodeId(3)))
        );
        assert_eq!(w.apply_movement(leg(0, 1.0, 1.0, 1.0, 0.0), SimTime::ZERO), Err(WorldError::BadSpeed(NodeId(0))));
        assert!(matches!(w.apply_movement(leg(0, 1.0, 1.0, 1.0, 1.0), secs(2.0)), Err(WorldError::LegInPast { .. })));
        assert_eq!(w.position_at(NodeId(9), SimTime::ZERO), Err(WorldError::UnknownNode(NodeId(9))));
    }

    #[test]
    fn range_boundary_is_inclusive() {
        let w = World::new(
            area(),
            RadioModel::default(),
            &[Position::new(0.0, 0.0), Position::new(250.0, 0.0), Position::new(0.0, 0.0), Position::new(500.0, 0.0)],
        );
        assert!(w.in_range(NodeId(0), NodeId(1), SimTime::ZERO).unwrap());
        assert!(w.in_range(NodeId(0), NodeId(2), SimTime::ZERO).unwrap());
        assert!(!w.in_range(NodeId(0), NodeId(3), SimTime::ZERO).unwrap());
    }

    #[test]
    fn broadcast_and_unicast_delivery() {
        let w = World::new(
            area(),
            RadioModel::default(),
            &[
                Position::new(0.0, 0.0),
                Position::new(100.0, 0.0),
                Position::new(200.0, 0.0),
                Position::new(700.0, 700.0),
            ],
        );
        let mut e: Engine<NodeId> = Engine::new(RngSeed(1));
        let got = w.broadcast(&mut e, NodeId(0), |r| r).unwrap();
        assert_eq!(got, vec![NodeId(1), NodeId(2)]);
        assert_eq!(e.len(), 2);
        assert!(e.pending().all(|(t, _)| t == secs(0.001)));
        assert!(w.broadcast(&mut e, NodeId(3), |r| r).unwrap().is_empty());

        assert!(matches!(w.unicast(&mut e, NodeId(0), NodeId(2), || NodeId(2)).unwrap(), UnicastOutcome::Sent(_)));
        let mut called = false;
        let out = w
            .unicast(&mut e, NodeId(0), NodeId(3), || {
                called = true;
                NodeId(3)
            })
            .unwrap();
        assert_eq!(out, UnicastOutcome::LinkBreak);
        assert!(!called);
    }

    fn arb_world() -> impl Strategy<Value = World> {
        let pos = (0.0..800.0f64, 0.0..800.0f64).prop_map(|(x, y)| Position::new(x, y));
        let mover = (0.0..4.0f64, 0.0..800.0f64, 0.0..800.0f64, 1.0..80.0f64);
        (prop::collection::vec(pos, 2..10), prop::collection::vec(mover, 0..6)).prop_map(|(ps, moves)| {
            let n = ps.len() as u16;
            let mut w = World::new(area(), RadioModel::default(), &ps);
            for (i, (t, x, y, v)) in moves.into_iter().enumerate() {
                let _ = w.apply_movement(leg(i as u16 % n, t, x, y, v), SimTime::ZERO);
            }
            w
        })
    }

    proptest! {
        #[test]
        fn connectivity_is_symmetric_unit_disk(w in arb_world(), t in 0.0..6.0f64) {
            let t = secs(t);
            let adj = w.connectivity(t);
            for a in w.nodes() {
                prop_assert!(!adj[a.index()].contains(&a));
                for b in w.nodes().filter(|&b| b != a) {
                    let d = w.position_at(a, t).unwrap().distance(&w.position_at(b, t).unwrap());
                    prop_assert_eq!(adj[a.index()].contains(&b), d <= 250.0);
                    prop_assert_eq!(w.in_range(a, b, t).unwrap(), w.in_range(b, a, t).unwrap());
                }
            }
        }

        #[test]
        fn movement_never_teleports(w in arb_world(), t1 in 0.0..6.0f64, dt in 0.0..3.0f64) {
            let vmax = w.max_speed();
            for n in w.nodes() {
                let a = w.position_at(n, secs(t1)).unwrap();
                let b = w.position_at(n, secs(t1 + dt)).unwrap();
                let span = secs(t1 + dt).as_secs() - secs(t1).as_secs();
                prop_assert!(a.distance(&b) <= vmax * span + 1e-6);
            }
        }
    }
}
