//! Deterministic discrete-event engine.
//!
//! Events are ordered by `(fire_at, seq)` where `seq` is a monotone insertion
//! counter, so simultaneous events run in the order they were scheduled.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("cannot schedule at {at} s, clock is already at {now} s")]
    PastTime { at: SimTime, now: SimTime },
}

/// Seed for every random draw made during a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct RngSeed(pub u64);

/// Identifies a scheduled event so it can be cancelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle(u64);

#[derive(Debug)]
pub struct SimEvent<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub payload: P,
}

pub struct Engine<P> {
    now: SimTime,
    next_seq: u64,
    queue: BTreeMap<(SimTime, u64), P>,
    index: HashMap<u64, SimTime>,
    rng: ChaCha8Rng,
}

impl<P> Engine<P> {
    pub fn new(seed: RngSeed) -> Self {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BTreeMap::new(),
            index: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed.0),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn schedule(&mut self, fire_at: SimTime, payload: P) -> Result<EventHandle, EngineError> {
        if fire_at < self.now {
            return Err(EngineError::PastTime { at: fire_at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.insert((fire_at, seq), payload);
        self.index.insert(seq, fire_at);
        Ok(EventHandle(seq))
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: P) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, payload).expect("relative schedule is never in the past")
    }

    /// Returns true if the event was still pending. A cancelled event never runs.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        match self.index.remove(&handle.0) {
            Some(at) => self.queue.remove(&(at, handle.0)).is_some(),
            None => false,
        }
    }

    /// Pops the next event due at or before `t_end`, advancing the clock to it.
    pub fn pop_due(&mut self, t_end: SimTime) -> Option<SimEvent<P>> {
        let (&(fire_at, seq), _) = self.queue.first_key_value()?;
        if fire_at > t_end {
            return None;
        }
        let payload = self.queue.remove(&(fire_at, seq)).unwrap();
        self.index.remove(&seq);
        self.now = fire_at;
        Some(SimEvent { fire_at, seq, payload })
    }

    /// Moves the clock forward to `t`; no-op if `t` is in the past.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Pending events in processing order.
    pub fn pending(&self) -> impl Iterator<Item = (SimTime, &P)> {
        self.queue.iter().map(|(&(t, _), p)| (t, p))
    }

    /// Processes every event with `fire_at <= t_end` and leaves the clock at
    /// `t_end`. Returns the number of events executed.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> usize
    where
        F: FnMut(&mut Engine<P>, SimEvent<P>),
    {
        let mut steps = 0;
        while let Some(ev) = self.pop_due(t_end) {
            handler(self, ev);
            steps += 1;
        }
        self.advance_to(t_end);
        steps
    }
}
