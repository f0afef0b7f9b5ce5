use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::packet::PacketKind;
use crate::time::SimTime;
use crate::world::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    /// A data packet was generated at its source.
    Sent,
    /// A data packet reached its destination.
    Received,
    Dropped,
    /// One transmission of a control frame (a broadcast counts once).
    ControlTx,
    /// One hop-by-hop transmission of a data packet.
    DataTx,
}

impl EventKind {
    pub fn letter(self) -> char {
        match self {
            EventKind::Sent => 's',
            EventKind::Received => 'r',
            EventKind::Dropped => 'd',
            EventKind::ControlTx => 'c',
            EventKind::DataTx => 'f',
        }
    }

    pub fn from_letter(c: &str) -> Option<Self> {
        Some(match c {
            "s" => EventKind::Sent,
            "r" => EventKind::Received,
            "d" => EventKind::Dropped,
            "c" => EventKind::ControlTx,
            "f" => EventKind::DataTx,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub t: SimTime,
    pub kind: EventKind,
    pub node: NodeId,
    pub subkind: PacketKind,
    pub size: u32,
    pub uid: u64,
    pub src: Option<NodeId>,
    pub dst: Option<NodeId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("event at {t} s recorded after an event at {last} s")]
    OutOfOrder { t: SimTime, last: SimTime },
    #[error("packet {uid} was never sent")]
    UnknownPacket { uid: u64 },
    #[error("packet {uid} was sent twice")]
    DuplicatePacket { uid: u64 },
    #[error("packet {uid} was already received or dropped")]
    AlreadyResolved { uid: u64 },
    #[error("{kind:?} event cannot carry a {subkind} frame")]
    KindMismatch { kind: EventKind, subkind: PacketKind },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("trace line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

/// Append-only record of everything measurable that happened in a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ledger {
    events: Vec<LedgerEvent>,
    /// Data uid -> resolved (received or dropped).
    packets: BTreeMap<u64, bool>,
    received: u64,
    dropped: u64,
    data_tx: u64,
    control: BTreeMap<PacketKind, u64>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, ev: LedgerEvent) -> Result<(), LedgerError> {
        if let Some(last) = self.events.last() {
            if ev.t < last.t {
                return Err(LedgerError::OutOfOrder { t: ev.t, last: last.t });
            }
        }
        let is_data = ev.subkind == PacketKind::Data;
        let mismatch = match ev.kind {
            EventKind::Sent | EventKind::Received | EventKind::DataTx => !is_data,
            EventKind::ControlTx => is_data,
            EventKind::Dropped => false,
        };
        if mismatch {
            return Err(LedgerError::KindMismatch { kind: ev.kind, subkind: ev.subkind });
        }
        let uid = ev.uid;
        match ev.kind {
            EventKind::Sent => {
                if self.packets.contains_key(&uid) {
                    return Err(LedgerError::DuplicatePacket { uid });
                }
                self.packets.insert(uid, false);
            }
            EventKind::Received | EventKind::Dropped | EventKind::DataTx if is_data => {
                match self.packets.get_mut(&uid) {
                    None => return Err(LedgerError::UnknownPacket { uid }),
                    Some(true) => return Err(LedgerError::AlreadyResolved { uid }),
                    Some(resolved) => {
                        if ev.kind != EventKind::DataTx {
                            *resolved = true;
                        }
                    }
                }
                match ev.kind {
                    EventKind::Received => self.received += 1,
                    EventKind::Dropped => self.dropped += 1,
                    _ => self.data_tx += 1,
                }
            }
            EventKind::ControlTx => *self.control.entry(ev.subkind).or_default() += 1,
            // Lost control frames are logged but not counted.
            _ => {}
        }
        self.events.push(ev);
        Ok(())
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn sent(&self) -> u64 {
        self.packets.len() as u64
    }

    pub fn received(&self) -> u64 {
        self.received
    }

    /// Data packets dropped; lost control frames are not included.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn data_transmissions(&self) -> u64 {
        self.data_tx
    }

    pub fn control_transmissions(&self, kind: PacketKind) -> u64 {
        self.control.get(&kind).copied().unwrap_or(0)
    }

    pub fn control_total(&self) -> u64 {
        self.control.values().sum()
    }

    /// Sent packets that were neither received nor dropped.
    pub fn unresolved(&self) -> impl Iterator<Item = u64> + '_ {
        self.packets.iter().filter(|(_, &r)| !r).map(|(&u, _)| u)
    }

    /// One line per event, in recording order.
    pub fn to_trace(&self) -> String {
        let mut out = String::with_capacity(self.events.len() * 40);
        for e in &self.events {
            let id = |n: Option<NodeId>| n.map_or_else(|| "-".to_string(), |n| n.to_string());
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {}",
                e.kind.letter(),
                e.t,
                e.node,
                e.subkind,
                e.size,
                e.uid,
                id(e.src),
                id(e.dst)
            );
        }
        out
    }

    /// Rebuilds a ledger from its trace, re-checking consistency.
    pub fn from_trace(text: &str) -> Result<Ledger, TraceError> {
        let mut ledger = Ledger::new();
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| TraceError { line: i + 1, message };
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(' ').collect();
            if f.len() != 8 {
                return Err(err(format!("expected 8 fields, found {}", f.len())));
            }
            let kind = EventKind::from_letter(f[0]).ok_or_else(|| err(format!("unknown event kind `{}`", f[0])))?;
            let t = parse_time(f[1]).ok_or_else(|| err(format!("bad time `{}`", f[1])))?;
            let node = |s: &str| s.parse::<u16>().map(NodeId).map_err(|_| err(format!("bad node `{s}`")));
            let opt_node = |s: &str| if s == "-" { Ok(None) } else { node(s).map(Some) };
            let ev = LedgerEvent {
                t,
                kind,
                node: node(f[2])?,
                subkind: f[3].parse().map_err(err)?,
                size: f[4].parse().map_err(|_| err(format!("bad size `{}`", f[4])))?,
                uid: f[5].parse().map_err(|_| err(format!("bad uid `{}`", f[5])))?,
                src: opt_node(f[6])?,
                dst: opt_node(f[7])?,
            };
            ledger.record(ev).map_err(|e| err(e.to_string()))?;
        }
        Ok(ledger)
    }
}

/// Parses the fixed `<secs>.<micros>` form written by `SimTime`'s Display.
fn parse_time(s: &str) -> Option<SimTime> {
    let (secs, frac) = s.split_once('.')?;
    if frac.len() != 6 || !frac.bytes().all(|b| b.is_ascii_digit()) || !secs.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let secs: u64 = secs.parse().ok()?;
    let micros: u64 = frac.parse().ok()?;
    Some(SimTime::from_micros(secs.checked_mul(1_000_000)?.checked_add(micros)?))
}
