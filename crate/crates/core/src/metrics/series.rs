use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ledger::{EventKind, Ledger};
use super::MetricsError;
use crate::packet::PacketKind;
use crate::time::SimTime;
use crate::world::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: SimTime,
    pub value: f64,
}

impl SeriesPoint {
    pub fn new(t: SimTime, value: f64) -> Self {
        SeriesPoint { t, value }
    }
}

/// One data packet that reached its destination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub uid: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub size: u32,
    pub sent_at: SimTime,
    pub received_at: SimTime,
    /// Every node that transmitted the packet, source first, then the receiver.
    pub path: Vec<NodeId>,
}

impl Delivery {
    pub fn hops(&self) -> usize {
        self.path.len() - 1
    }

    pub fn delay(&self) -> SimTime {
        self.received_at - self.sent_at
    }
}

/// Delivered packets in order of arrival.
pub fn deliveries(ledger: &Ledger) -> Vec<Delivery> {
    let mut sent: HashMap<u64, SimTime> = HashMap::new();
    let mut hops: HashMap<u64, Vec<NodeId>> = HashMap::new();
    let mut out = Vec::new();
    for e in ledger.events().iter().filter(|e| e.subkind == PacketKind::Data) {
        match e.kind {
            EventKind::Sent => {
                sent.insert(e.uid, e.t);
            }
            EventKind::DataTx => hops.entry(e.uid).or_default().push(e.node),
            EventKind::Received => {
                let mut path = hops.remove(&e.uid).unwrap_or_default();
                path.push(e.node);
                out.push(Delivery {
                    uid: e.uid,
                    src: e.src.unwrap_or(path[0]),
                    dst: e.node,
                    size: e.size,
                    sent_at: sent[&e.uid],
                    received_at: e.t,
                    path,
                });
            }
            _ => {}
        }
    }
    out
}

/// Received over sent; 1.0 when nothing was sent.
pub fn delivery_ratio(ledger: &Ledger) -> f64 {
    match ledger.sent() {
        0 => 1.0,
        sent => ledger.received() as f64 / sent as f64,
    }
}

/// Delivered packets over per-hop data transmissions.
pub fn transmission_efficiency(ledger: &Ledger) -> Result<f64, MetricsError> {
    match ledger.data_transmissions() {
        0 => Err(MetricsError::NoTransmissions),
        tx => Ok(ledger.received() as f64 / tx as f64),
    }
}

/// Sliding-window goodput at the destinations, in bits per second.
///
/// Points sit at `window + k * step` for every such time not after `end`;
/// each covers deliveries in the half-open interval `(t - window, t]`.
pub fn throughput_series(ledger: &Ledger, window: SimTime, step: SimTime, end: SimTime) -> Vec<SeriesPoint> {
    if window == SimTime::ZERO || step == SimTime::ZERO {
        return Vec::new();
    }
    let arrivals: Vec<(SimTime, u64)> =
        ledger.events().iter().filter(|e| e.kind == EventKind::Received).map(|e| (e.t, e.size as u64 * 8)).collect();
    let secs = window.as_secs();
    let mut points = Vec::new();
    let (mut lo, mut hi, mut bits) = (0usize, 0usize, 0u64);
    let mut t = window;
    while t <= end {
        while hi < arrivals.len() && arrivals[hi].0 <= t {
            bits += arrivals[hi].1;
            hi += 1;
        }
        let from = t - window;
        while lo < hi && arrivals[lo].0 <= from {
            bits -= arrivals[lo].1;
            lo += 1;
        }
        points.push(SeriesPoint::new(t, bits as f64 / secs));
        t = t + step;
    }
    points
}

/// One point per delivered packet: arrival time and end-to-end delay in
/// seconds, including any time spent buffered during route discovery.
/// Packets arriving at the same instant yield points with equal `t`.
pub fn delay_series(ledger: &Ledger) -> Vec<SeriesPoint> {
    deliveries(ledger).iter().map(|d| SeriesPoint::new(d.received_at, d.delay().as_secs())).collect()
}

/// Cumulative received and dropped data packets, sampled every `step`
/// from zero up to `end`.
pub fn received_lost_series(ledger: &Ledger, step: SimTime, end: SimTime) -> (Vec<SeriesPoint>, Vec<SeriesPoint>) {
    let (mut received, mut lost) = (Vec::new(), Vec::new());
    if step == SimTime::ZERO {
        return (received, lost);
    }
    let events: Vec<_> = ledger
        .events()
        .iter()
        .filter(|e| e.subkind == PacketKind::Data && matches!(e.kind, EventKind::Received | EventKind::Dropped))
        .collect();
    let (mut i, mut r, mut d) = (0, 0u64, 0u64);
    let mut t = SimTime::ZERO;
    while t <= end {
        while i < events.len() && events[i].t <= t {
            match events[i].kind {
                EventKind::Received => r += 1,
                _ => d += 1,
            }
            i += 1;
        }
        received.push(SeriesPoint::new(t, r as f64));
        lost.push(SeriesPoint::new(t, d as f64));
        t = t + step;
    }
    (received, lost)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlOverhead {
    pub by_kind: BTreeMap<PacketKind, u64>,
    pub total: u64,
}

/// Control transmissions per kind; every control kind is present.
pub fn control_overhead(ledger: &Ledger) -> ControlOverhead {
    let by_kind: BTreeMap<PacketKind, u64> =
        PacketKind::CONTROL.iter().map(|&k| (k, ledger.control_transmissions(k))).collect();
    ControlOverhead { total: by_kind.values().sum(), by_kind }
}

/// Distinct consecutive paths taken by delivered packets of `src -> dst`.
pub fn route_sequence(ledger: &Ledger, src: NodeId, dst: NodeId) -> Vec<Vec<NodeId>> {
    let mut seq: Vec<Vec<NodeId>> = Vec::new();
    for d in deliveries(ledger).into_iter().filter(|d| d.src == src && d.dst == dst) {
        if seq.last() != Some(&d.path) {
            seq.push(d.path);
        }
    }
    seq
}

pub fn mean(points: &[SeriesPoint]) -> Option<f64> {
    (!points.is_empty()).then(|| points.iter().map(|p| p.value).sum::<f64>() / points.len() as f64)
}
