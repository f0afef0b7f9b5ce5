//! Run summaries and plot data, all recomputed from the ledger.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::{
    control_overhead, delay_series, delivery_ratio, emit_datasets, mean, received_lost_series, route_sequence,
    throughput_series, transmission_efficiency, Ledger, SeriesPoint,
};
use crate::scenario::ScenarioSpec;
use crate::sim::{DropTally, Protocol, SimConfig, SimOutcome};
use crate::time::SimTime;

/// Sampling of the time-based series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetricWindows {
    /// Width of the throughput averaging window.
    pub window: SimTime,
    /// Spacing of throughput and received/lost samples.
    pub step: SimTime,
}

impl Default for MetricWindows {
    fn default() -> Self {
        MetricWindows { window: SimTime::from_secs(0.5), step: SimTime::from_secs(0.1) }
    }
}

/// The series behind the three standard plots.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotSet {
    pub received: Vec<SeriesPoint>,
    pub lost: Vec<SeriesPoint>,
    pub throughput: Vec<SeriesPoint>,
    pub delay: Vec<SeriesPoint>,
}

pub const RECEIVED_LOST_FILE: &str = "received_lost.xg";
pub const THROUGHPUT_FILE: &str = "throughput.xg";
pub const DELAY_FILE: &str = "delay.xg";

impl PlotSet {
    pub fn from_ledger(ledger: &Ledger, windows: MetricWindows, end: SimTime) -> Self {
        let (received, lost) = received_lost_series(ledger, windows.step, end);
        PlotSet {
            received,
            lost,
            throughput: throughput_series(ledger, windows.window, windows.step, end),
            delay: delay_series(ledger),
        }
    }

    /// File name and contents of each plot, `label` going into the title.
    pub fn render(&self, label: &str) -> Vec<(&'static str, String)> {
        vec![
            (RECEIVED_LOST_FILE, render(&[&self.received, &self.lost], &format!("Packets received and lost: {label}"))),
            (THROUGHPUT_FILE, render(&[&self.throughput], &format!("Throughput (bit/s): {label}"))),
            (DELAY_FILE, render(&[&self.delay], &format!("End-to-end delay (s): {label}"))),
        ]
    }

    /// Several runs in one file per plot, one dataset per run in the given
    /// order. Received and lost datasets alternate per run.
    pub fn render_combined(sets: &[&PlotSet], title: &str) -> Vec<(&'static str, String)> {
        let rl: Vec<&[SeriesPoint]> = sets.iter().flat_map(|s| [&s.received[..], &s.lost[..]]).collect();
        let tp: Vec<&[SeriesPoint]> = sets.iter().map(|s| &s.throughput[..]).collect();
        let dl: Vec<&[SeriesPoint]> = sets.iter().map(|s| &s.delay[..]).collect();
        vec![
            (RECEIVED_LOST_FILE, render(&rl, &format!("Packets received and lost: {title}"))),
            (THROUGHPUT_FILE, render(&tp, &format!("Throughput (bit/s): {title}"))),
            (DELAY_FILE, render(&dl, &format!("End-to-end delay (s): {title}"))),
        ]
    }
}

fn render(datasets: &[&[SeriesPoint]], title: &str) -> String {
    let mut buf = Vec::new();
    emit_datasets(datasets, Some(title), &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("plot text is UTF-8")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRoutes {
    pub src: u16,
    pub dst: u16,
    /// Distinct consecutive paths taken by delivered packets.
    pub paths: Vec<Vec<u16>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub protocol: Protocol,
    pub seed: u64,
    pub end_time: f64,
    pub sent: u64,
    pub received: u64,
    pub dropped: u64,
    /// Still buffered or on the air at the end of the run.
    pub unresolved: u64,
    /// Dropped plus unresolved.
    pub lost: u64,
    pub drops: DropTally,
    pub delivery_ratio: f64,
    pub transmission_efficiency: Option<f64>,
    pub mean_throughput_bps: f64,
    pub mean_delay_s: Option<f64>,
    pub control_overhead: BTreeMap<String, u64>,
    pub control_total: u64,
    pub route_changes: usize,
    pub routes: Vec<FlowRoutes>,
    /// Mean extra hops over the shortest path, per AODV discovery.
    pub route_length_excess: Option<f64>,
    pub loop_violations: usize,
}

impl RunReport {
    pub fn build(
        scenario: &str,
        spec: &ScenarioSpec,
        config: &SimConfig,
        outcome: &SimOutcome,
        windows: MetricWindows,
    ) -> Self {
        let ledger = &outcome.ledger;
        let overhead = control_overhead(ledger);
        let mut flows: Vec<(u16, u16)> = spec.flows.iter().map(|f| (f.src.0, f.dst.0)).collect();
        flows.dedup();
        let routes: Vec<FlowRoutes> = flows
            .into_iter()
            .map(|(src, dst)| FlowRoutes {
                src,
                dst,
                paths: route_sequence(ledger, crate::NodeId(src), crate::NodeId(dst))
                    .into_iter()
                    .map(|p| p.into_iter().map(|n| n.0).collect())
                    .collect(),
            })
            .collect();
        let throughput = throughput_series(ledger, windows.window, windows.step, outcome.end);
        RunReport {
            scenario: scenario.to_string(),
            protocol: config.protocol,
            seed: config.seed.0,
            end_time: outcome.end.as_secs(),
            sent: ledger.sent(),
            received: ledger.received(),
            dropped: ledger.dropped(),
            unresolved: outcome.unresolved(),
            lost: ledger.dropped() + outcome.unresolved(),
            drops: outcome.drops,
            delivery_ratio: delivery_ratio(ledger),
            transmission_efficiency: transmission_efficiency(ledger).ok(),
            mean_throughput_bps: mean(&throughput).unwrap_or(0.0),
            mean_delay_s: mean(&delay_series(ledger)),
            control_overhead: overhead.by_kind.iter().map(|(k, &v)| (k.to_string(), v)).collect(),
            control_total: overhead.total,
            route_changes: routes.iter().map(|r| r.paths.len().saturating_sub(1)).sum(),
            routes,
            route_length_excess: outcome.route_length_excess,
            loop_violations: outcome.loop_violations.len(),
        }
    }

    /// Aligned `key  value` lines for a terminal.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>, digits: usize| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.digits$}"));
        let mut rows: Vec<(String, String)> = vec![
            ("scenario".into(), self.scenario.clone()),
            ("protocol".into(), self.protocol.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("end time (s)".into(), format!("{:.3}", self.end_time)),
            ("packets sent".into(), self.sent.to_string()),
            ("packets received".into(), self.received.to_string()),
            ("packets dropped".into(), self.dropped.to_string()),
            ("packets unresolved".into(), self.unresolved.to_string()),
            ("packets lost".into(), self.lost.to_string()),
            ("delivery ratio".into(), format!("{:.4}", self.delivery_ratio)),
            ("transmission efficiency".into(), opt(self.transmission_efficiency, 4)),
            ("mean throughput (bit/s)".into(), format!("{:.1}", self.mean_throughput_bps)),
            ("mean delay (s)".into(), opt(self.mean_delay_s, 6)),
        ];
        for (k, v) in self.control_overhead.iter().filter(|(_, &v)| v > 0) {
            rows.push((format!("control {k}"), v.to_string()));
        }
        rows.push(("control total".into(), self.control_total.to_string()));
        rows.push(("route changes".into(), self.route_changes.to_string()));
        for r in &self.routes {
            let paths: Vec<String> = r
                .paths
                .iter()
                .map(|p| format!("[{}]", p.iter().map(u16::to_string).collect::<Vec<_>>().join(",")))
                .collect();
            rows.push((format!("routes {}->{}", r.src, r.dst), paths.join(" ")));
        }
        rows.push(("route length excess (hops)".into(), opt(self.route_length_excess, 3)));
        rows.push(("loop violations".into(), self.loop_violations.to_string()));

        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}
