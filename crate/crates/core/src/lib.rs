//! Deterministic discrete-event simulation of mobile ad-hoc networks
//! running AODV, with DSDV as a proactive baseline.
//!
//! A run is fully determined by its scenario, protocol and seed: the same
//! triple always yields a byte-identical trace.

pub mod aodv;
pub mod dsdv;
pub mod engine;
pub mod metrics;
pub mod net;
pub mod packet;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod time;
pub mod world;

pub use engine::{Engine, EngineError, EventHandle, RngSeed, SimEvent};
pub use metrics::{Ledger, SeriesPoint};
pub use packet::{DataPacket, DropReason, PacketKind};
pub use report::{MetricWindows, PlotSet, RunReport};
pub use scenario::{ScenarioError, ScenarioSpec, TrafficFlow};
pub use sim::{simulate, Protocol, SimConfig, SimOutcome, Simulator};
pub use time::SimTime;
pub use world::{Area, NodeId, Position, RadioModel, WaypointLeg, World};
