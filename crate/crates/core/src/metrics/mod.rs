//! Measurement ledger and everything derived from it.
//!
//! The simulator only appends to a [`Ledger`]; every reported number is a
//! pure function of that ledger, so a persisted trace reproduces them.

mod ledger;
mod plot;
mod series;
mod traffic;

use thiserror::Error;

pub use ledger::{EventKind, Ledger, LedgerError, LedgerEvent, TraceError};
pub use plot::{emit_datasets, emit_plot};
pub use series::{
    control_overhead, delay_series, deliveries, delivery_ratio, mean, received_lost_series, route_sequence,
    throughput_series, transmission_efficiency, ControlOverhead, Delivery, SeriesPoint,
};
pub use traffic::{density, flow_rate, mean_speed};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no data transmissions were made")]
    NoTransmissions,
    #[error("road length must be positive")]
    ZeroLength,
    #[error("observation period {0} s is outside (0, 3600]")]
    BadDuration(f64),
    #[error("a trajectory needs two or more samples at increasing times")]
    DegenerateTrajectory,
    #[error("could not write plot data: {0}")]
    SinkFailure(#[from] std::io::Error),
}
