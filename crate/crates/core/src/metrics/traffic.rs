//! Traffic-flow quantities from highway engineering: density, flow rate
//! and space-mean speed.

use super::MetricsError;
use crate::time::SimTime;
use crate::world::Position;

/// Vehicles per kilometre of road.
pub fn density(node_count: usize, length_km: f64) -> Result<f64, MetricsError> {
    if length_km.is_nan() || length_km <= 0.0 {
        return Err(MetricsError::ZeroLength);
    }
    Ok(node_count as f64 / length_km)
}

/// Hourly rate at which vehicles pass a point, extrapolated from an
/// observation shorter than an hour.
pub fn flow_rate(crossings: u64, duration_secs: f64) -> Result<f64, MetricsError> {
    if !(duration_secs > 0.0 && duration_secs <= 3600.0) {
        return Err(MetricsError::BadDuration(duration_secs));
    }
    Ok(crossings as f64 * 3600.0 / duration_secs)
}

/// Path length over elapsed time, in metres per second.
pub fn mean_speed(trajectory: &[(SimTime, Position)]) -> Result<f64, MetricsError> {
    if trajectory.len() < 2 || trajectory.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(MetricsError::DegenerateTrajectory);
    }
    let length: f64 = trajectory.windows(2).map(|w| w[0].1.distance(&w[1].1)).sum();
    let elapsed = trajectory[trajectory.len() - 1].0 - trajectory[0].0;
    Ok(length / elapsed.as_secs())
}
