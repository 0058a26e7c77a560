use serde::{Deserialize, Serialize};

use crate::geodesy::haversine;
use crate::traj::TrajPoint;

/// Per-step motion statistics of a run of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub step_distances: Vec<f64>,
    pub step_speeds: Vec<f64>,
    pub total_distance: f64,
    pub duration_s: i64,
}

impl Kinematics {
    /// Total distance over duration; undefined when no time elapses.
    pub fn avg_speed(&self) -> Option<f64> {
        (self.duration_s > 0).then(|| self.total_distance / self.duration_s as f64)
    }

    pub fn max_speed(&self) -> Option<f64> {
        self.step_speeds.iter().copied().reduce(f64::max)
    }

    /// Lowest strictly positive step speed.
    pub fn min_nonzero_speed(&self) -> Option<f64> {
        self.step_speeds.iter().copied().filter(|s| *s > 0.0).reduce(f64::min)
    }
}

/// Computes step distances and speeds. Time gaps below one second are clamped
/// to one second for the speed division only.
pub fn kinematics(points: &[TrajPoint]) -> Kinematics {
    let mut step_distances = Vec::with_capacity(points.len().saturating_sub(1));
    let mut step_speeds = Vec::with_capacity(points.len().saturating_sub(1));
    let mut total_distance = 0.0;
    for w in points.windows(2) {
        let d = haversine(&w[0], &w[1]);
        let dt = (w[1].t - w[0].t).max(1) as f64;
        step_distances.push(d);
        step_speeds.push(d / dt);
        total_distance += d;
    }
    let duration_s = match (points.first(), points.last()) {
        (Some(a), Some(b)) => b.t - a.t,
        _ => 0,
    };
    Kinematics {
        step_distances,
        step_speeds,
        total_distance,
        duration_s,
    }
}
