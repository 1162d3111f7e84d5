//! Trajectory metrics, cost and reward.

use serde::{Deserialize, Serialize};

use super::{HarnessError, Trajectory};

/// Guard added to the mean heading change before inverting it, degrees.
pub const SMOOTHNESS_EPS_DEG: f64 = 1e-6;

pub const TARGET_ROTATION_DEG: f64 = 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Angle error considered optimal, degrees.
    pub optimal_deg: f64,
    /// Largest angle error still counted as a success, degrees.
    pub acceptable_deg: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { optimal_deg: 3.0, acceptable_deg: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    /// |signed_heading_error|, degrees.
    pub angle_error: f64,
    /// Positive when the vehicle rotated past 180°, degrees.
    pub signed_heading_error: f64,
    pub collision: bool,
    /// m/s³
    pub mean_jerk: f64,
    /// m/s³
    pub max_jerk: f64,
    /// deg/s
    pub mean_yaw_rate: f64,
    /// 1/deg
    pub steering_smoothness: f64,
    /// Simulated seconds.
    pub execution_time: f64,
    pub success: bool,
}

/// Achieved rotation against the 180° target, independent of turn direction.
/// Returns `(signed, absolute)` in degrees.
pub fn angle_error(traj: &Trajectory) -> Result<(f64, f64), HarnessError> {
    let (first, last) = match (traj.first(), traj.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(HarnessError::EmptyTrajectory),
    };
    let rotation = (last.state.heading - first.state.heading).to_degrees();
    Ok(angle_error_from_rotation(rotation))
}

pub fn angle_error_from_rotation(rotation_deg: f64) -> (f64, f64) {
    let signed = rotation_deg.abs() - TARGET_ROTATION_DEG;
    (signed, signed.abs())
}

/// Mean and max of |d|a|/dt|, where `a` is the body-frame acceleration from
/// central differences of `(v_long, v_lat)`.
pub fn jerk_metrics(traj: &Trajectory) -> Result<(f64, f64), HarnessError> {
    let s = traj.samples();
    if s.len() < 3 {
        return Err(HarnessError::TooShort { needed: 3, got: s.len() });
    }
    let accel: Vec<(f64, f64)> = s
        .windows(3)
        .map(|w| {
            let span = w[2].time() - w[0].time();
            let ax = (w[2].state.v_long - w[0].state.v_long) / span;
            let ay = (w[2].state.v_lat - w[0].state.v_lat) / span;
            (w[1].time(), ax.hypot(ay))
        })
        .collect();
    let jerks: Vec<f64> = accel.windows(2).map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs()).collect();
    if jerks.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mean = jerks.iter().sum::<f64>() / jerks.len() as f64;
    let max = jerks.iter().copied().fold(0.0, f64::max);
    Ok((mean, max))
}

/// `(steering_smoothness, mean_yaw_rate)`: inverse of the mean absolute
/// per-step heading change (1/deg), and mean |yaw rate| in deg/s.
pub fn smoothness_and_yaw(traj: &Trajectory) -> Result<(f64, f64), HarnessError> {
    let s = traj.samples();
    if s.len() < 2 {
        return Err(HarnessError::TooShort { needed: 2, got: s.len() });
    }
    let steps = s.len() - 1;
    let mean_change =
        s.windows(2).map(|w| (w[1].state.heading - w[0].state.heading).to_degrees().abs()).sum::<f64>() / steps as f64;
    let mean_yaw = s.iter().map(|x| x.state.yaw_rate.to_degrees().abs()).sum::<f64>() / s.len() as f64;
    Ok((1.0 / (mean_change + SMOOTHNESS_EPS_DEG), mean_yaw))
}

/// All trial metrics. Very short (collision-truncated) trajectories get zero
/// jerk and the degenerate smoothness guard instead of an error.
pub fn compute_metrics(traj: &Trajectory, thresholds: &Thresholds) -> Result<TrialMetrics, HarnessError> {
    let (signed, absolute) = angle_error(traj)?;
    let (mean_jerk, max_jerk) = match jerk_metrics(traj) {
        Err(HarnessError::TooShort { .. }) => (0.0, 0.0),
        other => other?,
    };
    let (steering_smoothness, mean_yaw_rate) = match smoothness_and_yaw(traj) {
        Err(HarnessError::TooShort { .. }) => {
            (1.0 / SMOOTHNESS_EPS_DEG, traj.first().map_or(0.0, |s| s.state.yaw_rate.to_degrees().abs()))
        }
        other => other?,
    };
    Ok(TrialMetrics {
        angle_error: absolute,
        signed_heading_error: signed,
        collision: traj.collision,
        mean_jerk,
        max_jerk,
        mean_yaw_rate,
        steering_smoothness,
        execution_time: traj.duration(),
        success: absolute <= thresholds.acceptable_deg && !traj.collision,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    /// 1/deg
    pub alpha1: f64,
    pub alpha2: f64,
    /// s³/m
    pub alpha3: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { alpha1: 1.0, alpha2: 100.0, alpha3: 0.1 }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), HarnessError> {
        for (name, w) in [("alpha1", self.alpha1), ("alpha2", self.alpha2), ("alpha3", self.alpha3)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(HarnessError::InvalidWeights(format!("{name} = {w}")));
            }
        }
        Ok(())
    }
}

fn collision_indicator(m: &TrialMetrics) -> f64 {
    if m.collision {
        1.0
    } else {
        0.0
    }
}

pub fn cost(m: &TrialMetrics, w: &CostWeights) -> f64 {
    w.alpha1 * m.angle_error + w.alpha2 * collision_indicator(m) + w.alpha3 * m.mean_jerk
}

pub fn reward(m: &TrialMetrics, w: &CostWeights) -> f64 {
    w.alpha1 * (TARGET_ROTATION_DEG - m.angle_error) + w.alpha2 * (1.0 - collision_indicator(m))
        - w.alpha3 * m.mean_jerk
}
