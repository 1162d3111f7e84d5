//! World model, collision geometry, trajectory metrics, cost/reward and
//! confidence intervals.

mod collision;
pub mod export;
mod metrics;
pub mod stats;
mod trajectory;
mod world;

pub use collision::{collision_check, footprint_corners, obb_overlaps_rect};
pub use export::{velocity_statistics, write_trajectory_csv, write_velocity_csv, VelocityStatRow};
pub use metrics::{
    angle_error, angle_error_from_rotation, compute_metrics, cost, jerk_metrics, reward, smoothness_and_yaw,
    CostWeights, Thresholds, TrialMetrics, SMOOTHNESS_EPS_DEG, TARGET_ROTATION_DEG,
};
pub use stats::confidence_interval;
pub use trajectory::{Sample, Trajectory};
pub use world::{Rect, WorldModel, DEFAULT_CORRIDOR_OFFSET};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("degenerate obstacle {0:?}")]
    DegenerateObstacle(Rect),
    #[error("unknown world '{0}'")]
    UnknownWorld(String),
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("trajectory too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
