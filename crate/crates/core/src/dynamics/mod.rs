//! Planar vehicle dynamics.
//!
//! A dynamic bicycle model with linear tires and friction saturation. The
//! body-frame velocity coupling follows
//!
//! ```text
//! dv_x/dt = f_v(throttle, brake, reverse) - ω·v_y
//! dv_y/dt = f_l(steering, v_x, v_y, ω)   + ω·v_x
//! dω/dt   = f_r(steering, v_x, v_y, ω)
//! ```
//!
//! and is integrated with classical RK4 at a fixed step.

mod model;
mod params;
mod rollout;

pub use model::{derivatives, derivatives_from_forces, lateral_tire_forces, TireForces, GRAVITY, SLIP_SPEED_FLOOR};
pub use params::{VehicleParams, VehiclePreset};
pub use rollout::{rollout, step, DEFAULT_DT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid control input: {0}")]
    InvalidControl(String),
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("simulation diverged at t = {time:.4} s (non-finite state)")]
    SimulationDiverged { time: f64 },
}

/// Planar rigid-body state. `heading` is kept unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x_pos: f64,
    pub y_pos: f64,
    pub heading: f64,
    pub v_long: f64,
    pub v_lat: f64,
    pub yaw_rate: f64,
    pub time: f64,
}

impl VehicleState {
    pub fn at_rest() -> Self {
        Self::default()
    }

    pub fn with_speed(v_long: f64) -> Self {
        Self { v_long, ..Self::default() }
    }

    pub fn is_finite(&self) -> bool {
        [self.x_pos, self.y_pos, self.heading, self.v_long, self.v_lat, self.yaw_rate, self.time]
            .iter()
            .all(|v| v.is_finite())
    }

    pub(crate) fn advanced(&self, d: &StateDerivative, h: f64) -> Self {
        Self {
            x_pos: self.x_pos + h * d.d_x_pos,
            y_pos: self.y_pos + h * d.d_y_pos,
            heading: self.heading + h * d.d_heading,
            v_long: self.v_long + h * d.accel_long,
            v_lat: self.v_lat + h * d.accel_lat,
            yaw_rate: self.yaw_rate + h * d.d_yaw_rate,
            time: self.time + h,
        }
    }
}

/// Normalized actuator command: throttle, steering, brake, reverse.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub throttle: f64,
    pub steering: f64,
    pub brake: f64,
    pub reverse: bool,
}

impl ControlInput {
    pub const fn idle() -> Self {
        Self { throttle: 0.0, steering: 0.0, brake: 0.0, reverse: false }
    }

    /// Clamps every channel into its legal interval. Rejects non-finite input.
    pub fn clamped(throttle: f64, steering: f64, brake: f64, reverse: bool) -> Result<Self, DynamicsError> {
        if !(throttle.is_finite() && steering.is_finite() && brake.is_finite()) {
            return Err(DynamicsError::InvalidControl(format!(
                "non-finite channel (throttle={throttle}, steering={steering}, brake={brake})"
            )));
        }
        Ok(Self {
            throttle: throttle.clamp(0.0, 1.0),
            steering: steering.clamp(-1.0, 1.0),
            brake: brake.clamp(0.0, 1.0),
            reverse,
        })
    }

    pub fn is_within_bounds(&self) -> bool {
        (0.0..=1.0).contains(&self.throttle)
            && (-1.0..=1.0).contains(&self.steering)
            && (0.0..=1.0).contains(&self.brake)
    }
}

/// Free-function form of [`ControlInput::clamped`].
pub fn clamp_control(raw: (f64, f64, f64, bool)) -> Result<ControlInput, DynamicsError> {
    ControlInput::clamped(raw.0, raw.1, raw.2, raw.3)
}

/// Time derivative of a [`VehicleState`] (excluding `time`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateDerivative {
    pub d_x_pos: f64,
    pub d_y_pos: f64,
    pub d_heading: f64,
    pub accel_long: f64,
    pub accel_lat: f64,
    pub d_yaw_rate: f64,
}

impl StateDerivative {
    pub fn is_finite(&self) -> bool {
        [self.d_x_pos, self.d_y_pos, self.d_heading, self.accel_long, self.accel_lat, self.d_yaw_rate]
            .iter()
            .all(|v| v.is_finite())
    }
}
