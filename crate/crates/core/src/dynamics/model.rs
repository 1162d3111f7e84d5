use super::{ControlInput, StateDerivative, VehicleParams, VehicleState};

pub const GRAVITY: f64 = 9.81;

/// Speed floor used in the slip-angle denominator (m/s). Below this planar
/// speed the lateral tire forces fade linearly to zero.
pub const SLIP_SPEED_FLOOR: f64 = 0.5;

/// Brake force ramps linearly through zero longitudinal speed over this band
/// (m/s) so a braked vehicle comes to rest instead of chattering.
const BRAKE_SIGN_BAND: f64 = 0.1;

/// Body-frame forces acting on the vehicle, in newtons.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TireForces {
    /// Net longitudinal force (drive, brake, drag, rolling).
    pub longitudinal: f64,
    /// Front axle lateral force in the wheel frame.
    pub front_lateral: f64,
    /// Rear axle lateral force.
    pub rear_lateral: f64,
    /// Road-wheel angle, rad.
    pub steer_angle: f64,
}

fn sign_or_one(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn saturate(force: f64, limit: f64) -> f64 {
    force.clamp(-limit, limit)
}

pub fn longitudinal_force(state: &VehicleState, control: &ControlInput, params: &VehicleParams) -> f64 {
    let direction = if control.reverse { -1.0 } else { 1.0 };
    let v = state.v_long;
    let brake_sign = (v / BRAKE_SIGN_BAND).clamp(-1.0, 1.0);
    direction * control.throttle * params.max_drive_force
        - brake_sign * control.brake * params.max_brake_force
        - params.drag_coeff * v * v.abs()
        - params.rolling_coeff * v
}

/// Unsaturated axle forces, the two axle limits, and the low-speed fade.
fn linear_lateral(state: &VehicleState, steer_angle: f64, params: &VehicleParams) -> ([f64; 2], [f64; 2], f64) {
    let travel = sign_or_one(state.v_long);
    let speed_ref = state.v_long.abs().max(SLIP_SPEED_FLOOR);
    let lf = params.dist_front_axle;
    let lr = params.dist_rear_axle;

    let slip_front = travel * steer_angle - (state.v_lat + lf * state.yaw_rate).atan2(speed_ref);
    let slip_rear = -(state.v_lat - lr * state.yaw_rate).atan2(speed_ref);

    let axle_load = params.friction_coeff * params.mass * GRAVITY / params.wheelbase();
    let planar_speed = state.v_long.hypot(state.v_lat);
    (
        [params.cornering_stiff_front * slip_front, params.cornering_stiff_rear * slip_rear],
        [axle_load * lr, axle_load * lf],
        (planar_speed / SLIP_SPEED_FLOOR).min(1.0),
    )
}

/// Lateral axle forces `(front, rear)` from linear tires with friction
/// saturation. Slip is measured against the direction of travel, so the
/// same expressions hold when reversing.
pub fn lateral_tire_forces(state: &VehicleState, steer_angle: f64, params: &VehicleParams) -> (f64, f64) {
    let (linear, limit, fade) = linear_lateral(state, steer_angle, params);
    (fade * saturate(linear[0], limit[0]), fade * saturate(linear[1], limit[1]))
}

/// Which piece of the piecewise-smooth force model is active. Two states with
/// the same value lie in the same smooth region.
pub(crate) fn regime(state: &VehicleState, control: &ControlInput, params: &VehicleParams) -> u32 {
    let (linear, limit, fade) = linear_lateral(state, control.steering * params.max_steer_angle, params);
    let side = |f: f64, l: f64| {
        if f > l {
            1
        } else if f < -l {
            2
        } else {
            0
        }
    };
    side(linear[0], limit[0])
        | side(linear[1], limit[1]) << 2
        | u32::from(state.v_long < 0.0) << 4
        | u32::from(state.v_long.abs() < SLIP_SPEED_FLOOR) << 5
        | u32::from(fade < 1.0) << 6
        | u32::from(state.v_long.abs() < BRAKE_SIGN_BAND) << 7
}

pub fn tire_forces(state: &VehicleState, control: &ControlInput, params: &VehicleParams) -> TireForces {
    let steer_angle = control.steering * params.max_steer_angle;
    let (front_lateral, rear_lateral) = lateral_tire_forces(state, steer_angle, params);
    TireForces { longitudinal: longitudinal_force(state, control, params), front_lateral, rear_lateral, steer_angle }
}

/// Rigid-body response to a given set of forces.
pub fn derivatives_from_forces(state: &VehicleState, forces: &TireForces, params: &VehicleParams) -> StateDerivative {
    let (sin_h, cos_h) = state.heading.sin_cos();
    let cos_d = forces.steer_angle.cos();
    let lf = params.dist_front_axle;
    let lr = params.dist_rear_axle;

    let f_v = forces.longitudinal / params.mass;
    let f_l = (forces.front_lateral * cos_d + forces.rear_lateral) / params.mass;
    let f_r = (lf * forces.front_lateral * cos_d - lr * forces.rear_lateral) / params.yaw_inertia;

    StateDerivative {
        d_x_pos: state.v_long * cos_h - state.v_lat * sin_h,
        d_y_pos: state.v_long * sin_h + state.v_lat * cos_h,
        d_heading: state.yaw_rate,
        accel_long: f_v - state.yaw_rate * state.v_lat,
        accel_lat: f_l + state.yaw_rate * state.v_long,
        d_yaw_rate: f_r,
    }
}

/// State derivative for an already-clamped control.
pub fn derivatives(state: &VehicleState, control: &ControlInput, params: &VehicleParams) -> StateDerivative {
    let forces = tire_forces(state, control, params);
    derivatives_from_forces(state, &forces, params)
}
