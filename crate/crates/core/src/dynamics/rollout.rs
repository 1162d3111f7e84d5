use thiserror::Error;

use super::model::regime;
use super::{derivatives, ControlInput, DynamicsError, VehicleParams, VehicleState};
use crate::harness::{collision_check, Sample, Trajectory, WorldModel};
use crate::plan::ControlSchedule;

pub const DEFAULT_DT: f64 = 0.01;

/// Substeps used when a step crosses a switch in the force model.
const KINK_SUBSTEPS: u32 = 10;

fn rk4(state: &VehicleState, control: &ControlInput, params: &VehicleParams, dt: f64) -> (VehicleState, bool) {
    let half = 0.5 * dt;
    let k1 = derivatives(state, control, params);
    let s2 = state.advanced(&k1, half);
    let k2 = derivatives(&s2, control, params);
    let s3 = state.advanced(&k2, half);
    let k3 = derivatives(&s3, control, params);
    let s4 = state.advanced(&k3, dt);
    let k4 = derivatives(&s4, control, params);

    let w = dt / 6.0;
    let combine = |a: f64, b: f64, c: f64, d: f64| w * (a + 2.0 * b + 2.0 * c + d);
    let next = VehicleState {
        x_pos: state.x_pos + combine(k1.d_x_pos, k2.d_x_pos, k3.d_x_pos, k4.d_x_pos),
        y_pos: state.y_pos + combine(k1.d_y_pos, k2.d_y_pos, k3.d_y_pos, k4.d_y_pos),
        heading: state.heading + combine(k1.d_heading, k2.d_heading, k3.d_heading, k4.d_heading),
        v_long: state.v_long + combine(k1.accel_long, k2.accel_long, k3.accel_long, k4.accel_long),
        v_lat: state.v_lat + combine(k1.accel_lat, k2.accel_lat, k3.accel_lat, k4.accel_lat),
        yaw_rate: state.yaw_rate + combine(k1.d_yaw_rate, k2.d_yaw_rate, k3.d_yaw_rate, k4.d_yaw_rate),
        time: state.time + dt,
    };
    let r = regime(state, control, params);
    let crossed = [&s2, &s3, &s4, &next].iter().any(|s| regime(s, control, params) != r);
    (next, crossed)
}

/// One classical RK4 step of length `dt`. A step whose stages straddle a
/// tire-saturation or low-speed switch is redone as RK4 substeps, which keeps
/// the error near the smooth-region level.
pub fn step(
    state: &VehicleState,
    control: &ControlInput,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState, DynamicsError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DynamicsError::InvalidTimeStep(dt));
    }
    let (mut next, crossed) = rk4(state, control, params, dt);
    if crossed {
        let h = dt / f64::from(KINK_SUBSTEPS);
        next = *state;
        for _ in 0..KINK_SUBSTEPS {
            next = rk4(&next, control, params, h).0;
        }
        next.time = state.time + dt;
    }
    if !next.is_finite() {
        return Err(DynamicsError::SimulationDiverged { time: next.time });
    }
    Ok(next)
}

#[derive(Debug, Error)]
#[error("{source}")]
pub struct RolloutError {
    pub source: DynamicsError,
    /// Samples logged before the failure.
    pub partial: Box<Trajectory>,
}

/// Executes `schedule` from `initial`, stopping early on collision.
///
/// The schedule is sampled at `k·dt`; the final step may run past the end of
/// the last segment by less than one `dt` and holds the last control.
pub fn rollout(
    initial: &VehicleState,
    schedule: &ControlSchedule,
    params: &VehicleParams,
    dt: f64,
    world: &WorldModel,
) -> Result<Trajectory, RolloutError> {
    let fail = |source, samples: Vec<Sample>| RolloutError {
        source,
        partial: Box::new(Trajectory::from_samples(samples, false)),
    };
    if !(dt.is_finite() && dt > 0.0) {
        return Err(fail(DynamicsError::InvalidTimeStep(dt), Vec::new()));
    }

    let total = schedule.total_duration();
    let n_steps = if total > 0.0 { (total / dt - 1e-9).ceil() as usize } else { 0 };
    let control_at = |k: usize| schedule.control_at_clamped(k as f64 * dt);

    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut state = *initial;
    samples.push(Sample { state, control: control_at(0) });

    if collision_check(&state, params, world) {
        return Ok(Trajectory::from_samples(samples, true));
    }

    for k in 0..n_steps {
        let control = control_at(k);
        state = match step(&state, &control, params, dt) {
            Ok(next) => next,
            Err(e) => return Err(fail(e, samples)),
        };
        samples.push(Sample { state, control: control_at(k + 1) });
        if collision_check(&state, params, world) {
            return Ok(Trajectory::from_samples(samples, true));
        }
    }
    Ok(Trajectory::from_samples(samples, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_coasting_one_step() {
        let mut p = VehicleParams::sedan();
        p.drag_coeff = 0.0;
        p.rolling_coeff = 0.0;
        let s = step(&VehicleState::with_speed(5.0), &ControlInput::idle(), &p, 0.01).unwrap();
        assert!((s.x_pos - 0.05).abs() < 1e-15);
        assert_eq!(s.y_pos, 0.0);
        assert_eq!(s.heading, 0.0);
        assert_eq!(s.v_long, 5.0);
        assert_eq!(s.time, 0.01);
    }

    #[test]
    fn zero_dt_rejected() {
        let p = VehicleParams::sedan();
        assert!(matches!(
            step(&VehicleState::at_rest(), &ControlInput::idle(), &p, 0.0),
            Err(DynamicsError::InvalidTimeStep(_))
        ));
        assert!(step(&VehicleState::at_rest(), &ControlInput::idle(), &p, -0.1).is_err());
    }

    #[test]
    fn rest_is_fixed_point() {
        let p = VehicleParams::sedan();
        let s = step(&VehicleState::at_rest(), &ControlInput::idle(), &p, 0.01).unwrap();
        assert_eq!(VehicleState { time: 0.0, ..s }, VehicleState::at_rest());
    }

    #[test]
    fn non_finite_state_diverges() {
        let p = VehicleParams::sedan();
        let bad = VehicleState { v_long: f64::NAN, ..VehicleState::default() };
        assert!(matches!(step(&bad, &ControlInput::idle(), &p, 0.01), Err(DynamicsError::SimulationDiverged { .. })));
    }

    #[test]
    fn empty_schedule_gives_single_sample() {
        let traj = rollout(
            &VehicleState::at_rest(),
            &ControlSchedule::empty(),
            &VehicleParams::sedan(),
            DEFAULT_DT,
            &WorldModel::open(),
        )
        .unwrap();
        assert_eq!(traj.len(), 1);
        assert!(!traj.collision);
    }

    #[test]
    fn divergence_keeps_partial_log() {
        let p = VehicleParams::sedan();
        let start = VehicleState { v_lat: f64::INFINITY, ..VehicleState::default() };
        let schedule = ControlSchedule::from_segments(vec![(1.0, ControlInput::idle())]).unwrap();
        let err = rollout(&start, &schedule, &p, DEFAULT_DT, &WorldModel::open()).unwrap_err();
        assert!(matches!(err.source, DynamicsError::SimulationDiverged { .. }));
        assert_eq!(err.partial.len(), 1);
    }
}
