use maneuverforge_core::dynamics::{derivatives, rollout, ControlInput, VehicleParams, VehicleState};
use maneuverforge_core::harness::{Rect, WorldModel};
use maneuverforge_core::plan::ControlSchedule;
use proptest::prelude::*;

fn control(throttle: f64, steering: f64, brake: f64, reverse: bool) -> ControlInput {
    ControlInput::clamped(throttle, steering, brake, reverse).unwrap()
}

// Reference values from a standalone float64 evaluation of the model.
#[test]
fn sedan_derivatives_match_reference() {
    let p = VehicleParams::sedan();
    let cases = [
        (
            VehicleState::with_speed(10.0),
            control(0.0, 0.5, 0.0, false),
            [-0.22666666666666666, 5.355343404755541, 3.7075454340615277],
        ),
        (
            VehicleState { v_long: 10.0, v_lat: 0.3, yaw_rate: 0.1, ..VehicleState::default() },
            control(0.2, 0.05, 0.0, false),
            [0.5433333333333333, -0.5250056305074042, 0.3764409970621421],
        ),
    ];
    for (s, u, want) in cases {
        let d = derivatives(&s, &u, &p);
        for (got, want) in [d.accel_long, d.accel_lat, d.d_yaw_rate].iter().zip(want) {
            assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
        }
        assert_eq!(d.d_heading, s.yaw_rate);
    }
}

#[test]
fn coupling_terms_enter_with_model_signs() {
    let p = VehicleParams::sedan();
    let u = ControlInput::idle();
    let base = VehicleState { v_long: 8.0, v_lat: 0.4, yaw_rate: 0.0, ..VehicleState::default() };
    let spun = VehicleState { yaw_rate: 0.25, ..base };
    let a = derivatives(&base, &u, &p);
    let b = derivatives(&spun, &u, &p);
    // Same longitudinal force; the difference is the -ω·v_lat term.
    assert!((b.accel_long - a.accel_long + 0.25 * 0.4).abs() < 1e-12);
}

#[test]
fn wall_ahead_truncates_rollout() {
    let p = VehicleParams::sedan();
    let front = 0.5 * p.body_length;
    let wall = Rect::new(front + 5.0, front + 6.0, -10.0, 10.0).unwrap();
    let world = WorldModel::with_obstacles(vec![wall]).unwrap();
    let sched = ControlSchedule::from_segments(vec![(3.0, ControlInput::idle())]).unwrap();
    let t = rollout(&VehicleState::with_speed(10.0), &sched, &p, 0.01, &world).unwrap();
    assert!(t.collision);
    let hit = t.truncated_at.unwrap();
    assert!((0.5..=0.52).contains(&hit), "{hit}");
    assert_eq!(t.last().unwrap().time(), hit);
}

#[test]
fn rollout_is_bitwise_repeatable() {
    let p = VehicleParams::sports_coupe();
    let sched = ControlSchedule::from_segments(vec![
        (1.0, control(0.5, 0.0, 0.0, true)),
        (2.0, control(0.0, 0.7, 0.0, true)),
        (2.0, control(0.4, -1.0, 0.0, false)),
    ])
    .unwrap();
    let a = rollout(&VehicleState::at_rest(), &sched, &p, 0.01, &WorldModel::open()).unwrap();
    let b = rollout(&VehicleState::at_rest(), &sched, &p, 0.01, &WorldModel::open()).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tire_forces_stay_within_friction(
        v_long in -20.0f64..20.0,
        v_lat in -5.0f64..5.0,
        yaw_rate in -2.0f64..2.0,
        steering in -1.0f64..1.0,
    ) {
        let p = VehicleParams::sports_coupe();
        let s = VehicleState { v_long, v_lat, yaw_rate, ..VehicleState::default() };
        let (front, rear) =
            maneuverforge_core::dynamics::lateral_tire_forces(&s, steering * p.max_steer_angle, &p);
        let load = p.friction_coeff * p.mass * maneuverforge_core::dynamics::GRAVITY / p.wheelbase();
        prop_assert!(front.abs() <= load * p.dist_rear_axle + 1e-9);
        prop_assert!(rear.abs() <= load * p.dist_front_axle + 1e-9);
    }

    #[test]
    fn clamped_controls_are_in_bounds(t in -5.0f64..5.0, s in -5.0f64..5.0, b in -5.0f64..5.0, r: bool) {
        prop_assert!(control(t, s, b, r).is_within_bounds());
    }
}
