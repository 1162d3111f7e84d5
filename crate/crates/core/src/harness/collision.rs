//! Oriented vehicle footprint versus axis-aligned obstacles, separating axis
//! test.

use super::world::{Rect, WorldModel};
use crate::dynamics::{VehicleParams, VehicleState};

/// Corners of the `body_length × body_width` footprint centered at the
/// vehicle pose, counter-clockwise starting front-left.
pub fn footprint_corners(state: &VehicleState, params: &VehicleParams) -> [(f64, f64); 4] {
    let (s, c) = state.heading.sin_cos();
    let hl = 0.5 * params.body_length;
    let hw = 0.5 * params.body_width;
    let local = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)];
    local.map(|(lx, ly)| (state.x_pos + lx * c - ly * s, state.y_pos + lx * s + ly * c))
}

fn project(points: &[(f64, f64)], axis: (f64, f64)) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, y)| {
        let d = x * axis.0 + y * axis.1;
        (lo.min(d), hi.max(d))
    })
}

/// True when the convex quadrilateral `corners` overlaps `rect` (touching
/// counts as overlap).
pub fn obb_overlaps_rect(corners: &[(f64, f64); 4], heading: f64, rect: &Rect) -> bool {
    let rect_corners =
        [(rect.x_min, rect.y_min), (rect.x_max, rect.y_min), (rect.x_max, rect.y_max), (rect.x_min, rect.y_max)];
    let (s, c) = heading.sin_cos();
    let axes = [(1.0, 0.0), (0.0, 1.0), (c, s), (-s, c)];
    axes.iter().all(|&axis| {
        let (a_lo, a_hi) = project(corners, axis);
        let (b_lo, b_hi) = project(&rect_corners, axis);
        a_lo <= b_hi && b_lo <= a_hi
    })
}

pub fn collision_check(state: &VehicleState, params: &VehicleParams, world: &WorldModel) -> bool {
    if world.obstacles.is_empty() {
        return false;
    }
    let corners = footprint_corners(state, params);
    world.obstacles.iter().any(|rect| obb_overlaps_rect(&corners, state.heading, rect))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(x: f64, y: f64, heading: f64) -> VehicleState {
        VehicleState { x_pos: x, y_pos: y, heading, ..VehicleState::default() }
    }

    #[test]
    fn open_world_never_collides() {
        let p = VehicleParams::sedan();
        for h in [0.0, 1.0, 3.0, -7.0] {
            assert!(!collision_check(&pose(1e3, -4.0, h), &p, &WorldModel::open()));
        }
    }

    #[test]
    fn center_inside_obstacle() {
        let p = VehicleParams::sedan();
        let w = WorldModel::with_obstacles(vec![Rect::new(-100.0, 100.0, -100.0, 100.0).unwrap()]).unwrap();
        assert!(collision_check(&pose(0.0, 0.0, 0.3), &p, &w));
    }

    #[test]
    fn rotated_corner_just_inside_wall() {
        let p = VehicleParams::sedan();
        let state = pose(0.0, 0.0, std::f64::consts::FRAC_PI_4);
        let top = footprint_corners(&state, &p).iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let inside = WorldModel::with_obstacles(vec![Rect::new(-50.0, 50.0, top - 0.01, top + 1.0).unwrap()]).unwrap();
        let outside = WorldModel::with_obstacles(vec![Rect::new(-50.0, 50.0, top + 0.01, top + 1.0).unwrap()]).unwrap();
        assert!(collision_check(&state, &p, &inside));
        assert!(!collision_check(&state, &p, &outside));
    }

    #[test]
    fn diagonal_gap_is_found_by_body_axes() {
        // The AABB of the rotated footprint overlaps the obstacle but the
        // footprint itself does not.
        let p = VehicleParams::sedan();
        let state = pose(0.0, 0.0, std::f64::consts::FRAC_PI_4);
        let rect = Rect::new(1.8, 3.0, 1.8, 3.0).unwrap();
        let w = WorldModel::with_obstacles(vec![rect]).unwrap();
        assert!(!collision_check(&state, &p, &w));
    }
}
