//! CSV exports for trajectories and cross-trial velocity statistics.

use std::io::Write;

use serde::Serialize;

use super::stats::{confidence_interval, mean};
use super::{HarnessError, Trajectory};

#[derive(Serialize)]
struct TrajectoryRow {
    time_s: f64,
    x_m: f64,
    y_m: f64,
    heading_rad: f64,
    v_long_mps: f64,
    v_lat_mps: f64,
    yaw_rate_radps: f64,
    throttle: f64,
    steering: f64,
    brake: f64,
    reverse: bool,
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for s in traj.samples() {
        let st = &s.state;
        w.serialize(TrajectoryRow {
            time_s: st.time,
            x_m: st.x_pos,
            y_m: st.y_pos,
            heading_rad: st.heading,
            v_long_mps: st.v_long,
            v_lat_mps: st.v_lat,
            yaw_rate_radps: st.yaw_rate,
            throttle: s.control.throttle,
            steering: s.control.steering,
            brake: s.control.brake,
            reverse: s.control.reverse,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Per-timestep mean and 95% CI half-width of the velocity components across
/// trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct VelocityStatRow {
    pub time_s: f64,
    pub vx_mean: f64,
    pub vx_ci: f64,
    pub vy_mean: f64,
    pub vy_ci: f64,
    pub vrot_mean_degps: f64,
    pub vrot_ci: f64,
}

/// Rows run to the length of the shortest trajectory so every row averages
/// over all trials. Needs at least two trajectories.
pub fn velocity_statistics(trajectories: &[&Trajectory]) -> Result<Vec<VelocityStatRow>, HarnessError> {
    if trajectories.len() < 2 {
        return Err(HarnessError::TooFewSamples(trajectories.len()));
    }
    let rows = trajectories.iter().map(|t| t.len()).min().unwrap_or(0);
    let mut out = Vec::with_capacity(rows);
    let mut vx = Vec::with_capacity(trajectories.len());
    let mut vy = Vec::with_capacity(trajectories.len());
    let mut vr = Vec::with_capacity(trajectories.len());
    for k in 0..rows {
        vx.clear();
        vy.clear();
        vr.clear();
        for t in trajectories {
            let st = &t.samples()[k].state;
            vx.push(st.v_long);
            vy.push(st.v_lat);
            vr.push(st.yaw_rate.to_degrees());
        }
        let first = trajectories[0].samples();
        out.push(VelocityStatRow {
            time_s: first[k].time() - first[0].time(),
            vx_mean: mean(&vx).unwrap_or(0.0),
            vx_ci: confidence_interval(&vx)?,
            vy_mean: mean(&vy).unwrap_or(0.0),
            vy_ci: confidence_interval(&vy)?,
            vrot_mean_degps: mean(&vr).unwrap_or(0.0),
            vrot_ci: confidence_interval(&vr)?,
        });
    }
    Ok(out)
}

pub fn write_velocity_csv<W: Write>(rows: &[VelocityStatRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
