//! Constraint gate between proposed and executed plans: clamp what can be
//! clamped, reject what cannot.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::VehicleParams;
use crate::plan::{ManeuverPlan, MAX_PHASES, MAX_PHASE_DURATION, MAX_PLAN_DURATION};

const SPEED_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSet {
    pub throttle: Bounds,
    pub steering: Bounds,
    pub brake: Bounds,
    /// Upper bound only; durations must also be strictly positive.
    pub max_phase_duration: f64,
    pub min_phases: usize,
    pub max_phases: usize,
    /// |steering| cap for phases entered above `high_speed_threshold`.
    pub high_speed_steering_cap: f64,
    /// m/s
    pub high_speed_threshold: f64,
    /// s
    pub max_total_duration: f64,
    pub require_final_brake: bool,
    /// m/s
    pub max_speed_estimate: f64,
    /// Drive acceleration (m/s²) used by the speed estimate; taken from the
    /// vehicle, never from config. `None` disables the speed checks.
    #[serde(skip)]
    pub drive_accel: Option<f64>,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self {
            throttle: Bounds::new(0.0, 1.0),
            steering: Bounds::new(-1.0, 1.0),
            brake: Bounds::new(0.0, 1.0),
            max_phase_duration: MAX_PHASE_DURATION,
            min_phases: 1,
            max_phases: MAX_PHASES,
            high_speed_steering_cap: 1.0,
            high_speed_threshold: 15.0,
            max_total_duration: MAX_PLAN_DURATION,
            require_final_brake: true,
            max_speed_estimate: 25.0,
            drive_accel: None,
        }
    }
}

impl ConstraintSet {
    pub fn for_vehicle(params: &VehicleParams) -> Self {
        Self::default().with_vehicle(params)
    }

    pub fn with_vehicle(mut self, params: &VehicleParams) -> Self {
        self.drive_accel = Some(params.drive_accel());
        self
    }

    /// Safety caps must sit inside the operational envelope.
    pub fn check(&self) -> Result<(), String> {
        let op = [
            ("throttle", self.throttle, 0.0, 1.0),
            ("steering", self.steering, -1.0, 1.0),
            ("brake", self.brake, 0.0, 1.0),
        ];
        for (name, b, lo, hi) in op {
            if !(b.min.is_finite() && b.max.is_finite() && b.min >= lo && b.max <= hi && b.min <= b.max) {
                return Err(format!("{name} bounds [{}, {}] outside [{lo}, {hi}]", b.min, b.max));
            }
        }
        if !(self.max_phase_duration > 0.0 && self.max_phase_duration <= MAX_PHASE_DURATION) {
            return Err(format!("max_phase_duration {} outside (0, {MAX_PHASE_DURATION}]", self.max_phase_duration));
        }
        if self.min_phases < 1 || self.min_phases > self.max_phases || self.max_phases > MAX_PHASES {
            return Err(format!("phase count bounds [{}, {}] invalid", self.min_phases, self.max_phases));
        }
        if !(self.high_speed_steering_cap >= 0.0
            && self.high_speed_steering_cap <= self.steering.max.min(-self.steering.min))
        {
            return Err(format!("high_speed_steering_cap {} outside steering bounds", self.high_speed_steering_cap));
        }
        if !(self.max_total_duration > 0.0 && self.max_total_duration <= MAX_PLAN_DURATION) {
            return Err(format!("max_total_duration {} outside (0, {MAX_PLAN_DURATION}]", self.max_total_duration));
        }
        if !(self.high_speed_threshold >= 0.0 && self.max_speed_estimate > 0.0) {
            return Err("speed limits must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintClass {
    Safety,
    Operational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Repaired,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// `None` for plan-level violations.
    pub phase: Option<usize>,
    pub channel: String,
    pub observed: f64,
    pub bound: f64,
    pub class: ConstraintClass,
    pub repairable: bool,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.phase {
            Some(i) => write!(f, "phase {} {}={} (bound {})", i + 1, self.channel, self.observed, self.bound),
            None => write!(f, "{}={} (bound {})", self.channel, self.observed, self.bound),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
    pub repaired_plan: Option<ManeuverPlan>,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        self.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
    }
}

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("plan rejected: {}", .0.summary())]
    Rejected(Box<ValidationReport>),
}

fn violation(
    phase: Option<usize>,
    channel: &str,
    observed: f64,
    bound: f64,
    class: ConstraintClass,
    repairable: bool,
) -> Violation {
    Violation { phase, channel: channel.to_string(), observed, bound, class, repairable }
}

fn nearest(b: &Bounds, v: f64) -> f64 {
    if v < b.min {
        b.min
    } else {
        b.max
    }
}

/// Speed estimate at the start of each phase and at the end of the plan:
/// `drive_accel · Σ throttle·duration`.
fn speed_profile(plan: &ManeuverPlan, drive_accel: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(plan.phases.len() + 1);
    for p in &plan.phases {
        out.push(drive_accel * acc);
        acc += p.throttle * p.duration;
    }
    out.push(drive_accel * acc);
    out
}

pub fn validate(plan: &ManeuverPlan, c: &ConstraintSet) -> ValidationReport {
    use ConstraintClass::{Operational, Safety};

    let mut phase_v: Vec<Vec<Violation>> = vec![Vec::new(); plan.phases.len()];
    let mut plan_v = Vec::new();
    let n = plan.phases.len();
    if n < c.min_phases || n > c.max_phases {
        let bound = if n < c.min_phases { c.min_phases } else { c.max_phases };
        plan_v.push(violation(None, "phase_count", n as f64, bound as f64, Operational, false));
    }

    let mut repaired = plan.clone();
    for (i, phase) in repaired.phases.iter_mut().enumerate() {
        let out = &mut phase_v[i];
        if !phase.duration.is_finite() || phase.duration <= 0.0 {
            out.push(violation(Some(i), "duration", phase.duration, 0.0, Operational, false));
        } else if phase.duration > c.max_phase_duration {
            out.push(violation(Some(i), "duration", phase.duration, c.max_phase_duration, Operational, true));
            phase.duration = c.max_phase_duration;
        }
        for (name, value, bounds) in [
            ("throttle", &mut phase.throttle, &c.throttle),
            ("steering", &mut phase.steering, &c.steering),
            ("brake", &mut phase.brake, &c.brake),
        ] {
            if !value.is_finite() {
                out.push(violation(Some(i), name, *value, bounds.max, Operational, false));
            } else if !bounds.contains(*value) {
                out.push(violation(Some(i), name, *value, nearest(bounds, *value), Operational, true));
                *value = bounds.clamp(*value);
            }
        }
    }

    let structurally_ok = plan_v.is_empty() && phase_v.iter().flatten().all(|v| v.repairable);
    if structurally_ok {
        let total = repaired.total_duration();
        if total > c.max_total_duration {
            plan_v.push(violation(None, "total_duration", total, c.max_total_duration, Safety, false));
        }
        if c.require_final_brake {
            let last = repaired.phases.last().map_or(0.0, |p| p.brake);
            if last <= 0.0 {
                plan_v.push(violation(None, "final_brake", last, 0.0, Safety, false));
            }
        }
        if let Some(accel) = c.drive_accel {
            let v_end = *speed_profile(&repaired, accel).last().expect("non-empty");
            if v_end > c.max_speed_estimate * (1.0 + SPEED_REL_TOL) {
                plan_v.push(violation(None, "speed_estimate", v_end, c.max_speed_estimate, Safety, true));
                let k = c.max_speed_estimate / v_end;
                for p in &mut repaired.phases {
                    p.throttle *= k;
                }
            }
            let profile = speed_profile(&repaired, accel);
            for (i, p) in repaired.phases.iter_mut().enumerate() {
                if profile[i] > c.high_speed_threshold && p.steering.abs() > c.high_speed_steering_cap {
                    phase_v[i].push(violation(
                        Some(i),
                        "steering",
                        p.steering,
                        c.high_speed_steering_cap,
                        Safety,
                        true,
                    ));
                    p.steering = p.steering.signum() * c.high_speed_steering_cap;
                }
            }
        }
    }

    let violations: Vec<Violation> = phase_v.into_iter().flatten().chain(plan_v).collect();
    let verdict = if violations.iter().any(|v| !v.repairable) {
        Verdict::Rejected
    } else if violations.is_empty() {
        Verdict::Accepted
    } else {
        Verdict::Repaired
    };
    let repaired_plan = match verdict {
        Verdict::Rejected => None,
        Verdict::Accepted => Some(plan.clone()),
        Verdict::Repaired => Some(repaired),
    };
    ValidationReport { verdict, violations, repaired_plan }
}

pub fn enforce(plan: &ManeuverPlan, c: &ConstraintSet) -> Result<ManeuverPlan, ValidationError> {
    let report = validate(plan, c);
    match report.repaired_plan {
        Some(p) => Ok(p),
        None => Err(ValidationError::Rejected(Box::new(report))),
    }
}
