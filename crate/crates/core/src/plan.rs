//! Phase-based maneuver plans and their compilation to piecewise-constant
//! control schedules.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::dynamics::ControlInput;

const JTURN_TEMPLATE_JSON: &str = include_str!("../presets/jturn_template.json");

pub const MAX_PHASES: usize = 10;
pub const MAX_PHASE_DURATION: f64 = 30.0;
pub const MAX_PLAN_DURATION: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("time {t} s outside schedule [0, {total}]")]
    OutOfRange { t: f64, total: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManeuverType {
    JTurn,
}

/// One constant-control segment of a maneuver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub name: String,
    pub duration: f64,
    pub throttle: f64,
    pub steering: f64,
    pub brake: f64,
    pub reverse: bool,
}

impl Phase {
    pub fn control(&self) -> Result<ControlInput, PlanError> {
        ControlInput::clamped(self.throttle, self.steering, self.brake, self.reverse)
            .map_err(|e| PlanError::MalformedPlan(format!("phase '{}': {e}", self.name)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManeuverPlan {
    pub maneuver_type: ManeuverType,
    pub phases: Vec<Phase>,
    #[serde(default)]
    pub metadata: String,
}

impl ManeuverPlan {
    pub fn total_duration(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    pub fn from_json_str(text: &str) -> Result<Self, PlanError> {
        serde_json::from_str(text).map_err(|e| PlanError::MalformedPlan(e.to_string()))
    }

    pub fn from_value(value: &Value) -> Result<Self, PlanError> {
        Self::deserialize(value).map_err(|e| PlanError::MalformedPlan(e.to_string()))
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("plan serializes")
    }

    /// Checks the structural invariants `compile` relies on.
    pub fn check_invariants(&self) -> Result<(), PlanError> {
        let n = self.phases.len();
        if n == 0 || n > MAX_PHASES {
            return Err(PlanError::MalformedPlan(format!("phase count {n} outside [1, {MAX_PHASES}]")));
        }
        for (i, phase) in self.phases.iter().enumerate() {
            if !(phase.duration.is_finite() && phase.duration > 0.0 && phase.duration <= MAX_PHASE_DURATION) {
                return Err(PlanError::MalformedPlan(format!(
                    "phase {i} duration {} outside (0, {MAX_PHASE_DURATION}]",
                    phase.duration
                )));
            }
            phase.control()?;
        }
        let total = self.total_duration();
        if total > MAX_PLAN_DURATION {
            return Err(PlanError::MalformedPlan(format!("total duration {total} exceeds {MAX_PLAN_DURATION}")));
        }
        Ok(())
    }
}

/// Canonical five-phase J-turn: reverse, reverse-steer, counter-steer
/// forward, forward acceleration, braking.
pub fn jturn_template() -> ManeuverPlan {
    ManeuverPlan::from_json_str(JTURN_TEMPLATE_JSON).expect("embedded template parses")
}

/// JSON schema handed to structured-output backends. Only the shape is
/// constrained; numeric ranges are the validator's business.
pub fn plan_json_schema() -> Value {
    json!({
        "type": "object",
        "additionalProperties": false,
        "required": ["maneuver_type", "phases", "metadata"],
        "properties": {
            "maneuver_type": { "type": "string", "enum": ["j_turn"] },
            "phases": {
                "type": "array",
                "items": {
                    "type": "object",
                    "additionalProperties": false,
                    "required": ["name", "duration", "throttle", "steering", "brake", "reverse"],
                    "properties": {
                        "name": { "type": "string" },
                        "duration": { "type": "number" },
                        "throttle": { "type": "number" },
                        "steering": { "type": "number" },
                        "brake": { "type": "number" },
                        "reverse": { "type": "boolean" }
                    }
                }
            },
            "metadata": { "type": "string" }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub control: ControlInput,
}

/// Contiguous half-open segments starting at 0; the final instant belongs to
/// the last segment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlSchedule {
    segments: Vec<Segment>,
}

impl ControlSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a schedule from `(duration, control)` pairs.
    pub fn from_segments(parts: Vec<(f64, ControlInput)>) -> Result<Self, PlanError> {
        let mut segments = Vec::with_capacity(parts.len());
        let mut start = 0.0;
        for (i, (duration, control)) in parts.into_iter().enumerate() {
            if !(duration.is_finite() && duration > 0.0) {
                return Err(PlanError::MalformedPlan(format!("segment {i} has non-positive duration {duration}")));
            }
            let end = start + duration;
            segments.push(Segment { start, end, control });
            start = end;
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    pub fn control_at(&self, t: f64) -> Result<ControlInput, PlanError> {
        let total = self.total_duration();
        if self.segments.is_empty() || !(0.0..=total).contains(&t) {
            return Err(PlanError::OutOfRange { t, total });
        }
        let idx = self.segments.partition_point(|s| s.start <= t);
        Ok(self.segments[idx.saturating_sub(1)].control)
    }

    /// Like [`control_at`](Self::control_at) but holds the boundary control
    /// outside `[0, total]`; idle for an empty schedule.
    pub fn control_at_clamped(&self, t: f64) -> ControlInput {
        let total = self.total_duration();
        self.control_at(t.clamp(0.0, total)).unwrap_or_else(|_| ControlInput::idle())
    }
}

/// Compiles a plan into a zero-order-hold schedule, one segment per phase.
pub fn compile(plan: &ManeuverPlan) -> Result<ControlSchedule, PlanError> {
    plan.check_invariants()?;
    let parts = plan.phases.iter().map(|p| Ok((p.duration, p.control()?))).collect::<Result<Vec<_>, PlanError>>()?;
    ControlSchedule::from_segments(parts)
}
