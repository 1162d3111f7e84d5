//! Query enrichment, plan proposal, feedback composition, and the backends
//! that generate plans.

mod fixture;
mod scripted;

pub(crate) use fixture::check_schema;
pub use fixture::{canonical_json, decode_response, schema_hash, FixtureRecord, FixtureWriter, ReplayBackend};
pub use scripted::{scripted_refine, scripted_refine_with, RefineGains, ScriptedBackend};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dynamics::VehicleParams;
use crate::harness::{Thresholds, TrialMetrics};
use crate::plan::{plan_json_schema, ManeuverPlan};
use crate::validator::{ConstraintSet, ValidationReport};

/// Context key carrying the last executed plan (JSON).
pub const CTX_PREVIOUS_PLAN: &str = "previous_plan";
/// Context key carrying the metrics of that plan (JSON).
pub const CTX_PREVIOUS_METRICS: &str = "previous_metrics";
pub const CTX_TASK: &str = "task";
pub const CTX_VEHICLE: &str = "vehicle";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("response does not match the plan schema: {0}")]
    SchemaViolation(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("request timed out")]
    Timeout,
    #[error("rate limited, retries exhausted")]
    RateLimited,
    #[error("API key missing: set {0}")]
    AuthMissing(String),
    #[error("fixture exhausted after {0} records")]
    FixtureExhausted(usize),
    #[error("fixture schema hash mismatch at record {index}: expected {expected}, found {found}")]
    SchemaHashMismatch { index: usize, expected: String, found: String },
    #[error("fixture: {0}")]
    Fixture(String),
    #[error("enrichment failed: {0}")]
    EnrichmentFailed(String),
}

impl AgentError {
    /// Errors after which further iterations cannot succeed.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            AgentError::FixtureExhausted(_)
                | AgentError::SchemaHashMismatch { .. }
                | AgentError::Fixture(_)
                | AgentError::AuthMissing(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    pub iteration: u32,
    #[serde(default)]
    pub context: BTreeMap<String, String>,
}

impl Query {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let mut context = BTreeMap::new();
        context.insert(CTX_TASK.to_string(), text.clone());
        Self { text, iteration: 1, context }
    }

    pub fn with_context(mut self, key: &str, value: impl Into<String>) -> Self {
        self.context.insert(key.to_string(), value.into());
        self
    }

    /// The user's original instruction, without feedback.
    pub fn task(&self) -> &str {
        self.context.get(CTX_TASK).map_or(&self.text, |s| s.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedQuery {
    pub original: Query,
    pub enriched_text: String,
    pub injected_facts: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        Self { role: role.to_string(), content: content.into() }
    }
}

/// One structured-output call. `context` carries machine-readable state for
/// backends that do not read prose; network backends ignore it.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub messages: Vec<Message>,
    pub output_schema: Value,
    pub context: BTreeMap<String, Value>,
}

pub trait AgentBackend: Send {
    fn name(&self) -> &str;
    /// Returns a JSON document conforming to `request.output_schema`.
    fn generate(&mut self, request: &GenerationRequest) -> Result<Value, AgentError>;
}

impl<B: AgentBackend + ?Sized> AgentBackend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn generate(&mut self, request: &GenerationRequest) -> Result<Value, AgentError> {
        (**self).generate(request)
    }
}

pub const DRIVER_SYSTEM_PROMPT: &str = "You are the driver agent of a vehicle maneuver planner. \
Reply with a single JSON object matching the given schema: an ordered list of constant-control \
phases. throttle and brake lie in [0, 1], steering in [-1, 1] (positive turns left), reverse \
selects the drive direction, durations are in seconds.";

/// Last metrics (if any) are taken from the most recent evaluated entry.
pub fn enrich(
    q: &Query,
    constraints: &ConstraintSet,
    vehicle: &VehicleParams,
    last_metrics: Option<&TrialMetrics>,
) -> Result<EnrichedQuery, AgentError> {
    if q.text.trim().is_empty() {
        return Err(AgentError::Precondition("query text is empty".into()));
    }
    let name = q.context.get(CTX_VEHICLE).cloned().unwrap_or_else(|| "custom".into());
    let mut facts: Vec<(String, String)> = vec![
        ("vehicle".into(), name),
        ("mass_kg".into(), fmt_num(vehicle.mass)),
        ("wheelbase_m".into(), fmt_num(vehicle.wheelbase())),
        ("max_drive_accel_mps2".into(), fmt_num(vehicle.drive_accel())),
        ("max_steer_angle_rad".into(), fmt_num(vehicle.max_steer_angle)),
        ("friction_coeff".into(), fmt_num(vehicle.friction_coeff)),
        ("throttle_bounds".into(), format!("[{}, {}]", constraints.throttle.min, constraints.throttle.max)),
        ("steering_bounds".into(), format!("[{}, {}]", constraints.steering.min, constraints.steering.max)),
        ("brake_bounds".into(), format!("[{}, {}]", constraints.brake.min, constraints.brake.max)),
        ("phase_count".into(), format!("[{}, {}]", constraints.min_phases, constraints.max_phases)),
        ("max_phase_duration_s".into(), fmt_num(constraints.max_phase_duration)),
        ("max_total_duration_s".into(), fmt_num(constraints.max_total_duration)),
        ("final_phase_must_brake".into(), constraints.require_final_brake.to_string()),
    ];
    let mut text = String::new();
    text.push_str(&q.text);
    text.push_str("\n\nVehicle and constraints:\n");
    for (k, v) in &facts {
        let _ = writeln!(text, "- {k}: {v}");
    }
    if let Some(m) = last_metrics {
        let _ = writeln!(
            text,
            "\nLast attempt: signed heading error {:+.1} deg, collision {}, mean jerk {:.2} m/s^3.",
            m.signed_heading_error, m.collision, m.mean_jerk
        );
        if m.signed_heading_error > 0.0 {
            let _ = writeln!(text, "Note: the last attempt overshot; use gentler steering during phase 2.");
        } else if m.signed_heading_error < 0.0 {
            let _ = writeln!(text, "Note: the last attempt undershot; steer harder or hold phase 2 longer.");
        }
        facts.push(("last_signed_error_deg".into(), format!("{:.3}", m.signed_heading_error)));
        facts.push(("last_collision".into(), m.collision.to_string()));
    }
    text.push_str(
        "\nOutput: JSON object {maneuver_type: \"j_turn\", phases: [{name, duration, throttle, \
         steering, brake, reverse}], metadata: string}.\n",
    );
    Ok(EnrichedQuery { original: q.clone(), enriched_text: text, injected_facts: facts })
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

pub fn driver_request(eq: &EnrichedQuery, context: BTreeMap<String, Value>) -> GenerationRequest {
    GenerationRequest {
        messages: vec![Message::new("system", DRIVER_SYSTEM_PROMPT), Message::new("user", eq.enriched_text.clone())],
        output_schema: plan_json_schema(),
        context,
    }
}

/// The returned plan is parsed but not validated.
pub fn propose_plan<B: AgentBackend + ?Sized>(
    eq: &EnrichedQuery,
    backend: &mut B,
    context: BTreeMap<String, Value>,
) -> Result<ManeuverPlan, AgentError> {
    let request = driver_request(eq, context);
    let value = backend.generate(&request)?;
    ManeuverPlan::from_value(&value).map_err(|e| AgentError::SchemaViolation(e.to_string()))
}

fn next_query(prev: &Query, feedback: &str) -> Query {
    let task = prev.task().to_string();
    let mut context = prev.context.clone();
    context.insert(CTX_TASK.into(), task.clone());
    Query { text: format!("{task}\n\nFeedback: {feedback}"), iteration: prev.iteration + 1, context }
}

pub fn compose_feedback(prev: &Query, m: &TrialMetrics) -> Query {
    let optimal = Thresholds::default().optimal_deg;
    let e = m.signed_heading_error;
    let mut fb = format!(
        "signed heading error {e:+.1} deg, collision {}, mean jerk {:.2} m/s^3. ",
        if m.collision { "yes" } else { "no" },
        m.mean_jerk
    );
    if m.collision {
        fb.push_str("Collision detected: reduce speed, brake earlier. ");
    }
    if m.angle_error <= optimal && !m.collision {
        fb.push_str("The previous attempt succeeded; reproduce the same parameters.");
    } else if e > 0.0 {
        let _ = write!(fb, "The vehicle is currently overshooting by {:.1} deg: reduce steering/shorten phase II.", e);
    } else if e < 0.0 {
        let _ =
            write!(fb, "The vehicle is currently undershooting by {:.1} deg: increase steering/lengthen phase II.", -e);
    }
    next_query(prev, fb.trim_end())
}

pub fn compose_rejection_feedback(prev: &Query, report: &ValidationReport) -> Query {
    next_query(prev, &format!("parameters rejected: {}", report.summary()))
}

pub fn compose_error_feedback(prev: &Query, err: &AgentError) -> Query {
    next_query(prev, &format!("previous request failed: {err}"))
}
