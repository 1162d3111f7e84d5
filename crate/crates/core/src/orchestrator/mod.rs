//! The closed loop: enrich, propose, validate, simulate, score, feed back.

mod batch;
mod report;

pub use batch::{run_batch, BatchReport, BatchRow, ImplementationTable, TrialOutcome};
pub use report::{
    summarize, summarize_comparison, write_iteration_csv, write_learning_csv, ComparisonRow, ComparisonTable,
    ReportError,
};

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agents::{
    compose_error_feedback, compose_feedback, compose_rejection_feedback, enrich, propose_plan, AgentBackend,
    AgentError, Query, CTX_PREVIOUS_METRICS, CTX_PREVIOUS_PLAN, CTX_VEHICLE,
};
use crate::dynamics::{rollout, VehicleParams, VehicleState};
use crate::harness::{compute_metrics, cost, CostWeights, Thresholds, Trajectory, TrialMetrics, WorldModel};
use crate::plan::{compile, ManeuverPlan};
use crate::validator::{validate, ConstraintSet, Verdict, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Llm,
    Scripted,
    Replay,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm" => Ok(Self::Llm),
            "scripted" => Ok(Self::Scripted),
            "replay" => Ok(Self::Replay),
            other => Err(format!("unknown backend '{other}' (expected llm, scripted or replay)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopConfig {
    pub k_max: u32,
    /// Cost threshold for early exit.
    pub epsilon: f64,
    pub weights: CostWeights,
    pub thresholds: Thresholds,
    pub constraints: ConstraintSet,
    /// Preset name or path to a params JSON file.
    pub vehicle: String,
    /// "open", "corridor" or "corridor:<offset>".
    pub world: String,
    pub backend: BackendKind,
    pub seed: u64,
    /// Relative perturbation of the scripted seed plan, drawn from `seed`.
    pub seed_jitter: f64,
    /// m/s, signed along the body axis.
    pub initial_speed: f64,
    /// s
    pub dt: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            k_max: 30,
            epsilon: 3.0,
            weights: CostWeights::default(),
            thresholds: Thresholds::default(),
            constraints: ConstraintSet::default(),
            vehicle: "sedan".into(),
            world: "open".into(),
            backend: BackendKind::Scripted,
            seed: 0,
            seed_jitter: 0.0,
            initial_speed: 0.0,
            dt: crate::dynamics::DEFAULT_DT,
        }
    }
}

#[derive(Debug, Error)]
pub enum LoopError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no iteration produced metrics ({} iterations)", .records.len())]
    AllIterationsRejected { records: Vec<IterationRecord> },
    #[error("backend failure at iteration {}: {error}", .records.len())]
    Backend { error: AgentError, records: Vec<IterationRecord> },
}

impl LoopError {
    pub fn records(&self) -> &[IterationRecord] {
        match self {
            LoopError::Config(_) => &[],
            LoopError::AllIterationsRejected { records } | LoopError::Backend { records, .. } => records,
        }
    }
}

/// A [`LoopConfig`] with the vehicle and world resolved.
#[derive(Debug, Clone)]
pub struct Session {
    pub config: LoopConfig,
    pub params: VehicleParams,
    pub world: WorldModel,
    pub constraints: ConstraintSet,
}

impl Session {
    pub fn new(config: LoopConfig) -> Result<Self, LoopError> {
        let bad = |m: String| LoopError::Config(m);
        if config.k_max < 1 {
            return Err(bad("k_max must be at least 1".into()));
        }
        if config.epsilon.is_nan() || config.epsilon < 0.0 {
            return Err(bad(format!("epsilon must be >= 0, got {}", config.epsilon)));
        }
        if !(config.dt.is_finite() && config.dt > 0.0) {
            return Err(bad(format!("dt must be > 0, got {}", config.dt)));
        }
        if !(0.0..=0.5).contains(&config.seed_jitter) {
            return Err(bad(format!("seed_jitter {} outside [0, 0.5]", config.seed_jitter)));
        }
        if !config.initial_speed.is_finite() {
            return Err(bad("initial_speed must be finite".into()));
        }
        config.weights.validate().map_err(|e| bad(e.to_string()))?;
        config.constraints.check().map_err(bad)?;
        let params = VehicleParams::resolve(&config.vehicle).map_err(|e| bad(e.to_string()))?;
        let world = WorldModel::resolve(&config.world).map_err(|e| bad(e.to_string()))?;
        let constraints = config.constraints.clone().with_vehicle(&params);
        Ok(Self { config, params, world, constraints })
    }

    pub fn initial_query(&self, task: &str) -> Query {
        Query::new(task).with_context(CTX_VEHICLE, self.config.vehicle.clone())
    }

    /// Compiles and simulates an executable plan.
    pub fn simulate(&self, plan: &ManeuverPlan) -> Result<(Trajectory, TrialMetrics, f64), String> {
        let schedule = compile(plan).map_err(|e| e.to_string())?;
        let initial = VehicleState::with_speed(self.config.initial_speed);
        let traj =
            rollout(&initial, &schedule, &self.params, self.config.dt, &self.world).map_err(|e| e.to_string())?;
        let metrics = compute_metrics(&traj, &self.config.thresholds).map_err(|e| e.to_string())?;
        let c = cost(&metrics, &self.config.weights);
        Ok((traj, metrics, c))
    }

    /// One pass through the pipeline. `previous` is the last evaluated plan
    /// and its metrics.
    pub fn run_iteration(
        &self,
        k: u32,
        query: &Query,
        backend: &mut dyn AgentBackend,
        previous: Option<&(ManeuverPlan, TrialMetrics)>,
    ) -> IterationOutcome {
        let started = Instant::now();
        let mut record = IterationRecord::empty(k, query.clone());
        let mut trajectory = None;
        let mut fatal = None;

        let mut context = BTreeMap::new();
        if let Some((plan, m)) = previous {
            context.insert(CTX_PREVIOUS_PLAN.to_string(), plan.to_value());
            context.insert(CTX_PREVIOUS_METRICS.to_string(), serde_json::to_value(m).unwrap_or(Value::Null));
        }
        let proposed = enrich(query, &self.constraints, &self.params, previous.map(|p| &p.1))
            .and_then(|eq| propose_plan(&eq, backend, context));
        match proposed {
            Err(e) => {
                record.error = Some(e.to_string());
                if e.is_fatal() {
                    fatal = Some(e);
                }
            }
            Ok(plan) => {
                let report = validate(&plan, &self.constraints);
                record.raw_plan = Some(plan);
                record.verdict = Some(report.verdict);
                record.violations = report.violations;
                record.implemented = report.verdict != Verdict::Rejected;
                if let Some(valid) = report.repaired_plan {
                    match self.simulate(&valid) {
                        Ok((traj, m, c)) => {
                            record.metrics = Some(m);
                            record.cost = Some(c);
                            trajectory = Some(traj);
                        }
                        Err(e) => record.error = Some(e),
                    }
                    record.validated_plan = Some(valid);
                }
            }
        }
        record.wall_ms = started.elapsed().as_secs_f64() * 1e3;
        IterationOutcome { record, trajectory, fatal }
    }

    pub fn run_loop(&self, task: &str, backend: &mut dyn AgentBackend) -> Result<RunResult, LoopError> {
        let mut query = self.initial_query(task);
        let mut records: Vec<IterationRecord> = Vec::new();
        let mut best: Option<(ManeuverPlan, TrialMetrics, f64, u32, Trajectory)> = None;
        let mut previous: Option<(ManeuverPlan, TrialMetrics)> = None;
        let mut converged = false;

        for k in 1..=self.config.k_max {
            let out = self.run_iteration(k, &query, backend, previous.as_ref());
            let rec = out.record;
            if let Some(error) = out.fatal {
                records.push(rec);
                return Err(LoopError::Backend { error, records });
            }
            let next = match (&rec.metrics, rec.cost, &rec.validated_plan, out.trajectory) {
                (Some(m), Some(c), Some(plan), Some(traj)) => {
                    if best.as_ref().is_none_or(|b| c <= b.2) {
                        best = Some((plan.clone(), *m, c, k, traj));
                    }
                    previous = Some((plan.clone(), *m));
                    converged = c <= self.config.epsilon;
                    compose_feedback(&query, m)
                }
                _ if rec.verdict == Some(Verdict::Rejected) => {
                    let report = crate::validator::ValidationReport {
                        verdict: Verdict::Rejected,
                        violations: rec.violations.clone(),
                        repaired_plan: None,
                    };
                    compose_rejection_feedback(&query, &report)
                }
                _ => compose_error_feedback(
                    &query,
                    &AgentError::BackendUnavailable(rec.error.clone().unwrap_or_default()),
                ),
            };
            records.push(rec);
            if converged {
                break;
            }
            query = next;
        }

        let iterations_used = records.len() as u32;
        match best {
            None => Err(LoopError::AllIterationsRejected { records }),
            Some((best_plan, best_metrics, best_cost, best_iteration, traj)) => Ok(RunResult {
                records,
                best_plan,
                best_metrics,
                best_cost,
                best_iteration,
                converged,
                iterations_used,
                best_trajectory: Some(traj),
            }),
        }
    }
}

pub struct IterationOutcome {
    pub record: IterationRecord,
    pub trajectory: Option<Trajectory>,
    /// Set when the backend cannot serve further iterations.
    pub fatal: Option<AgentError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: u32,
    pub query: Query,
    pub raw_plan: Option<ManeuverPlan>,
    pub verdict: Option<Verdict>,
    pub violations: Vec<Violation>,
    pub validated_plan: Option<ManeuverPlan>,
    pub metrics: Option<TrialMetrics>,
    pub cost: Option<f64>,
    pub implemented: bool,
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_ms: f64,
}

impl IterationRecord {
    fn empty(k: u32, query: Query) -> Self {
        Self {
            k,
            query,
            raw_plan: None,
            verdict: None,
            violations: Vec::new(),
            validated_plan: None,
            metrics: None,
            cost: None,
            implemented: false,
            error: None,
            wall_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub records: Vec<IterationRecord>,
    pub best_plan: ManeuverPlan,
    pub best_metrics: TrialMetrics,
    pub best_cost: f64,
    pub best_iteration: u32,
    /// `best_cost <= epsilon`.
    pub converged: bool,
    pub iterations_used: u32,
    #[serde(skip)]
    pub best_trajectory: Option<Trajectory>,
}

impl RunResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run result serializes")
    }
}

/// Convenience wrapper over [`Session::run_loop`].
pub fn run_loop(config: &LoopConfig, task: &str, backend: &mut dyn AgentBackend) -> Result<RunResult, LoopError> {
    Session::new(config.clone())?.run_loop(task, backend)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{GenerationRequest, ScriptedBackend};
    use crate::plan::jturn_template;

    const TASK: &str = "Execute a J-turn maneuver.";

    struct Fixed(Vec<ManeuverPlan>, usize);
    impl AgentBackend for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn generate(&mut self, _: &GenerationRequest) -> Result<Value, AgentError> {
            let p = self.0[self.1.min(self.0.len() - 1)].clone();
            self.1 += 1;
            Ok(p.to_value())
        }
    }

    #[test]
    fn first_iteration_runs_template() {
        let s = Session::new(LoopConfig::default()).unwrap();
        let out = s.run_iteration(1, &s.initial_query(TASK), &mut ScriptedBackend::new(0, 0.0), None);
        assert!(out.record.implemented);
        assert!(out.record.metrics.is_some() && out.record.cost.is_some());
        assert_eq!(out.record.raw_plan.unwrap(), jturn_template());
    }

    #[test]
    fn oversteer_is_repaired_and_twelve_phases_rejected() {
        let s = Session::new(LoopConfig::default()).unwrap();
        let mut p = jturn_template();
        p.phases[1].steering = 1.5;
        let out = s.run_iteration(1, &s.initial_query(TASK), &mut Fixed(vec![p], 0), None);
        assert!(out.record.implemented);
        assert_eq!(out.record.verdict, Some(Verdict::Repaired));
        assert_eq!(out.record.validated_plan.unwrap().phases[1].steering, 1.0);

        let mut long = jturn_template();
        while long.phases.len() < 12 {
            long.phases.insert(0, long.phases[0].clone());
        }
        let out = s.run_iteration(1, &s.initial_query(TASK), &mut Fixed(vec![long], 0), None);
        assert!(!out.record.implemented);
        assert!(out.record.metrics.is_none() && out.record.cost.is_none());
    }

    #[test]
    fn single_iteration_best_effort() {
        let cfg = LoopConfig { k_max: 1, epsilon: 0.0, ..LoopConfig::default() };
        let r = run_loop(&cfg, TASK, &mut ScriptedBackend::new(0, 0.0)).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations_used, 1);
        assert_eq!(r.best_plan, jturn_template());
    }

    #[test]
    fn huge_epsilon_converges_immediately() {
        let cfg = LoopConfig { epsilon: 1e12, ..LoopConfig::default() };
        let r = run_loop(&cfg, TASK, &mut ScriptedBackend::new(0, 0.0)).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations_used, 1);
    }

    #[test]
    fn all_rejected_is_an_error() {
        let mut bad = jturn_template();
        bad.phases[0].duration = -1.0;
        let cfg = LoopConfig { k_max: 3, ..LoopConfig::default() };
        let err = run_loop(&cfg, TASK, &mut Fixed(vec![bad], 0)).unwrap_err();
        let LoopError::AllIterationsRejected { records } = err else { panic!("wrong error") };
        assert_eq!(records.len(), 3);
        assert!(records[1].query.text.contains("parameters rejected:"));
    }

    #[test]
    fn bad_config_is_reported() {
        assert!(matches!(Session::new(LoopConfig { k_max: 0, ..LoopConfig::default() }), Err(LoopError::Config(_))));
        assert!(matches!(
            Session::new(LoopConfig { vehicle: "tank".into(), ..LoopConfig::default() }),
            Err(LoopError::Config(_))
        ));
    }
}
