use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{summarize, ComparisonTable};
use super::{IterationRecord, LoopConfig, LoopError, Session};
use crate::agents::{AgentBackend, AgentError};
use crate::harness::{velocity_statistics, Trajectory, TrialMetrics, VelocityStatRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    /// The loop produced at least one evaluated plan.
    pub implemented: bool,
    pub converged: bool,
    pub iterations_used: u32,
    pub best_metrics: Option<TrialMetrics>,
    pub best_cost: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub records: Vec<IterationRecord>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    /// 1-based.
    pub batch: usize,
    pub trials: usize,
    pub implemented: usize,
    pub rejected: usize,
    /// Over implemented trials; `None` when there are none.
    pub mean_angle_error: Option<f64>,
    pub min_angle_error: Option<f64>,
    /// Percent of all trials in the batch.
    pub success_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImplementationTable {
    pub total: usize,
    pub implemented: usize,
    pub rejected: usize,
    pub implemented_pct: f64,
    pub rejected_pct: f64,
}

impl ImplementationTable {
    pub fn from_counts(implemented: usize, rejected: usize) -> Self {
        let total = implemented + rejected;
        let pct = |n: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
        Self { total, implemented, rejected, implemented_pct: pct(implemented), rejected_pct: pct(rejected) }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("{:<16}{:>10}{:>10}{:>10}\n", "", "Implemented", "Rejected", "Total"));
        s.push_str(&format!("{:<16}{:>10}{:>10}{:>10}\n", "Count", self.implemented, self.rejected, self.total));
        s.push_str(&format!(
            "{:<16}{:>9.1}%{:>9.1}%{:>9.1}%\n",
            "Share",
            self.implemented_pct,
            self.rejected_pct,
            if self.total == 0 { 0.0 } else { 100.0 }
        ));
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub vehicle: String,
    pub n_trials: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub trials: Vec<TrialOutcome>,
    pub batches: Vec<BatchRow>,
    pub implementation: ImplementationTable,
    pub comparison: Option<ComparisonTable>,
    #[serde(skip)]
    pub velocity: Vec<VelocityStatRow>,
}

impl BatchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("batch report serializes")
    }

    pub fn metrics(&self) -> Vec<TrialMetrics> {
        self.trials.iter().filter_map(|t| t.best_metrics).collect()
    }
}

fn run_trial<F>(base: &LoopConfig, task: &str, index: usize, make_backend: &F) -> Result<TrialOutcome, LoopError>
where
    F: Fn(usize, u64) -> Result<Box<dyn AgentBackend>, AgentError> + Sync,
{
    let seed = base.seed.wrapping_add(index as u64);
    let config = LoopConfig { seed, ..base.clone() };
    let session = Session::new(config)?;
    let mut outcome = TrialOutcome {
        trial: index,
        seed,
        implemented: false,
        converged: false,
        iterations_used: 0,
        best_metrics: None,
        best_cost: None,
        error: None,
        records: Vec::new(),
        trajectory: None,
    };
    let mut backend = match make_backend(index, seed) {
        Ok(b) => b,
        Err(e) => {
            outcome.error = Some(e.to_string());
            return Ok(outcome);
        }
    };
    match session.run_loop(task, &mut backend) {
        Ok(r) => {
            outcome.implemented = true;
            outcome.converged = r.converged;
            outcome.iterations_used = r.iterations_used;
            outcome.best_metrics = Some(r.best_metrics);
            outcome.best_cost = Some(r.best_cost);
            outcome.records = r.records;
            outcome.trajectory = r.best_trajectory;
        }
        Err(LoopError::Config(m)) => return Err(LoopError::Config(m)),
        Err(e) => {
            outcome.error = Some(e.to_string());
            outcome.iterations_used = e.records().len() as u32;
            outcome.records = e.records().to_vec();
        }
    }
    Ok(outcome)
}

fn batch_rows(trials: &[TrialOutcome], batch_size: usize) -> Vec<BatchRow> {
    trials
        .chunks(batch_size)
        .enumerate()
        .map(|(i, chunk)| {
            let errors: Vec<f64> = chunk.iter().filter_map(|t| t.best_metrics.map(|m| m.angle_error)).collect();
            let implemented = chunk.iter().filter(|t| t.implemented).count();
            let successes = chunk.iter().filter(|t| t.best_metrics.is_some_and(|m| m.success)).count();
            BatchRow {
                batch: i + 1,
                trials: chunk.len(),
                implemented,
                rejected: chunk.len() - implemented,
                mean_angle_error: if errors.is_empty() {
                    None
                } else {
                    Some(errors.iter().sum::<f64>() / errors.len() as f64)
                },
                min_angle_error: errors.iter().copied().reduce(f64::min),
                success_rate: 100.0 * successes as f64 / chunk.len() as f64,
            }
        })
        .collect()
}

/// Runs `n_trials` independent loops, trial `i` seeded with `seed + i`.
/// `jobs = 0` uses every logical core. Results do not depend on `jobs`.
pub fn run_batch<F>(
    config: &LoopConfig,
    task: &str,
    n_trials: usize,
    batch_size: usize,
    jobs: usize,
    make_backend: F,
) -> Result<BatchReport, LoopError>
where
    F: Fn(usize, u64) -> Result<Box<dyn AgentBackend>, AgentError> + Sync,
{
    if n_trials == 0 || batch_size == 0 {
        return Err(LoopError::Config("n_trials and batch_size must be at least 1".into()));
    }
    Session::new(config.clone())?;
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| LoopError::Config(e.to_string()))?;
    let trials: Vec<TrialOutcome> = pool.install(|| {
        (0..n_trials).into_par_iter().map(|i| run_trial(config, task, i, &make_backend)).collect::<Result<Vec<_>, _>>()
    })?;

    let implemented = trials.iter().filter(|t| t.implemented).count();
    let batches = batch_rows(&trials, batch_size);
    let metrics: Vec<TrialMetrics> = trials.iter().filter_map(|t| t.best_metrics).collect();
    let comparison = if metrics.is_empty() { None } else { summarize(&[(config.vehicle.clone(), metrics)]).ok() };
    let trajs: Vec<&Trajectory> = trials.iter().filter_map(|t| t.trajectory.as_ref()).collect();
    let velocity = velocity_statistics(&trajs).unwrap_or_default();
    Ok(BatchReport {
        vehicle: config.vehicle.clone(),
        n_trials,
        batch_size,
        seed: config.seed,
        trials,
        batches,
        implementation: ImplementationTable::from_counts(implemented, n_trials - implemented),
        comparison,
        velocity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ScriptedBackend;

    fn scripted(jitter: f64) -> impl Fn(usize, u64) -> Result<Box<dyn AgentBackend>, AgentError> + Sync {
        move |_, seed| Ok(Box::new(ScriptedBackend::new(seed, jitter)) as Box<dyn AgentBackend>)
    }

    #[test]
    fn implementation_percentages() {
        let t = ImplementationTable::from_counts(86, 14);
        assert_eq!(t.implemented_pct, 86.0);
        assert!(t.render().contains("86.0%"));
    }

    #[test]
    fn single_trial_single_batch() {
        let cfg = LoopConfig { k_max: 2, ..LoopConfig::default() };
        let r = run_batch(&cfg, "Execute a J-turn maneuver.", 1, 20, 1, scripted(0.0)).unwrap();
        assert_eq!(r.batches.len(), 1);
        assert_eq!((r.batches[0].implemented, r.batches[0].rejected), (1, 0));
        assert!(r.velocity.is_empty());
    }

    #[test]
    fn batch_is_deterministic_across_job_counts() {
        let cfg = LoopConfig { k_max: 4, seed_jitter: 0.1, seed: 11, ..LoopConfig::default() };
        let a = run_batch(&cfg, "Execute a J-turn maneuver.", 6, 4, 1, scripted(0.1)).unwrap();
        let b = run_batch(&cfg, "Execute a J-turn maneuver.", 6, 4, 3, scripted(0.1)).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.batches.len(), 2);
        assert_eq!(a.batches[1].trials, 2);
        assert_eq!(a.trials[3].seed, 14);
        assert!(!a.velocity.is_empty());
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(matches!(run_batch(&LoopConfig::default(), "x", 0, 20, 1, scripted(0.0)), Err(LoopError::Config(_))));
    }
}
