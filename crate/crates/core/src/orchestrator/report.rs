use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BatchRow, IterationRecord};
use crate::harness::stats::{mean, median, population_std};
use crate::harness::TrialMetrics;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("result set '{0}' is empty")]
    EmptyResults(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub values: Vec<f64>,
}

/// Metric-by-column table, one column per result set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub labels: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, metric: &str) -> Option<&[f64]> {
        self.rows.iter().find(|r| r.metric == metric).map(|r| r.values.as_slice())
    }

    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.metric.len()).max().unwrap_or(6).max(6) + 2;
        let mut s = format!("{:<width$}", "Metric");
        for l in &self.labels {
            s.push_str(&format!("{l:>16}"));
        }
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!("{:<width$}", r.metric));
            for v in &r.values {
                s.push_str(&format!("{v:>16.2}"));
            }
            s.push('\n');
        }
        s
    }
}

pub const SHARE_THRESHOLDS_DEG: [f64; 2] = [3.0, 7.0];

fn share_below(errors: &[f64], threshold: f64) -> f64 {
    100.0 * errors.iter().filter(|&&e| e <= threshold).count() as f64 / errors.len() as f64
}

fn column(set: &[TrialMetrics]) -> Vec<f64> {
    let err: Vec<f64> = set.iter().map(|m| m.angle_error).collect();
    let avg = |f: fn(&TrialMetrics) -> f64| mean(&set.iter().map(f).collect::<Vec<_>>()).unwrap_or(0.0);
    let mut col = vec![
        mean(&err).unwrap_or(0.0),
        median(&err).unwrap_or(0.0),
        err.iter().copied().fold(f64::INFINITY, f64::min),
        err.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        population_std(&err).unwrap_or(0.0),
        100.0 * set.iter().filter(|m| m.success).count() as f64 / set.len() as f64,
        avg(|m| m.mean_jerk),
        avg(|m| m.max_jerk),
        avg(|m| m.mean_yaw_rate),
        avg(|m| m.steering_smoothness),
        avg(|m| m.execution_time),
    ];
    col.extend(SHARE_THRESHOLDS_DEG.iter().map(|&t| share_below(&err, t)));
    col
}

const ROW_NAMES: [&str; 13] = [
    "Mean angle error (deg)",
    "Median angle error (deg)",
    "Min angle error (deg)",
    "Max angle error (deg)",
    "Std dev angle error (deg)",
    "Success rate (%)",
    "Mean jerk (m/s^3)",
    "Avg max jerk (m/s^3)",
    "Mean yaw rate (deg/s)",
    "Steering smoothness (1/deg)",
    "Avg execution time (s)",
    "Share <= 3 deg (%)",
    "Share <= 7 deg (%)",
];

pub fn summarize(sets: &[(String, Vec<TrialMetrics>)]) -> Result<ComparisonTable, ReportError> {
    let mut columns = Vec::with_capacity(sets.len());
    for (label, set) in sets {
        if set.is_empty() {
            return Err(ReportError::EmptyResults(label.clone()));
        }
        columns.push(column(set));
    }
    let rows = ROW_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| ComparisonRow { metric: name.to_string(), values: columns.iter().map(|c| c[i]).collect() })
        .collect();
    Ok(ComparisonTable { labels: sets.iter().map(|s| s.0.clone()).collect(), rows })
}

pub fn summarize_comparison(
    a: &[TrialMetrics],
    b: &[TrialMetrics],
    labels: (&str, &str),
) -> Result<ComparisonTable, ReportError> {
    summarize(&[(labels.0.to_string(), a.to_vec()), (labels.1.to_string(), b.to_vec())])
}

#[derive(Serialize)]
struct IterationRow {
    trial: usize,
    k: u32,
    implemented: bool,
    angle_error_deg: Option<f64>,
    signed_error_deg: Option<f64>,
    collision: Option<bool>,
    mean_jerk: Option<f64>,
    cost: Option<f64>,
    wall_ms: f64,
}

/// One row per iteration; `wall_ms` is the only non-deterministic column.
pub fn write_iteration_csv<'a, W: Write>(
    rows: impl IntoIterator<Item = (usize, &'a IterationRecord)>,
    out: W,
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    for (trial, r) in rows {
        w.serialize(IterationRow {
            trial,
            k: r.k,
            implemented: r.implemented,
            angle_error_deg: r.metrics.map(|m| m.angle_error),
            signed_error_deg: r.metrics.map(|m| m.signed_heading_error),
            collision: r.metrics.map(|m| m.collision),
            mean_jerk: r.metrics.map(|m| m.mean_jerk),
            cost: r.cost,
            wall_ms: (r.wall_ms * 1e3).round() / 1e3,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct LearningRow {
    batch: usize,
    trials: usize,
    implemented: usize,
    rejected: usize,
    mean_angle_error_deg: Option<f64>,
    min_angle_error_deg: Option<f64>,
    success_rate_pct: f64,
}

pub fn write_learning_csv<W: Write>(rows: &[BatchRow], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(LearningRow {
            batch: r.batch,
            trials: r.trials,
            implemented: r.implemented,
            rejected: r.rejected,
            mean_angle_error_deg: r.mean_angle_error,
            min_angle_error_deg: r.min_angle_error,
            success_rate_pct: r.success_rate,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(angle_error: f64) -> TrialMetrics {
        TrialMetrics {
            angle_error,
            signed_heading_error: -angle_error,
            collision: false,
            mean_jerk: 1.0,
            max_jerk: 2.0,
            mean_yaw_rate: 20.0,
            steering_smoothness: 5.0,
            execution_time: 12.0,
            success: angle_error <= 10.0,
        }
    }

    #[test]
    fn arithmetic_rows() {
        let t = summarize(&[("a".into(), vec![m(0.0), m(10.0)])]).unwrap();
        assert_eq!(t.row("Mean angle error (deg)").unwrap(), &[5.0]);
        assert_eq!(t.row("Min angle error (deg)").unwrap(), &[0.0]);
        assert_eq!(t.row("Max angle error (deg)").unwrap(), &[10.0]);
        assert_eq!(t.row("Std dev angle error (deg)").unwrap(), &[5.0]);
        let shares = summarize(&[("b".into(), [2.0, 5.0, 8.0, 9.0].map(m).to_vec())]).unwrap();
        assert_eq!(shares.row("Share <= 7 deg (%)").unwrap(), &[50.0]);
        assert_eq!(shares.row("Share <= 3 deg (%)").unwrap(), &[25.0]);
    }

    #[test]
    fn identical_sets_give_identical_columns() {
        let set = [1.0, 4.0, 12.0].map(m).to_vec();
        let t = summarize_comparison(&set, &set, ("sedan", "sports_coupe")).unwrap();
        assert!(t.rows.iter().all(|r| r.values[0] == r.values[1]));
        assert_eq!(t.rows.len(), 13);
        assert!(t.render().contains("sports_coupe"));
        assert!(summarize_comparison(&set, &[], ("a", "b")).is_err());
    }

    #[test]
    fn learning_csv_header() {
        let rows = vec![BatchRow {
            batch: 1,
            trials: 20,
            implemented: 19,
            rejected: 1,
            mean_angle_error: Some(2.5),
            min_angle_error: Some(0.5),
            success_rate: 95.0,
        }];
        let mut buf = Vec::new();
        write_learning_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "batch,trials,implemented,rejected,mean_angle_error_deg,min_angle_error_deg,success_rate_pct"
        );
        assert_eq!(text.lines().count(), 2);
    }
}
