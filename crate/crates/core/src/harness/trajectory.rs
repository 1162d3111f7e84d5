use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlInput, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: VehicleState,
    /// Control applied from this sample's time onward.
    pub control: ControlInput,
}

impl Sample {
    pub fn time(&self) -> f64 {
        self.state.time
    }
}

/// Fixed-step rollout log. Immutable once produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    samples: Vec<Sample>,
    pub collision: bool,
    pub truncated_at: Option<f64>,
}

impl Trajectory {
    /// `collision = true` marks the last sample as the impact instant.
    pub fn from_samples(samples: Vec<Sample>, collision: bool) -> Self {
        let truncated_at = if collision { samples.last().map(Sample::time) } else { None };
        Self { samples, collision, truncated_at }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Elapsed simulated time between the first and last sample.
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.time() - a.time(),
            _ => 0.0,
        }
    }
}
