//! Deterministic stand-in for the driver model: seeds with the template and
//! refines proportionally to the last heading error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::Value;

use super::{AgentBackend, AgentError, GenerationRequest, CTX_PREVIOUS_METRICS, CTX_PREVIOUS_PLAN};
use crate::harness::{TrialMetrics, TARGET_ROTATION_DEG};
use crate::plan::{jturn_template, ManeuverPlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineGains {
    pub gain: f64,
    /// Largest relative change per step.
    pub cap: f64,
    pub collision_throttle_scale: f64,
    pub collision_brake_scale: f64,
}

impl Default for RefineGains {
    fn default() -> Self {
        Self { gain: 0.5, cap: 0.2, collision_throttle_scale: 0.85, collision_brake_scale: 1.10 }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn scripted_refine(prev: &ManeuverPlan, metrics: &TrialMetrics) -> ManeuverPlan {
    scripted_refine_with(prev, metrics, &RefineGains::default())
}

/// Phase II is index 1 and phase III index 2; shorter plans only get the
/// adjustments that have a phase to act on.
pub fn scripted_refine_with(prev: &ManeuverPlan, metrics: &TrialMetrics, g: &RefineGains) -> ManeuverPlan {
    let mut plan = prev.clone();
    let e = metrics.signed_heading_error;
    if e != 0.0 {
        let scale = (1.0 - g.gain * e / TARGET_ROTATION_DEG).clamp(1.0 - g.cap, 1.0 + g.cap);
        let nudge = -g.gain * sign(e) * (e.abs() / TARGET_ROTATION_DEG).min(g.cap);
        if let Some(p) = plan.phases.get_mut(1) {
            p.duration *= scale;
        }
        for i in [1, 2] {
            if let Some(p) = plan.phases.get_mut(i) {
                let s = if p.steering == 0.0 { 1.0 } else { sign(p.steering) };
                p.steering = s * (p.steering.abs() + nudge).clamp(0.0, 1.0);
            }
        }
    }
    if metrics.collision {
        for p in &mut plan.phases {
            p.throttle *= g.collision_throttle_scale;
        }
        if let Some(p) = plan.phases.last_mut() {
            p.brake *= g.collision_brake_scale;
        }
    }
    for p in &mut plan.phases {
        p.throttle = p.throttle.clamp(0.0, 1.0);
        p.steering = p.steering.clamp(-1.0, 1.0);
        p.brake = p.brake.clamp(0.0, 1.0);
    }
    plan
}

/// Template seed plus [`scripted_refine`] on the previous plan when the
/// request carries one. `jitter` perturbs the seed plan's phase II duration
/// by up to ±jitter (relative).
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    seed: u64,
    jitter: f64,
    template: ManeuverPlan,
    gains: RefineGains,
}

impl ScriptedBackend {
    pub fn new(seed: u64, jitter: f64) -> Self {
        Self { seed, jitter, template: jturn_template(), gains: RefineGains::default() }
    }

    pub fn with_template(mut self, template: ManeuverPlan) -> Self {
        self.template = template;
        self
    }

    pub fn with_gains(mut self, gains: RefineGains) -> Self {
        self.gains = gains;
        self
    }

    pub fn seed_plan(&self) -> ManeuverPlan {
        let mut plan = self.template.clone();
        if self.jitter > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let u: f64 = rng.random_range(-1.0..=1.0);
            if let Some(p) = plan.phases.get_mut(1) {
                p.duration *= 1.0 + self.jitter * u;
            }
        }
        plan
    }
}

impl AgentBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn generate(&mut self, request: &GenerationRequest) -> Result<Value, AgentError> {
        let prev = request.context.get(CTX_PREVIOUS_PLAN);
        let metrics = request.context.get(CTX_PREVIOUS_METRICS);
        let plan = match (prev, metrics) {
            (Some(p), Some(m)) => {
                let p = ManeuverPlan::from_value(p).map_err(|e| AgentError::SchemaViolation(e.to_string()))?;
                let m = TrialMetrics::deserialize(m).map_err(|e| AgentError::SchemaViolation(e.to_string()))?;
                scripted_refine_with(&p, &m, &self.gains)
            }
            _ => self.seed_plan(),
        };
        Ok(plan.to_value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(e: f64, collision: bool) -> TrialMetrics {
        TrialMetrics {
            angle_error: e.abs(),
            signed_heading_error: e,
            collision,
            mean_jerk: 1.0,
            max_jerk: 1.0,
            mean_yaw_rate: 0.0,
            steering_smoothness: 0.0,
            execution_time: 0.0,
            success: false,
        }
    }

    #[test]
    fn fixed_point_at_zero_error() {
        let t = jturn_template();
        assert_eq!(scripted_refine(&t, &metrics(0.0, false)), t);
    }

    #[test]
    fn overshoot_softens_phase_two() {
        let t = jturn_template();
        let r = scripted_refine(&t, &metrics(12.0, false));
        assert!(r.phases[1].steering.abs() < t.phases[1].steering.abs());
        assert!(r.phases[2].steering.abs() < t.phases[2].steering.abs());
        assert!(r.phases[1].duration < t.phases[1].duration);
        assert_eq!(r.phases[1].steering.signum(), t.phases[1].steering.signum());
        // 1 − 0.5·12/180
        assert!((r.phases[1].duration / t.phases[1].duration - (1.0 - 6.0 / 180.0)).abs() < 1e-12);
    }

    #[test]
    fn undershoot_lengthens_phase_two_with_cap() {
        let t = jturn_template();
        let r = scripted_refine(&t, &metrics(-170.0, false));
        assert!((r.phases[1].duration / t.phases[1].duration - 1.2).abs() < 1e-12);
    }

    #[test]
    fn collision_cuts_throttle_and_raises_brake() {
        let t = jturn_template();
        let r = scripted_refine(&t, &metrics(0.0, true));
        for (a, b) in r.phases.iter().zip(&t.phases) {
            if b.throttle > 0.0 {
                assert!(a.throttle < b.throttle);
            }
        }
        assert!(r.phases[4].brake > t.phases[4].brake);
        assert!((r.phases[4].brake - t.phases[4].brake * 1.1).abs() < 1e-12);
    }

    #[test]
    fn jitter_is_seeded() {
        let a = ScriptedBackend::new(7, 0.1).seed_plan();
        let b = ScriptedBackend::new(7, 0.1).seed_plan();
        let c = ScriptedBackend::new(8, 0.1).seed_plan();
        assert_eq!(a, b);
        assert_ne!(a.phases[1].duration, c.phases[1].duration);
        assert_eq!(ScriptedBackend::new(8, 0.0).seed_plan(), jturn_template());
    }
}
