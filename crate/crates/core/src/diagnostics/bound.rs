use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::epsilon::calibrate_epsilon;
use super::w2::{empirical_w2, SampleSet};
use crate::error::{FpmdError, Result};
use crate::policy::Actor;
use crate::trainer::Agent;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundConfig {
    pub samples: usize,
    pub fine_steps: usize,
    pub refine_steps: usize,
    pub seed: u64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            samples: 512,
            fine_steps: 40,
            refine_steps: 80,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateBound {
    pub state: Vec<f64>,
    /// Squared W2 between one-step and fine-step samples.
    pub w2_sq: f64,
    /// Trace of the covariance of the fine-step samples.
    pub variance: f64,
    pub epsilon_est: f64,
    /// `variance + epsilon_est − w2_sq`.
    pub margin: f64,
    pub holds: bool,
    /// Squared W2 between fine and refined samples from shared prior draws.
    pub refinement_w2_sq: f64,
    /// `refinement_w2_sq ≤ epsilon_est / 10`.
    pub refinement_agrees: bool,
}

/// Compares one-step samples of a flow actor with `fine_steps` Euler samples
/// (the ground-truth proxy) at each state. The actor's outputs are not
/// clipped. Mean-flow actors have no instantaneous field to refine and are
/// rejected.
pub fn check_one_step_bound(agent: &Agent, states: &[Vec<f64>], config: &BoundConfig) -> Result<Vec<StateBound>> {
    let Agent::Flow(policy) = agent else {
        return Err(FpmdError::InvalidArgument(
            "the one-step bound check needs a velocity-field actor".into(),
        ));
    };
    let n = config.samples;
    let eps = calibrate_epsilon(n, policy.action_dim(), policy.prior().mean_variance(), config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(states.len());
    for state in states {
        if state.len() != policy.state_dim() {
            return Err(FpmdError::shape("bound-check state", policy.state_dim(), state.len()));
        }
        let s = Array2::from_shape_fn((n, state.len()), |(_, j)| state[j] as f32);
        let draw = |a0: &Array2<f32>, steps: usize, label: &str| -> Result<SampleSet> {
            let a = policy.transport(s.view(), a0.view(), steps)?;
            SampleSet::from_f32(&a, label)
        };
        let one = draw(&policy.prior().sample(n, &mut rng), 1, "one-step")?;
        let a0 = policy.prior().sample(n, &mut rng);
        let fine = draw(&a0, config.fine_steps, "fine")?;
        let refined = draw(&a0, config.refine_steps, "refined")?;
        let w2_sq = empirical_w2(&one, &fine)?.squared;
        let variance = fine.total_variance();
        let margin = variance + eps.value - w2_sq;
        let refinement_w2_sq = empirical_w2(&fine, &refined)?.squared;
        out.push(StateBound {
            state: state.clone(),
            w2_sq,
            variance,
            epsilon_est: eps.value,
            margin,
            holds: margin >= 0.0,
            refinement_w2_sq,
            refinement_agrees: refinement_w2_sq <= eps.value / 10.0,
        });
    }
    Ok(out)
}
