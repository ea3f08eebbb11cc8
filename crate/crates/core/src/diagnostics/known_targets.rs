use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::epsilon::calibrate_epsilon;
use super::w2::{empirical_w2, SampleSet};
use crate::error::{FpmdError, Result};
use crate::policy::{Actor, FlowBatch, FlowPolicy, GaussianPrior};
use crate::tensor::{Adam, AdamConfig, StepOutcome};

const POINT_MASS: f64 = 0.7;
const GAUSSIAN_MEAN: f64 = 0.5;
const GAUSSIAN_STD: f64 = 0.2;
const MIXTURE_CENTER: f64 = 0.6;
const MIXTURE_STD: f64 = 0.1;

/// Target distributions with known samples and variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowFixture {
    /// All mass at 0.7.
    PointMass,
    /// `N(0.5, 0.2²)`.
    Gaussian,
    /// Equal mixture of `N(±(0.6, 0.6), 0.1²·I)`.
    Mixture,
}

impl FlowFixture {
    pub const ALL: [FlowFixture; 3] = [FlowFixture::PointMass, FlowFixture::Gaussian, FlowFixture::Mixture];

    pub fn name(self) -> &'static str {
        match self {
            FlowFixture::PointMass => "point_mass",
            FlowFixture::Gaussian => "gaussian",
            FlowFixture::Mixture => "mixture",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            FlowFixture::Mixture => 2,
            _ => 1,
        }
    }

    /// Trace of the covariance.
    pub fn variance(self) -> f64 {
        match self {
            FlowFixture::PointMass => 0.0,
            FlowFixture::Gaussian => GAUSSIAN_STD * GAUSSIAN_STD,
            FlowFixture::Mixture => 2.0 * (MIXTURE_STD * MIXTURE_STD + MIXTURE_CENTER * MIXTURE_CENTER),
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Array2<f64> {
        let mut normal = || -> f64 { StandardNormal.sample(rng) };
        match self {
            FlowFixture::PointMass => Array2::from_elem((n, 1), POINT_MASS),
            FlowFixture::Gaussian => {
                Array2::from_shape_simple_fn((n, 1), || GAUSSIAN_MEAN + GAUSSIAN_STD * normal())
            }
            FlowFixture::Mixture => {
                let mut out = Array2::zeros((n, 2));
                for mut row in out.rows_mut() {
                    let sign = if normal() < 0.0 { -1.0 } else { 1.0 };
                    for x in row.iter_mut() {
                        *x = sign * MIXTURE_CENTER + MIXTURE_STD * normal();
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTrainConfig {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub steps: usize,
    /// Learning rate decays linearly from `lr` to `lr_final`.
    pub lr: f64,
    pub lr_final: f64,
    /// Points per sample set in the report.
    pub samples: usize,
    pub seed: u64,
}

impl Default for FlowTrainConfig {
    fn default() -> Self {
        FlowTrainConfig {
            hidden: vec![64; 4],
            batch_size: 512,
            steps: 30_000,
            lr: 1e-3,
            lr_final: 1e-7,
            samples: 512,
            seed: 0,
        }
    }
}

/// Plain flow matching onto a fixture, with a single dummy state fixed at 0
/// and a standard normal prior.
pub fn train_unconditional_flow(fixture: FlowFixture, config: &FlowTrainConfig) -> Result<FlowPolicy<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let prior = GaussianPrior::isotropic(fixture.dim(), 0.0, 1.0)?;
    let mut policy = FlowPolicy::<f32>::new(1, &config.hidden, prior, &mut rng)?;
    let mut adam = Adam::new(policy.net(), AdamConfig::with_lr(config.lr));
    let n = config.batch_size;
    let ones = vec![1.0f32; n];
    for step in 0..config.steps {
        let frac = step as f64 / config.steps.max(1) as f64;
        adam.config.lr = config.lr + (config.lr_final - config.lr) * frac;
        let batch = FlowBatch {
            states: Array2::zeros((n, 1)),
            a0: policy.prior().sample(n, &mut rng),
            a1: fixture.sample(n, &mut rng).mapv(|x| x as f32),
            t: Array1::from_shape_fn(n, |_| rng.random::<f32>()),
        };
        let out = policy.weighted_cfm_loss(&batch, &ones)?;
        if !out.loss.is_finite() || adam.step(policy.net_mut(), &out.grads) == StepOutcome::SkippedNonFinite {
            return Err(FpmdError::Diverged {
                iter: step as u64,
                message: format!("{} fixture flow training", fixture.name()),
            });
        }
    }
    Ok(policy)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTargetReport {
    pub fixture: FlowFixture,
    pub dim: usize,
    /// Analytic trace of the target covariance.
    pub target_variance: f64,
    /// Trace of the covariance of the K=40 sample set.
    pub fine_variance: f64,
    pub w2_k20_to_truth: f64,
    pub w2_k1_to_truth: f64,
    /// Squared W2 between one-step samples and K=40 samples.
    pub w2_sq_one_vs_fine: f64,
    pub epsilon_est: f64,
    /// `fine_variance + epsilon_est − w2_sq_one_vs_fine`.
    pub margin: f64,
    pub bound_holds: bool,
    /// Largest `‖K=1 sample − K=20 sample‖` over shared prior draws.
    pub max_paired_gap: f64,
}

/// Trains one flow per fixture and compares its one-step and multi-step
/// samples with each other and with fresh draws from the target.
pub fn validate_flow_known_targets(config: &FlowTrainConfig) -> Result<Vec<FlowTargetReport>> {
    FlowFixture::ALL
        .iter()
        .map(|&fixture| {
            let policy = train_unconditional_flow(fixture, config)?;
            flow_target_report(fixture, &policy, config)
        })
        .collect()
}

pub fn flow_target_report(fixture: FlowFixture, policy: &FlowPolicy<f32>, config: &FlowTrainConfig) -> Result<FlowTargetReport> {
    let n = config.samples;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7e57);
    let states = Array2::<f32>::zeros((n, 1));
    let sample = |a0: &Array2<f32>, steps: usize| -> Result<Array2<f64>> {
        Ok(policy.transport(states.view(), a0.view(), steps)?.mapv(|x| x as f64))
    };
    let a0 = policy.prior().sample(n, &mut rng);
    let one = sample(&a0, 1)?;
    let k20 = sample(&a0, 20)?;
    let fine = sample(&policy.prior().sample(n, &mut rng), 40)?;
    let truth = SampleSet::new(fixture.sample(n, &mut rng), "target")?;

    let one_set = SampleSet::new(one.clone(), "K=1")?;
    let k20_set = SampleSet::new(k20.clone(), "K=20")?;
    let fine_set = SampleSet::new(fine, "K=40")?;
    let eps = calibrate_epsilon(n, fixture.dim(), policy.prior().mean_variance(), config.seed)?;
    let w2_sq = empirical_w2(&one_set, &fine_set)?.squared;
    let fine_variance = fine_set.total_variance();
    let margin = fine_variance + eps.value - w2_sq;
    let max_paired_gap = one
        .rows()
        .into_iter()
        .zip(k20.rows())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok(FlowTargetReport {
        fixture,
        dim: fixture.dim(),
        target_variance: fixture.variance(),
        fine_variance,
        w2_k20_to_truth: empirical_w2(&k20_set, &truth)?.distance(),
        w2_k1_to_truth: empirical_w2(&one_set, &truth)?.distance(),
        w2_sq_one_vs_fine: w2_sq,
        epsilon_est: eps.value,
        margin,
        bound_holds: margin >= 0.0,
        max_paired_gap,
    })
}
