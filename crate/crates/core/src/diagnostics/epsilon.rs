use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::w2::{empirical_w2, SampleSet};
use crate::error::{FpmdError, Result};

/// Independent same-distribution pairs drawn per calibration.
pub const CALIBRATION_REPS: usize = 32;

/// Noise floor of the W2² estimator: two independent `n`-point draws from
/// `N(0, variance·I_d)` are compared `reps` times and the tolerance is
/// `mean + 4·sd` of the resulting estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonEstimate {
    pub n: usize,
    pub dim: usize,
    pub variance: f64,
    pub reps: usize,
    pub mean_w2_sq: f64,
    pub sd_w2_sq: f64,
    pub value: f64,
}

pub fn calibrate_epsilon(n: usize, dim: usize, variance: f64, seed: u64) -> Result<EpsilonEstimate> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(FpmdError::InvalidArgument(format!(
            "calibration variance must be positive, got {variance}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = variance.sqrt();
    let mut draw = |label: &str| {
        let pts = Array2::from_shape_simple_fn((n, dim), || {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        });
        SampleSet::new(pts, label)
    };
    let mut values = Vec::with_capacity(CALIBRATION_REPS);
    for _ in 0..CALIBRATION_REPS {
        let a = draw("calibration a")?;
        let b = draw("calibration b")?;
        values.push(empirical_w2(&a, &b)?.squared);
    }
    let reps = values.len() as f64;
    let mean = values.iter().sum::<f64>() / reps;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1.0);
    Ok(EpsilonEstimate {
        n,
        dim,
        variance,
        reps: CALIBRATION_REPS,
        mean_w2_sq: mean,
        sd_w2_sq: var.sqrt(),
        value: mean + 4.0 * var.sqrt(),
    })
}
