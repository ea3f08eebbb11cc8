use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{FpmdError, Result};
use crate::tensor::Scalar;

/// Diagonal Gaussian source distribution `a0 ~ N(μ, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> GaussianPrior<T> {
    pub fn new(mean: Vec<T>, std: Vec<T>) -> Result<Self> {
        if mean.len() != std.len() || mean.is_empty() {
            return Err(FpmdError::shape("prior", mean.len(), std.len()));
        }
        if std.iter().any(|s| !(*s > T::zero()) || !s.is_finite())
            || mean.iter().any(|m| !m.is_finite())
        {
            return Err(FpmdError::InvalidArgument(
                "prior needs finite mean and positive std".into(),
            ));
        }
        Ok(GaussianPrior { mean, std })
    }

    pub fn isotropic(dim: usize, mean: f64, std: f64) -> Result<Self> {
        Self::new(
            vec![T::from(mean).unwrap(); dim],
            vec![T::from(std).unwrap(); dim],
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Mean per-coordinate variance.
    pub fn mean_variance(&self) -> f64 {
        self.std
            .iter()
            .map(|s| s.to_f64().unwrap().powi(2))
            .sum::<f64>()
            / self.dim() as f64
    }

    pub fn sample<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Array2<T> {
        let d = self.dim();
        let mut out = Array2::zeros((rows, d));
        for mut row in out.rows_mut() {
            for j in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                row[j] = self.mean[j] + self.std[j] * T::from(z).unwrap();
            }
        }
        out
    }
}
