//! Empirical 2-Wasserstein distances between point clouds.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{FpmdError, Result};

/// Largest set size solved by exact assignment.
pub const EXACT_MAX: usize = 512;
pub const SLICED_PROJECTIONS: usize = 128;
const SLICED_SEED: u64 = 0x51ced;

/// A finite sample of `n ≥ 2` points in `d` dimensions, with a label naming
/// where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Array2<f64>,
    label: String,
}

impl SampleSet {
    pub fn new(points: Array2<f64>, label: impl Into<String>) -> Result<Self> {
        if points.nrows() < 2 || points.ncols() == 0 {
            return Err(FpmdError::InvalidArgument(format!(
                "sample set needs at least 2 points of dimension >= 1, got {:?}",
                points.dim()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(FpmdError::NonFinite("sample set".into()));
        }
        Ok(SampleSet {
            points,
            label: label.into(),
        })
    }

    pub fn from_f32(points: &Array2<f32>, label: impl Into<String>) -> Result<Self> {
        Self::new(points.mapv(|x| x as f64), label)
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Trace of the (population) covariance matrix.
    pub fn total_variance(&self) -> f64 {
        let mean = self.points.mean_axis(Axis(0)).expect("n >= 2");
        let n = self.len() as f64;
        self.points
            .rows()
            .into_iter()
            .map(|r| (&r - &mean).mapv(|x| x * x).sum())
            .sum::<f64>()
            / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum W2Method {
    SortedExact,
    AssignmentExact,
    SlicedApproximate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct W2Estimate {
    pub squared: f64,
    pub method: W2Method,
}

impl W2Estimate {
    pub fn distance(&self) -> f64 {
        self.squared.max(0.0).sqrt()
    }

    pub fn is_exact(&self) -> bool {
        self.method != W2Method::SlicedApproximate
    }
}

/// `d = 1`: exact through sorted quantiles. `d ≥ 2` with equal sizes up to
/// [`EXACT_MAX`]: exact optimal assignment. Otherwise sliced W2 over
/// [`SLICED_PROJECTIONS`] fixed random directions.
pub fn empirical_w2(a: &SampleSet, b: &SampleSet) -> Result<W2Estimate> {
    if a.dim() != b.dim() {
        return Err(FpmdError::shape("w2 sample dimension", a.dim(), b.dim()));
    }
    if a.dim() == 1 {
        return Ok(W2Estimate {
            squared: sorted_w2_sq(a.points.column(0), b.points.column(0)),
            method: W2Method::SortedExact,
        });
    }
    if a.len() == b.len() && a.len() <= EXACT_MAX {
        return Ok(W2Estimate {
            squared: assignment_w2_sq(&a.points, &b.points),
            method: W2Method::AssignmentExact,
        });
    }
    Ok(W2Estimate {
        squared: sliced_w2_sq(&a.points, &b.points),
        method: W2Method::SlicedApproximate,
    })
}

/// Squared W2 between two 1-D empirical measures with uniform weights,
/// integrating the squared quantile difference over the merged breakpoints.
pub fn sorted_w2_sq(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    if xs.len() == ys.len() {
        return xs.iter().zip(&ys).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / xs.len() as f64;
    }
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let (mut u, mut total) = (0.0, 0.0);
    while i < n && j < m {
        let next_i = (i + 1) as f64 / n as f64;
        let next_j = (j + 1) as f64 / m as f64;
        let next = next_i.min(next_j);
        total += (next - u) * (xs[i] - ys[j]).powi(2);
        u = next;
        if next_i <= next {
            i += 1;
        }
        if next_j <= next {
            j += 1;
        }
    }
    total
}

/// Mean squared distance under the optimal one-to-one assignment.
pub fn assignment_w2_sq(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let cost = Array2::from_shape_fn((n, n), |(i, j)| {
        a.row(i)
            .iter()
            .zip(b.row(j))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
    });
    let assignment = min_cost_assignment(&cost);
    assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[[i, j]])
        .sum::<f64>()
        / n as f64
}

/// Shortest augmenting path solver for the square assignment problem,
/// `O(n³)`. Returns `col[i]`, the column assigned to row `i`.
pub fn min_cost_assignment(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    // 1-based potentials; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0usize; n];
    for j in 1..=n {
        col[row_of[j] - 1] = j - 1;
    }
    col
}

/// Mean over fixed random unit directions of the 1-D squared W2 between
/// the projections.
pub fn sliced_w2_sq(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let d = a.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(SLICED_SEED);
    let mut total = 0.0;
    for _ in 0..SLICED_PROJECTIONS {
        let mut dir: Array1<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = dir.dot(&dir).sqrt();
        dir /= norm;
        total += sorted_w2_sq(a.dot(&dir).view(), b.dot(&dir).view());
    }
    total / SLICED_PROJECTIONS as f64
}
