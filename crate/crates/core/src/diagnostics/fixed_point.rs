use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::policy::{
    fixed_point_iterate_scheduled, Actor, FixedPointBatch, GaussianPrior, MeanFlowConvention, MeanFlowPolicy,
};
use crate::tensor::{Adam, AdamConfig};

/// The first fit's learning rate decays linearly to this fraction of `lr`.
const FIRST_FIT_FLOOR: f64 = 0.001;

/// Known instantaneous velocity fields with closed-form average velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticField {
    /// `v(a, t) = c`.
    Constant(f64),
    /// `v(a, t) = a`.
    Linear,
}

impl AnalyticField {
    pub fn velocity(self, a: f64) -> f64 {
        match self {
            AnalyticField::Constant(c) => c,
            AnalyticField::Linear => a,
        }
    }
}

/// Average velocity over `[r, t]` along the trajectory that passes through
/// `a` at time `t`: `c` for the constant field, `a(1 − e^{r−t})/(t − r)` for
/// the linear one.
pub fn analytic_average_velocity(field: AnalyticField, a: f64, r: f64, t: f64) -> f64 {
    match field {
        AnalyticField::Constant(c) => c,
        AnalyticField::Linear => a * (1.0 - (r - t).exp()) / (t - r),
    }
}

/// Probe points: 21 values of `a` in `[−1, 1]` and the 45 ordered pairs of
/// 10 equally spaced times in `[0, 1]`, so `t − r ∈ [1/9, 1]`.
pub fn probe_grid() -> (Vec<f64>, Vec<(f64, f64)>) {
    let a = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
    let times: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
    let mut pairs = Vec::with_capacity(45);
    for i in 0..times.len() {
        for j in i + 1..times.len() {
            pairs.push((times[i], times[j]));
        }
    }
    (a, pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointConfig {
    pub hidden: Vec<usize>,
    pub outer_iterations: usize,
    /// Gradient steps of the first outer iteration, which fits `T(u_0)`.
    pub first_grad_steps: usize,
    /// Initial learning rate of the first fit, decayed linearly to
    /// `first_lr · FIRST_FIT_FLOOR`.
    pub first_lr: f64,
    /// Gradient steps of every later outer iteration.
    pub grad_steps: usize,
    pub train_points: usize,
    /// Learning rate of outer iteration `n` (from 1) is `lr · lr_decay^(n−1)`.
    pub lr: f64,
    pub lr_decay: f64,
    /// Size of the fixed training set; every gradient step uses all of it.
    /// Points are drawn uniformly from `[−a_range, a_range]`.
    pub a_range: f64,
    pub seed: u64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            hidden: vec![64, 64],
            outer_iterations: 30,
            first_grad_steps: 2000,
            first_lr: 3e-3,
            grad_steps: 200,
            train_points: 512,
            lr: 1e-3,
            lr_decay: 0.85,
            a_range: 1.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub field: AnalyticField,
    /// Sup-norm error against the analytic average velocity after each outer
    /// iteration.
    pub sup_errors: Vec<f64>,
    /// `‖u_n − u_{n−1}‖_∞` on the probe grid, `n ≥ 1`, with `u_0` the
    /// all-zero initial field.
    pub step_norms: Vec<f64>,
    /// `‖u_{n+1} − u_n‖ / ‖u_n − u_{n−1}‖` for `n = 1, 2, …`.
    pub contraction_ratios: Vec<f64>,
    pub final_sup_error: f64,
    /// Every contraction ratio from `n = 2` on is below 1.
    pub contracting: bool,
}

/// Runs the mean-flow fixed-point iteration for a known field under the
/// paper-literal convention, starting from `u_0 ≡ 0`.
///
/// Every outer iteration is a fresh regression (new optimizer state) onto the
/// operator applied to the previous iterate, over one fixed training set.
/// Later iterations take few enough steps at a decaying learning rate that
/// they only partly fit their targets, which damps the iteration.
pub fn validate_meanflow_fixed_point(
    field: AnalyticField,
    config: &FixedPointConfig,
) -> Result<FixedPointReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let prior = GaussianPrior::isotropic(1, 0.0, 1.0)?;
    let mut policy = MeanFlowPolicy::<f64>::new(
        1,
        &config.hidden,
        prior,
        MeanFlowConvention::PaperLiteral,
        &mut rng,
    )?;
    policy.net_mut().zero_output_layer();

    let (grid_a, grid_rt) = probe_grid();
    let rows = grid_a.len() * grid_rt.len();
    let mut probe_points = Array2::zeros((rows, 1));
    let (mut probe_r, mut probe_t) = (Vec::with_capacity(rows), Vec::with_capacity(rows));
    let mut exact = Vec::with_capacity(rows);
    for (k, (&a, &(r, t))) in grid_a
        .iter()
        .flat_map(|a| grid_rt.iter().map(move |rt| (a, rt)))
        .enumerate()
    {
        probe_points[[k, 0]] = a;
        probe_r.push(r);
        probe_t.push(t);
        exact.push(analytic_average_velocity(field, a, r, t));
    }
    let probe_states = Array2::zeros((rows, 1));
    let evaluate = |p: &MeanFlowPolicy<f64>| -> Result<Vec<f64>> {
        Ok(p.avg_velocity_batch(probe_states.view(), probe_points.view(), &probe_r, &probe_t)?
            .into_raw_vec_and_offset()
            .0)
    };
    let sup = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let b = config.train_points;
    let points = Array2::from_shape_fn((b, 1), |_| rng.random_range(-config.a_range..=config.a_range));
    let (mut r, mut t) = (Array1::zeros(b), Array1::zeros(b));
    for i in 0..b {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        r[i] = x.min(y);
        t[i] = x.max(y);
    }
    let data = FixedPointBatch {
        states: Array2::zeros((b, 1)),
        velocity: points.mapv(|a| field.velocity(a)),
        points,
        r,
        t,
    };

    let mut previous = evaluate(&policy)?;
    let (mut sup_errors, mut step_norms) = (Vec::new(), Vec::new());
    for n in 1..=config.outer_iterations {
        let mut adam = Adam::new(policy.net(), AdamConfig::with_lr(config.lr));
        let (steps, lr) = if n == 1 {
            (config.first_grad_steps, config.first_lr)
        } else {
            (config.grad_steps, config.lr * config.lr_decay.powi(n as i32 - 1))
        };
        let schedule = |k: usize| {
            if n == 1 {
                lr * (1.0 - (1.0 - FIRST_FIT_FLOOR) * k as f64 / steps as f64)
            } else {
                lr
            }
        };
        let (next, _) = fixed_point_iterate_scheduled(&policy, &mut adam, steps, schedule, |_| Ok(data.clone()))?;
        policy = next;
        let current = evaluate(&policy)?;
        step_norms.push(sup(&current, &previous));
        sup_errors.push(sup(&current, &exact));
        previous = current;
    }
    let contraction_ratios: Vec<f64> = step_norms.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(FixedPointReport {
        field,
        final_sup_error: *sup_errors.last().unwrap_or(&f64::INFINITY),
        contracting: contraction_ratios.iter().skip(1).all(|&q| q < 1.0),
        sup_errors,
        step_norms,
        contraction_ratios,
    })
}
