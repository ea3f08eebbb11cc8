//! Mean-flow actor: an average-velocity field `u(a, r, t | s)` sampled with a
//! single evaluation `a1 = a0 + u(a0, 0, 1 | s)`.
//!
//! Training regresses `u` onto the mean-flow operator applied to a frozen
//! snapshot of itself. The operator's derivative term is one forward-mode
//! directional derivative of the snapshot; the resulting target is detached,
//! so no second-order derivative of `u` is ever formed.
//!
//! Two time conventions are supported:
//!
//! * [`MeanFlowConvention::PaperLiteral`]: `u` is evaluated at the later
//!   point `a_t`, target `v − (t−r)(v·∂_a u + ∂_t u)`.
//! * [`MeanFlowConvention::ForwardFromR`]: `u` is evaluated at the earlier
//!   point `a_r`, target `v + (t−r)(v·∂_a u + ∂_r u)`. This is the convention
//!   under which `a0 + u(a0, 0, 1)` is the exact endpoint of the flow.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView2, Zip};
use rand::Rng;

use super::{importance_weights, weighted_regression, Actor, GaussianPrior, LossOutput, TIME_INPUTS};
use crate::envs::EnvSpec;
use crate::error::{FpmdError, Result};
use crate::tensor::{stop_gradient, Activation, Adam, Detached, Mlp, Scalar, StepOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanFlowConvention {
    #[default]
    PaperLiteral,
    ForwardFromR,
}

impl MeanFlowConvention {
    pub fn name(self) -> &'static str {
        match self {
            MeanFlowConvention::PaperLiteral => "paper-literal",
            MeanFlowConvention::ForwardFromR => "forward-from-r",
        }
    }
}

impl fmt::Display for MeanFlowConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeanFlowConvention {
    type Err = FpmdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-literal" => Ok(MeanFlowConvention::PaperLiteral),
            "forward-from-r" => Ok(MeanFlowConvention::ForwardFromR),
            other => Err(FpmdError::InvalidArgument(format!(
                "unknown mean-flow convention `{other}`"
            ))),
        }
    }
}

/// Distribution of `(r, t)` pairs: two independent uniforms, ordered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtSchedule {
    /// Probability that `r ≠ t`; otherwise `r` is set to `t`.
    pub distinct_prob: f64,
}

impl Default for RtSchedule {
    fn default() -> Self {
        RtSchedule { distinct_prob: 1.0 }
    }
}

impl RtSchedule {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        loop {
            let (x, y): (f64, f64) = (rng.random(), rng.random());
            let (r, t) = (x.min(y), x.max(y));
            if self.distinct_prob < 1.0 && rng.random::<f64>() >= self.distinct_prob {
                return (t, t);
            }
            if r < t {
                return (r, t);
            }
        }
    }
}

/// Actor-update batch: `a1` from one-step sampling of the pre-update policy,
/// fresh `a0`, and one `(r, t)` pair per row.
#[derive(Debug, Clone)]
pub struct MeanFlowBatch<T> {
    pub states: Array2<T>,
    pub a0: Array2<T>,
    pub a1: Array2<T>,
    pub r: Array1<T>,
    pub t: Array1<T>,
}

/// Samples for one regression onto the mean-flow operator: evaluation points,
/// their times, and the instantaneous velocity at each point (exact or
/// conditional).
#[derive(Debug, Clone)]
pub struct FixedPointBatch<T> {
    pub states: Array2<T>,
    pub points: Array2<T>,
    pub r: Array1<T>,
    pub t: Array1<T>,
    pub velocity: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFlowPolicy<T: Scalar = f32> {
    net: Mlp<T>,
    prior: GaussianPrior<T>,
    state_dim: usize,
    convention: MeanFlowConvention,
}

impl<T: Scalar> MeanFlowPolicy<T> {
    /// Tanh network over `s ⊕ a ⊕ r ⊕ t`, output layer
    /// scaled by 0.01.
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        hidden: &[usize],
        prior: GaussianPrior<T>,
        convention: MeanFlowConvention,
        rng: &mut R,
    ) -> Result<Self> {
        let action_dim = prior.dim();
        let mut sizes = vec![state_dim + action_dim + 2 * TIME_INPUTS];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        let net = Mlp::init(&sizes, Activation::Tanh, T::from(0.01).unwrap(), rng)?;
        Self::from_parts(net, prior, state_dim, convention)
    }

    pub fn from_parts(
        net: Mlp<T>,
        prior: GaussianPrior<T>,
        state_dim: usize,
        convention: MeanFlowConvention,
    ) -> Result<Self> {
        let expected_in = state_dim + prior.dim() + 2 * TIME_INPUTS;
        if net.in_dim() != expected_in {
            return Err(FpmdError::shape("mean-flow net input", expected_in, net.in_dim()));
        }
        if net.out_dim() != prior.dim() {
            return Err(FpmdError::shape("mean-flow net output", prior.dim(), net.out_dim()));
        }
        Ok(MeanFlowPolicy {
            net,
            prior,
            state_dim,
            convention,
        })
    }

    pub fn convention(&self) -> MeanFlowConvention {
        self.convention
    }

    pub fn net_mut(&mut self) -> &mut Mlp<T> {
        &mut self.net
    }

    fn action_slot(&self) -> std::ops::Range<usize> {
        self.state_dim..self.state_dim + self.prior.dim()
    }

    fn r_slot(&self) -> std::ops::Range<usize> {
        let start = self.state_dim + self.prior.dim();
        start..start + TIME_INPUTS
    }

    fn t_slot(&self) -> std::ops::Range<usize> {
        let start = self.state_dim + self.prior.dim() + TIME_INPUTS;
        start..start + TIME_INPUTS
    }

    /// Network input rows `s ⊕ a ⊕ r ⊕ t`.
    pub fn inputs(
        &self,
        states: ArrayView2<'_, T>,
        actions: ArrayView2<'_, T>,
        r: &[T],
        t: &[T],
    ) -> Result<Array2<T>> {
        let rows = states.nrows();
        let (ds, da) = (self.state_dim, self.prior.dim());
        if states.ncols() != ds {
            return Err(FpmdError::shape("mean-flow states", ds, states.ncols()));
        }
        if actions.dim() != (rows, da) {
            return Err(FpmdError::shape(
                "mean-flow actions",
                format!("{:?}", (rows, da)),
                format!("{:?}", actions.dim()),
            ));
        }
        if r.len() != rows || t.len() != rows {
            return Err(FpmdError::shape("mean-flow times", rows, r.len().min(t.len())));
        }
        let mut x = Array2::zeros((rows, ds + da + 2 * TIME_INPUTS));
        x.slice_mut(s![.., ..ds]).assign(&states);
        x.slice_mut(s![.., ds..ds + da]).assign(&actions);
        let (rs, ts) = (self.r_slot(), self.t_slot());
        for i in 0..rows {
            let (ri, ti) = (r[i].to_f64().unwrap(), t[i].to_f64().unwrap());
            if !(0.0 <= ri && ri <= ti && ti <= 1.0) {
                return Err(FpmdError::InvalidArgument(format!(
                    "need 0 <= r <= t <= 1, got r={ri}, t={ti}"
                )));
            }
            x[[i, rs.start]] = r[i];
            x[[i, ts.start]] = t[i];
        }
        Ok(x)
    }

    pub fn avg_velocity_batch(
        &self,
        states: ArrayView2<'_, T>,
        actions: ArrayView2<'_, T>,
        r: &[T],
        t: &[T],
    ) -> Result<Array2<T>> {
        let x = self.inputs(states, actions, r, t)?;
        self.net.forward(x.view())
    }

    /// `u(a, r, t | s)` for a single state.
    pub fn avg_velocity(&self, state: &[T], action: &[T], r: T, t: T) -> Result<Vec<T>> {
        let s = ArrayView2::from_shape((1, state.len()), state)
            .map_err(|_| FpmdError::shape("mean-flow state", self.state_dim, state.len()))?;
        let a = ArrayView2::from_shape((1, action.len()), action)
            .map_err(|_| FpmdError::shape("mean-flow action", self.prior.dim(), action.len()))?;
        Ok(self
            .avg_velocity_batch(s, a, &[r], &[t])?
            .into_raw_vec_and_offset()
            .0)
    }

    /// `a1 = a0 + u(a0, 0, 1 | s)`, one network evaluation per row.
    pub fn one_step(&self, states: ArrayView2<'_, T>, a0: ArrayView2<'_, T>) -> Result<Array2<T>> {
        let rows = states.nrows();
        let u = self.avg_velocity_batch(states, a0, &vec![T::zero(); rows], &vec![T::one(); rows])?;
        Ok(&a0 + &u)
    }

    /// Prior draw, one-step transport, clip to the action bounds.
    pub fn one_step_sample<R: Rng + ?Sized>(
        &self,
        state: &[T],
        spec: &EnvSpec,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let s = ArrayView2::from_shape((1, state.len()), state)
            .map_err(|_| FpmdError::shape("mean-flow state", self.state_dim, state.len()))?;
        let a0 = self.prior.sample(1, rng);
        let a1 = self.one_step(s, a0.view())?;
        let mut action: Vec<f64> = a1.iter().map(|x| x.to_f64().unwrap()).collect();
        spec.clip_action(&mut action);
        Ok(action)
    }

    /// Points on the straight path `(1−τ)·a0 + τ·a1` at which `u` is trained:
    /// `τ = t` for the paper-literal convention, `τ = r` otherwise.
    pub fn anchor_points(&self, batch: &MeanFlowBatch<T>) -> Array2<T> {
        let tau = match self.convention {
            MeanFlowConvention::PaperLiteral => &batch.t,
            MeanFlowConvention::ForwardFromR => &batch.r,
        };
        let mut out = batch.a1.clone();
        Zip::from(out.rows_mut())
            .and(batch.a0.rows())
            .and(tau)
            .for_each(|mut row, a0, &tau| {
                Zip::from(&mut row)
                    .and(&a0)
                    .for_each(|x, &x0| *x = tau * *x + (T::one() - tau) * x0);
            });
        out
    }

    /// Mean-flow operator applied to this (frozen) field at the given points:
    /// one JVP along `(velocity, ∂r, ∂t)` and a detached combination.
    pub fn meanflow_target(
        &self,
        states: ArrayView2<'_, T>,
        points: ArrayView2<'_, T>,
        r: &[T],
        t: &[T],
        velocity: ArrayView2<'_, T>,
    ) -> Result<Detached<T>> {
        if velocity.dim() != points.dim() {
            return Err(FpmdError::shape(
                "mean-flow velocity",
                format!("{:?}", points.dim()),
                format!("{:?}", velocity.dim()),
            ));
        }
        let x = self.inputs(states, points, r, t)?;
        let mut tangent = Array2::zeros(x.raw_dim());
        tangent.slice_mut(s![.., self.action_slot()]).assign(&velocity);
        let (time_slot, sign) = match self.convention {
            MeanFlowConvention::PaperLiteral => (self.t_slot(), -T::one()),
            MeanFlowConvention::ForwardFromR => (self.r_slot(), T::one()),
        };
        tangent.slice_mut(s![.., time_slot]).fill(T::one());
        let (_, directional) = self.net.jvp(x.view(), tangent.view())?;
        let mut target = velocity.to_owned();
        for (i, mut row) in target.rows_mut().into_iter().enumerate() {
            let gap = sign * (t[i] - r[i]);
            Zip::from(&mut row)
                .and(directional.row(i))
                .for_each(|y, &d| *y = *y + gap * d);
        }
        Ok(stop_gradient(target))
    }

    /// Weighted regression of this field onto the operator applied to
    /// `snapshot`. Passing `self` as the snapshot is the one-step case.
    pub fn operator_regression(
        &self,
        snapshot: &MeanFlowPolicy<T>,
        batch: &FixedPointBatch<T>,
        weights: &[T],
    ) -> Result<LossOutput<T>> {
        let r = batch.r.to_vec();
        let t = batch.t.to_vec();
        let target = snapshot.meanflow_target(
            batch.states.view(),
            batch.points.view(),
            &r,
            &t,
            batch.velocity.view(),
        )?;
        let x = self.inputs(batch.states.view(), batch.points.view(), &r, &t)?;
        weighted_regression(&self.net, x.view(), &target, weights)
    }

    /// Importance-weighted mean-flow policy loss: conditional velocity
    /// `a1 − a0` at the anchor point, weights `exp((Q − max Q)/λ)`.
    pub fn mpmd_loss(
        &self,
        snapshot: &MeanFlowPolicy<T>,
        batch: &MeanFlowBatch<T>,
        q: &[T],
        lambda: f64,
    ) -> Result<LossOutput<T>> {
        let weights = importance_weights(q, lambda)?;
        let fp = FixedPointBatch {
            states: batch.states.clone(),
            points: self.anchor_points(batch),
            r: batch.r.clone(),
            t: batch.t.clone(),
            velocity: &batch.a1 - &batch.a0,
        };
        self.operator_regression(snapshot, &fp, &weights)
    }
}

impl<T: Scalar> Actor<T> for MeanFlowPolicy<T> {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn action_dim(&self) -> usize {
        self.prior.dim()
    }

    fn prior(&self) -> &GaussianPrior<T> {
        &self.prior
    }

    fn net(&self) -> &Mlp<T> {
        &self.net
    }

    fn transport(
        &self,
        states: ArrayView2<'_, T>,
        a0: ArrayView2<'_, T>,
        steps: usize,
    ) -> Result<Array2<T>> {
        if steps != 1 {
            return Err(FpmdError::InvalidArgument(format!(
                "mean-flow actors sample in one step, got {steps}"
            )));
        }
        self.one_step(states, a0)
    }
}

/// One approximate application of the mean-flow operator: starting from
/// `snapshot`, take `n_grad_steps` optimizer steps on regressions whose
/// targets are built from the frozen `snapshot`, and return the result as the
/// next iterate.
///
/// `data(step)` supplies the batch for each gradient step. Returns the new
/// iterate and the mean loss over the steps.
pub fn fixed_point_iterate<T, F>(
    snapshot: &MeanFlowPolicy<T>,
    optimizer: &mut Adam<T>,
    n_grad_steps: usize,
    data: F,
) -> Result<(MeanFlowPolicy<T>, f64)>
where
    T: Scalar,
    F: FnMut(usize) -> Result<FixedPointBatch<T>>,
{
    let lr = optimizer.config.lr;
    fixed_point_iterate_scheduled(snapshot, optimizer, n_grad_steps, |_| lr, data)
}

/// [`fixed_point_iterate`] with the optimizer's learning rate set to
/// `lr(step)` before each step.
pub fn fixed_point_iterate_scheduled<T, L, F>(
    snapshot: &MeanFlowPolicy<T>,
    optimizer: &mut Adam<T>,
    n_grad_steps: usize,
    lr: L,
    mut data: F,
) -> Result<(MeanFlowPolicy<T>, f64)>
where
    T: Scalar,
    L: Fn(usize) -> f64,
    F: FnMut(usize) -> Result<FixedPointBatch<T>>,
{
    let mut live = snapshot.clone();
    let mut total = 0.0;
    for step in 0..n_grad_steps {
        optimizer.config.lr = lr(step);
        let batch = data(step)?;
        let ones = vec![T::one(); batch.states.nrows()];
        let out = live.operator_regression(snapshot, &batch, &ones)?;
        if optimizer.step(live.net_mut(), &out.grads) == StepOutcome::SkippedNonFinite {
            return Err(FpmdError::NonFinite(format!(
                "fixed-point gradient at step {step}"
            )));
        }
        total += out.loss.to_f64().unwrap();
    }
    Ok((live, total / n_grad_steps.max(1) as f64))
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::tensor::counter;
    use crate::tensor::Layer;

    fn affine_probe(a_coef: f64, t_coef: f64, bias: f64, conv: MeanFlowConvention) -> MeanFlowPolicy<f64> {
        // u = A·a + b·t where t is read from the raw-time feature of the t slot
        let n_in = 1 + 1 + 2 * TIME_INPUTS;
        let mut weight = Array2::zeros((1, n_in));
        weight[[0, 1]] = a_coef;
        weight[[0, 2 + TIME_INPUTS]] = t_coef;
        let net = Mlp::from_layers(vec![Layer {
            weight,
            bias: array![bias],
            activation: Activation::Identity,
        }])
        .unwrap();
        MeanFlowPolicy::from_parts(net, GaussianPrior::isotropic(1, 0.0, 1.0).unwrap(), 1, conv)
            .unwrap()
    }

    #[test]
    fn rt_pairs_ordered_and_deterministic() {
        let sched = RtSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10_000 {
            let (r, t) = sched.sample(&mut rng);
            assert!(0.0 <= r && r < t && t <= 1.0);
        }
        let a: Vec<_> = (0..5).map(|_| sched.sample(&mut ChaCha8Rng::seed_from_u64(3))).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn constant_field_target_is_velocity() {
        let p = affine_probe(0.0, 0.0, 0.7, MeanFlowConvention::PaperLiteral);
        let v = array![[0.3], [-1.2]];
        let tgt = p
            .meanflow_target(array![[0.0], [0.0]].view(), array![[0.5], [0.1]].view(), &[0.1, 0.2], &[0.9, 0.6], v.view())
            .unwrap();
        assert_eq!(tgt.view(), v.view());
    }

    #[test]
    fn affine_probe_target() {
        let (a_coef, t_coef) = (0.6, -0.4);
        for conv in [MeanFlowConvention::PaperLiteral, MeanFlowConvention::ForwardFromR] {
            let p = affine_probe(a_coef, t_coef, 0.1, conv);
            let v = array![[0.8]];
            let (r, t) = (0.2, 0.7);
            let tgt = p
                .meanflow_target(array![[0.0]].view(), array![[0.3]].view(), &[r], &[t], v.view())
                .unwrap();
            let expected = match conv {
                // directional = A·v + b
                MeanFlowConvention::PaperLiteral => 0.8 - (t - r) * (a_coef * 0.8 + t_coef),
                // the probe has no r dependence
                MeanFlowConvention::ForwardFromR => 0.8 + (t - r) * (a_coef * 0.8),
            };
            assert!((tgt.view()[[0, 0]] - expected).abs() < 1e-12, "{conv}");
        }
    }

    #[test]
    fn equal_times_give_conditional_velocity_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prior = GaussianPrior::isotropic(2, 0.0, 1.0).unwrap();
        for conv in [MeanFlowConvention::PaperLiteral, MeanFlowConvention::ForwardFromR] {
            let p = MeanFlowPolicy::<f64>::new(2, &[16, 16], prior.clone(), conv, &mut rng).unwrap();
            let states = prior.sample(4, &mut rng);
            let points = prior.sample(4, &mut rng);
            let v = prior.sample(4, &mut rng);
            let times = [0.0, 0.3, 0.8, 1.0];
            let tgt = p
                .meanflow_target(states.view(), points.view(), &times, &times, v.view())
                .unwrap();
            assert_eq!(tgt.view(), v.view());
        }
    }

    #[test]
    fn avg_velocity_rejects_reversed_times() {
        let p = affine_probe(1.0, 0.0, 0.0, MeanFlowConvention::PaperLiteral);
        assert!(p.avg_velocity(&[0.0], &[0.0], 0.6, 0.5).is_err());
        assert!(p.avg_velocity(&[0.0], &[0.0], 0.5, 0.5).is_ok());
    }

    #[test]
    fn one_step_constant_field() {
        let p = affine_probe(0.0, 0.0, -0.25, MeanFlowConvention::PaperLiteral);
        let a1 = p.one_step(array![[0.0], [1.0]].view(), array![[0.5], [2.0]].view()).unwrap();
        assert_eq!(a1, array![[0.25], [1.75]]);
        assert!(p.transport(array![[0.0]].view(), array![[0.0]].view(), 2).is_err());
    }

    #[test]
    fn one_step_sample_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let prior = GaussianPrior::isotropic(2, 0.0, 1.0).unwrap();
        let p = MeanFlowPolicy::<f32>::new(2, &[8], prior, MeanFlowConvention::PaperLiteral, &mut rng)
            .unwrap();
        let spec = crate::envs::EnvId::TwoGoal.spec();
        let draw = |seed| p.one_step_sample(&[0.1, 0.2], &spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(draw(4), draw(4));
        assert!(draw(5).iter().all(|x| x.abs() <= 1.0));
    }

    fn batch(rng: &mut ChaCha8Rng, rows: usize) -> MeanFlowBatch<f64> {
        let prior = GaussianPrior::<f64>::isotropic(2, 0.0, 1.0).unwrap();
        let sched = RtSchedule::default();
        let (r, t): (Vec<f64>, Vec<f64>) = (0..rows).map(|_| sched.sample(rng)).unzip();
        MeanFlowBatch {
            states: prior.sample(rows, rng),
            a0: prior.sample(rows, rng),
            a1: prior.sample(rows, rng),
            r: Array1::from(r),
            t: Array1::from(t),
        }
    }

    #[test]
    fn mpmd_loss_uses_one_jvp_and_one_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prior = GaussianPrior::isotropic(2, 0.0, 1.0).unwrap();
        let p = MeanFlowPolicy::<f64>::new(2, &[8, 8], prior, MeanFlowConvention::PaperLiteral, &mut rng)
            .unwrap();
        let b = batch(&mut rng, 6);
        let before = counter::calls();
        p.mpmd_loss(&p, &b, &[0.0; 6], 1.0).unwrap();
        let used = counter::calls() - before;
        assert_eq!(used.jvp, 1);
        assert_eq!(used.grad, 1);
        assert_eq!(used.forward, 0);
    }

    #[test]
    fn snapshot_copy_gives_identical_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let prior = GaussianPrior::isotropic(2, 0.0, 1.0).unwrap();
        let p = MeanFlowPolicy::<f64>::new(2, &[8], prior, MeanFlowConvention::PaperLiteral, &mut rng)
            .unwrap();
        let frozen = p.clone();
        let b = batch(&mut rng, 5);
        let q = [0.1, 0.2, -0.3, 0.0, 1.0];
        let self_target = p.mpmd_loss(&p, &b, &q, 0.5).unwrap();
        let frozen_target = p.mpmd_loss(&frozen, &b, &q, 0.5).unwrap();
        assert_eq!(self_target.grads, frozen_target.grads);
        assert_eq!(self_target.loss, frozen_target.loss);
    }

    #[test]
    fn zero_residual_is_zero_loss() {
        // constant field u ≡ c with a1 − a0 = c: target is c, residual 0
        let p = affine_probe(0.0, 0.0, 0.4, MeanFlowConvention::PaperLiteral);
        let b = MeanFlowBatch {
            states: array![[0.0], [0.0]],
            a0: array![[0.1], [-0.3]],
            a1: array![[0.5], [0.1]],
            r: array![0.2, 0.0],
            t: array![0.9, 0.4],
        };
        let out = p.mpmd_loss(&p, &b, &[3.0, -2.0], 1.0).unwrap();
        assert!(out.loss.abs() < 1e-24);
    }

    #[test]
    fn convention_parses() {
        for c in [MeanFlowConvention::PaperLiteral, MeanFlowConvention::ForwardFromR] {
            assert_eq!(c.name().parse::<MeanFlowConvention>().unwrap(), c);
        }
        assert!("backward".parse::<MeanFlowConvention>().is_err());
    }
}
