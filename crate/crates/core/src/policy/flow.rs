//! Flow-matching actor: a state-conditioned velocity field `v(a_t, t | s)`
//! transporting the Gaussian prior to the action distribution along straight
//! interpolation paths `a_t = t·a1 + (1−t)·a0`.

use ndarray::{s, Array1, Array2, ArrayView2, Zip};
use rand::Rng;

use super::{TIME_INPUTS, importance_weights, weighted_regression, Actor, GaussianPrior, LossOutput};
use crate::envs::EnvSpec;
use crate::error::{FpmdError, Result};
use crate::tensor::{stop_gradient, Activation, Mlp, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowPolicy<T: Scalar = f32> {
    net: Mlp<T>,
    prior: GaussianPrior<T>,
    state_dim: usize,
}

/// Result of Euler integration; `trajectory[i]` holds the points at time
/// `i/K` (so `K + 1` entries) when recording was requested.
#[derive(Debug, Clone)]
pub struct EulerOutput<T> {
    pub actions: Array2<T>,
    pub trajectory: Option<Vec<Array2<T>>>,
}

/// One actor-update batch: `a1` from the pre-update policy, fresh prior
/// draws `a0`, and per-row times `t`.
#[derive(Debug, Clone)]
pub struct FlowBatch<T> {
    pub states: Array2<T>,
    pub a0: Array2<T>,
    pub a1: Array2<T>,
    pub t: Array1<T>,
}

impl<T: Scalar> FlowPolicy<T> {
    /// Tanh network over `s ⊕ a_t ⊕ t` with the output layer scaled
    /// by 0.01, so the initial velocity is close to zero.
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        hidden: &[usize],
        prior: GaussianPrior<T>,
        rng: &mut R,
    ) -> Result<Self> {
        let action_dim = prior.dim();
        let mut sizes = vec![state_dim + action_dim + TIME_INPUTS];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        let net = Mlp::init(&sizes, Activation::Tanh, T::from(0.01).unwrap(), rng)?;
        Self::from_parts(net, prior, state_dim)
    }

    pub fn from_parts(net: Mlp<T>, prior: GaussianPrior<T>, state_dim: usize) -> Result<Self> {
        let expected_in = state_dim + prior.dim() + TIME_INPUTS;
        if net.in_dim() != expected_in {
            return Err(FpmdError::shape("flow net input", expected_in, net.in_dim()));
        }
        if net.out_dim() != prior.dim() {
            return Err(FpmdError::shape("flow net output", prior.dim(), net.out_dim()));
        }
        Ok(FlowPolicy {
            net,
            prior,
            state_dim,
        })
    }

    pub fn net_mut(&mut self) -> &mut Mlp<T> {
        &mut self.net
    }

    pub fn into_net(self) -> Mlp<T> {
        self.net
    }

    /// Network input rows `s ⊕ a ⊕ t`.
    pub fn inputs(
        &self,
        states: ArrayView2<'_, T>,
        actions: ArrayView2<'_, T>,
        t: &[T],
    ) -> Result<Array2<T>> {
        let rows = states.nrows();
        let (ds, da) = (self.state_dim, self.prior.dim());
        if states.ncols() != ds {
            return Err(FpmdError::shape("flow states", ds, states.ncols()));
        }
        if actions.dim() != (rows, da) {
            return Err(FpmdError::shape(
                "flow actions",
                format!("{:?}", (rows, da)),
                format!("{:?}", actions.dim()),
            ));
        }
        if t.len() != rows {
            return Err(FpmdError::shape("flow times", rows, t.len()));
        }
        let mut x = Array2::zeros((rows, ds + da + TIME_INPUTS));
        x.slice_mut(s![.., ..ds]).assign(&states);
        x.slice_mut(s![.., ds..ds + da]).assign(&actions);
        for (i, &ti) in t.iter().enumerate() {
            let ti = ti.to_f64().unwrap();
            if !(0.0..=1.0).contains(&ti) {
                return Err(FpmdError::InvalidArgument(format!(
                    "flow time {ti} outside [0, 1]"
                )));
            }
            x[[i, ds + da]] = T::from(ti).unwrap();
        }
        Ok(x)
    }

    pub fn velocity_batch(
        &self,
        states: ArrayView2<'_, T>,
        actions: ArrayView2<'_, T>,
        t: &[T],
    ) -> Result<Array2<T>> {
        let x = self.inputs(states, actions, t)?;
        self.net.forward(x.view())
    }

    /// `v(a_t, t | s)` for a single state.
    pub fn velocity(&self, state: &[T], action: &[T], t: T) -> Result<Vec<T>> {
        let s = ArrayView2::from_shape((1, state.len()), state)
            .map_err(|_| FpmdError::shape("flow state", self.state_dim, state.len()))?;
        let a = ArrayView2::from_shape((1, action.len()), action)
            .map_err(|_| FpmdError::shape("flow action", self.prior.dim(), action.len()))?;
        Ok(self.velocity_batch(s, a, &[t])?.into_raw_vec_and_offset().0)
    }

    /// `K`-step Euler integration from `t = 0` to `t = 1`:
    /// `a_{(i+1)/K} = a_{i/K} + v(a_{i/K}, i/K | s)/K`.
    pub fn euler_sample(
        &self,
        states: ArrayView2<'_, T>,
        a0: ArrayView2<'_, T>,
        steps: usize,
        record: bool,
    ) -> Result<EulerOutput<T>> {
        if steps == 0 {
            return Err(FpmdError::InvalidArgument("euler steps must be >= 1".into()));
        }
        let rows = states.nrows();
        let dt = T::one() / T::from(steps).unwrap();
        let mut a = a0.to_owned();
        let mut trajectory = record.then(|| vec![a.clone()]);
        let mut times = vec![T::zero(); rows];
        for i in 0..steps {
            let t = T::from(i as f64 / steps as f64).unwrap();
            times.fill(t);
            let v = self.velocity_batch(states, a.view(), &times)?;
            Zip::from(&mut a).and(&v).for_each(|x, &dv| *x = *x + dt * dv);
            if !a.iter().all(|x| x.is_finite()) {
                return Err(FpmdError::Sampling { step: i });
            }
            if let Some(traj) = trajectory.as_mut() {
                traj.push(a.clone());
            }
        }
        Ok(EulerOutput {
            actions: a,
            trajectory,
        })
    }

    /// Draws `a0` from the prior, integrates with `steps` Euler steps and
    /// clips the result to the action bounds.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        state: &[T],
        steps: usize,
        spec: &EnvSpec,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let s = ArrayView2::from_shape((1, state.len()), state)
            .map_err(|_| FpmdError::shape("flow state", self.state_dim, state.len()))?;
        let a0 = self.prior.sample(1, rng);
        let out = self.euler_sample(s, a0.view(), steps, false)?;
        let mut action: Vec<f64> = out.actions.iter().map(|x| x.to_f64().unwrap()).collect();
        spec.clip_action(&mut action);
        Ok(action)
    }

    /// Importance-weighted conditional flow-matching loss
    /// `mean_i w_i ‖(a1 − a0) − v(a_t, t | s)‖²` with
    /// `w = exp((Q − max Q)/λ)` computed from `q` (one value per row).
    pub fn fpmd_loss(&self, batch: &FlowBatch<T>, q: &[T], lambda: f64) -> Result<LossOutput<T>> {
        let weights = importance_weights(q, lambda)?;
        self.weighted_cfm_loss(batch, &weights)
    }

    /// Flow-matching regression with explicit per-row weights.
    pub fn weighted_cfm_loss(&self, batch: &FlowBatch<T>, weights: &[T]) -> Result<LossOutput<T>> {
        let rows = batch.states.nrows();
        if batch.a0.dim() != batch.a1.dim() || batch.a0.nrows() != rows {
            return Err(FpmdError::shape(
                "flow batch",
                format!("{:?}", batch.a1.dim()),
                format!("{:?}", batch.a0.dim()),
            ));
        }
        let mut a_t = batch.a1.clone();
        Zip::from(a_t.rows_mut())
            .and(batch.a0.rows())
            .and(&batch.t)
            .for_each(|mut at, a0, &t| {
                Zip::from(&mut at)
                    .and(&a0)
                    .for_each(|x, &x0| *x = t * *x + (T::one() - t) * x0);
            });
        let target = stop_gradient(&batch.a1 - &batch.a0);
        let t: Vec<T> = batch.t.to_vec();
        let inputs = self.inputs(batch.states.view(), a_t.view(), &t)?;
        weighted_regression(&self.net, inputs.view(), &target, weights)
    }
}

impl<T: Scalar> Actor<T> for FlowPolicy<T> {
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
        Ok(self.euler_sample(states, a0, steps, false)?.actions)
    }
}
