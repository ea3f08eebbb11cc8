//! Clipped double-Q critic with Polyak-averaged target networks and one-step
//! bootstrapping.

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{FpmdError, Result};
use crate::policy::{weighted_regression, LossOutput};
use crate::tensor::{stop_gradient, Activation, Detached, Mlp, ParamGrads, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticPair<T: Scalar = f32> {
    pub q1: Mlp<T>,
    pub q2: Mlp<T>,
    pub target1: Mlp<T>,
    pub target2: Mlp<T>,
    pub tau: f64,
}

/// Replay transitions in columnar form. `terminated[i]` suppresses the
/// bootstrap term; horizon truncation is not termination.
#[derive(Debug, Clone)]
pub struct CriticBatch<T> {
    pub states: Array2<T>,
    pub actions: Array2<T>,
    pub rewards: Array1<T>,
    pub next_states: Array2<T>,
    pub terminated: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct CriticLoss<T> {
    /// Sum of the two heads' mean squared errors.
    pub loss: T,
    pub grads1: ParamGrads<T>,
    pub grads2: ParamGrads<T>,
    pub targets: Array1<T>,
}

fn join<T: Scalar>(s: ArrayView2<'_, T>, a: ArrayView2<'_, T>) -> Result<Array2<T>> {
    if s.nrows() != a.nrows() {
        return Err(FpmdError::shape("critic rows", s.nrows(), a.nrows()));
    }
    Ok(concatenate(Axis(1), &[s, a]).expect("row counts checked"))
}

impl<T: Scalar> CriticPair<T> {
    /// Two independently initialized heads over `s ⊕ a`; targets start as
    /// exact copies. The output layer is scaled by 0.01.
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        tau: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(FpmdError::InvalidArgument(format!(
                "polyak rate must be in (0, 1], got {tau}"
            )));
        }
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let scale = T::from(0.01).unwrap();
        let q1 = Mlp::init(&sizes, Activation::Tanh, scale, rng)?;
        let q2 = Mlp::init(&sizes, Activation::Tanh, scale, rng)?;
        Ok(CriticPair {
            target1: q1.clone(),
            target2: q2.clone(),
            q1,
            q2,
            tau,
        })
    }

    pub fn net(&self, head: Head, target: bool) -> &Mlp<T> {
        match (head, target) {
            (Head::First, false) => &self.q1,
            (Head::Second, false) => &self.q2,
            (Head::First, true) => &self.target1,
            (Head::Second, true) => &self.target2,
        }
    }

    pub fn q_batch(
        &self,
        states: ArrayView2<'_, T>,
        actions: ArrayView2<'_, T>,
        head: Head,
        target: bool,
    ) -> Result<Array1<T>> {
        let x = join(states, actions)?;
        let out = self.net(head, target).forward(x.view())?;
        Ok(out.column(0).to_owned())
    }

    pub fn q_value(&self, state: &[T], action: &[T], head: Head, target: bool) -> Result<T> {
        let s = ArrayView2::from_shape((1, state.len()), state)
            .map_err(|_| FpmdError::InvalidArgument("state".into()))?;
        let a = ArrayView2::from_shape((1, action.len()), action)
            .map_err(|_| FpmdError::InvalidArgument("action".into()))?;
        Ok(self.q_batch(s, a, head, target)?[0])
    }

    /// Row-wise `min(Q1, Q2)` of the online or target heads.
    pub fn min_q(
        &self,
        states: ArrayView2<'_, T>,
        actions: ArrayView2<'_, T>,
        target: bool,
    ) -> Result<Array1<T>> {
        let x = join(states, actions)?;
        let a = self.net(Head::First, target).forward(x.view())?;
        let b = self.net(Head::Second, target).forward(x.view())?;
        Ok(Array1::from_iter(
            a.column(0).iter().zip(b.column(0)).map(|(&p, &q)| p.min(q)),
        ))
    }

    /// Clipped double-Q bootstrap target `r + γ·(1 − terminated)·min_k Q̄_k(s', a')`.
    pub fn bootstrap_target(
        &self,
        rewards: ArrayView1<'_, T>,
        next_states: ArrayView2<'_, T>,
        next_actions: ArrayView2<'_, T>,
        terminated: &[bool],
        gamma: f64,
    ) -> Result<Array1<T>> {
        let rows = rewards.len();
        if terminated.len() != rows || next_states.nrows() != rows {
            return Err(FpmdError::shape("critic batch", rows, terminated.len()));
        }
        let next = self.min_q(next_states, next_actions, true)?;
        let gamma = T::from(gamma).unwrap();
        let targets = Array1::from_iter((0..rows).map(|i| {
            if terminated[i] {
                rewards[i]
            } else {
                rewards[i] + gamma * next[i]
            }
        }));
        if targets.iter().any(|x| !x.is_finite()) {
            return Err(FpmdError::NonFinite("critic bootstrap target".into()));
        }
        Ok(targets)
    }

    /// Sum over both heads of the mean squared error against the shared
    /// clipped target. The target and `next_actions` are constants.
    pub fn critic_loss(
        &self,
        batch: &CriticBatch<T>,
        next_actions: ArrayView2<'_, T>,
        gamma: f64,
    ) -> Result<CriticLoss<T>> {
        let targets = self.bootstrap_target(
            batch.rewards.view(),
            batch.next_states.view(),
            next_actions,
            &batch.terminated,
            gamma,
        )?;
        let fixed: Detached<T> =
            stop_gradient(targets.clone().insert_axis(Axis(1)));
        self.loss_against(batch, &fixed, targets)
    }

    /// Regression of both heads onto given fixed targets.
    pub fn loss_against(
        &self,
        batch: &CriticBatch<T>,
        fixed: &Detached<T>,
        targets: Array1<T>,
    ) -> Result<CriticLoss<T>> {
        let x = join(batch.states.view(), batch.actions.view())?;
        let ones = vec![T::one(); x.nrows()];
        let LossOutput { loss: l1, grads: g1, .. } =
            weighted_regression(&self.q1, x.view(), fixed, &ones)?;
        let LossOutput { loss: l2, grads: g2, .. } =
            weighted_regression(&self.q2, x.view(), fixed, &ones)?;
        Ok(CriticLoss {
            loss: l1 + l2,
            grads1: g1,
            grads2: g2,
            targets,
        })
    }

    /// `target ← τ·online + (1−τ)·target` for both heads.
    pub fn polyak_update(&mut self, tau: f64) {
        let tau = T::from(tau).unwrap();
        self.target1.polyak_from(&self.q1, tau);
        self.target2.polyak_from(&self.q2, tau);
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::tensor::{Adam, AdamConfig, Layer};

    fn constant_net(c: f64, n_in: usize) -> Mlp<f64> {
        Mlp::from_layers(vec![Layer {
            weight: Array2::zeros((1, n_in)),
            bias: array![c],
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    fn pair_with_targets(q1bar: f64, q2bar: f64) -> CriticPair<f64> {
        CriticPair {
            q1: constant_net(0.0, 2),
            q2: constant_net(0.0, 2),
            target1: constant_net(q1bar, 2),
            target2: constant_net(q2bar, 2),
            tau: 0.005,
        }
    }

    fn one_row(reward: f64, terminated: bool) -> CriticBatch<f64> {
        CriticBatch {
            states: array![[0.0]],
            actions: array![[0.0]],
            rewards: array![reward],
            next_states: array![[0.0]],
            terminated: vec![terminated],
        }
    }

    #[test]
    fn fresh_critic_outputs_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = CriticPair::<f32>::new(2, 2, &[32, 32], 0.005, &mut rng).unwrap();
        for head in [Head::First, Head::Second] {
            let q = c.q_value(&[0.5, -0.5], &[1.0, 1.0], head, false).unwrap();
            assert!(q.abs() < 0.05);
            assert_eq!(q, c.q_value(&[0.5, -0.5], &[1.0, 1.0], head, true).unwrap());
        }
    }

    #[test]
    fn min_rule_arithmetic() {
        let c = pair_with_targets(3.0, 5.0);
        let b = one_row(1.0, false);
        let t = c
            .bootstrap_target(b.rewards.view(), b.next_states.view(), array![[0.0]].view(), &b.terminated, 0.9)
            .unwrap();
        assert!((t[0] - 3.7).abs() < 1e-12);
    }

    #[test]
    fn no_bootstrap_without_discount_or_after_termination() {
        let c = pair_with_targets(3.0, 5.0);
        let b = one_row(1.5, false);
        let t0 = c
            .bootstrap_target(b.rewards.view(), b.next_states.view(), array![[0.0]].view(), &b.terminated, 0.0)
            .unwrap();
        assert_eq!(t0[0], 1.5);
        let bt = one_row(1.5, true);
        let tt = c
            .bootstrap_target(bt.rewards.view(), bt.next_states.view(), array![[0.0]].view(), &bt.terminated, 0.99)
            .unwrap();
        assert_eq!(tt[0], 1.5);
    }

    #[test]
    fn non_finite_target_is_rejected() {
        let mut c = pair_with_targets(0.0, 5.0);
        c.target1.layers_mut()[0].bias[0] = f64::INFINITY;
        let b = one_row(0.0, false);
        // the min over heads absorbs a single infinite head
        assert!(c.critic_loss(&b, array![[0.0]].view(), 0.9).is_ok());
        c.target2.layers_mut()[0].bias[0] = f64::NAN;
        let b = one_row(0.0, false);
        assert!(c.critic_loss(&b, array![[0.0]].view(), 0.9).is_err());
    }

    #[test]
    fn polyak_rates() {
        let mut c = pair_with_targets(0.0, 0.0);
        c.q1 = constant_net(1.0, 2);
        c.q2 = constant_net(1.0, 2);
        let mut full = c.clone();
        full.polyak_update(1.0);
        assert_eq!(full.target1, full.q1);
        let mut frozen = c.clone();
        frozen.polyak_update(0.0);
        assert_eq!(frozen.target1, c.target1);
        c.polyak_update(0.005);
        assert!((c.target1.layers()[0].bias[0] - 0.005).abs() < 1e-15);
        assert!((c.target2.layers()[0].bias[0] - 0.005).abs() < 1e-15);
    }

    #[test]
    fn target_networks_never_receive_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = CriticPair::<f64>::new(1, 1, &[8], 0.005, &mut rng).unwrap();
        let b = CriticBatch {
            states: array![[0.1], [0.2], [0.3]],
            actions: array![[0.0], [0.5], [-0.5]],
            rewards: array![1.0, 0.0, -1.0],
            next_states: array![[0.2], [0.3], [0.4]],
            terminated: vec![false, true, false],
        };
        let next = array![[0.1], [0.1], [0.1]];
        let base = c.critic_loss(&b, next.view(), 0.9).unwrap();
        let mut shifted = c.clone();
        *shifted.target1.param_mut(0) += 0.3;
        *shifted.target2.param_mut(3) -= 0.2;
        let moved = shifted.critic_loss(&b, next.view(), 0.9).unwrap();
        // with the targets held at the same values, the online gradient agrees
        let fixed = stop_gradient(moved.targets.clone().insert_axis(Axis(1)));
        let again = c.loss_against(&b, &fixed, moved.targets.clone()).unwrap();
        assert_eq!(again.grads1, moved.grads1);
        assert_ne!(base.targets, moved.targets);
    }

    #[test]
    fn two_state_chain_converges_to_known_q() {
        // s0 -(r=1)-> s1 -(r=0.5)-> s1 ..., single action, γ = 0.9
        // Q*(s1) = 0.5/(1−0.9) = 5, Q*(s0) = 1 + 0.9·5 = 5.5
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut c = CriticPair::<f64>::new(2, 1, &[16], 0.05, &mut rng).unwrap();
        let mut opt1 = Adam::new(&c.q1, AdamConfig::with_lr(3e-3));
        let mut opt2 = Adam::new(&c.q2, AdamConfig::with_lr(3e-3));
        let b = CriticBatch {
            states: array![[1.0, 0.0], [0.0, 1.0]],
            actions: array![[0.0], [0.0]],
            rewards: array![1.0, 0.5],
            next_states: array![[0.0, 1.0], [0.0, 1.0]],
            terminated: vec![false, false],
        };
        let next = array![[0.0], [0.0]];
        for _ in 0..8000 {
            let out = c.critic_loss(&b, next.view(), 0.9).unwrap();
            opt1.step(&mut c.q1, &out.grads1);
            opt2.step(&mut c.q2, &out.grads2);
            let tau = c.tau;
            c.polyak_update(tau);
        }
        for head in [Head::First, Head::Second] {
            let q0 = c.q_value(&[1.0, 0.0], &[0.0], head, false).unwrap();
            let q1 = c.q_value(&[0.0, 1.0], &[0.0], head, false).unwrap();
            assert!((q0 - 5.5).abs() < 1e-2, "Q(s0) = {q0}");
            assert!((q1 - 5.0).abs() < 1e-2, "Q(s1) = {q1}");
        }
    }

    #[test]
    fn bandit_critic_prefers_zero_action() {
        // γ = 0, r(a) = −‖a‖²
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut c = CriticPair::<f32>::new(1, 2, &[32, 32], 0.005, &mut rng).unwrap();
        let mut opt1 = Adam::new(&c.q1, AdamConfig::with_lr(1e-3));
        let mut opt2 = Adam::new(&c.q2, AdamConfig::with_lr(1e-3));
        for _ in 0..3000 {
            let actions = Array2::from_shape_fn((64, 2), |_| rng.random_range(-1.0f32..=1.0));
            let rewards = Array1::from_iter(actions.rows().into_iter().map(|a| -a.dot(&a)));
            let b = CriticBatch {
                states: Array2::from_shape_fn((64, 1), |_| rng.random_range(-1.0f32..=1.0)),
                actions,
                rewards,
                next_states: Array2::zeros((64, 1)),
                terminated: vec![false; 64],
            };
            let out = c.critic_loss(&b, Array2::zeros((64, 2)).view(), 0.0).unwrap();
            opt1.step(&mut c.q1, &out.grads1);
            opt2.step(&mut c.q2, &out.grads2);
        }
        for k in 0..100 {
            let s = -1.0 + 2.0 * k as f32 / 99.0;
            let angle = k as f32 * 0.37;
            let a = [angle.cos(), angle.sin()];
            for head in [Head::First, Head::Second] {
                let at_zero = c.q_value(&[s], &[0.0, 0.0], head, false).unwrap();
                let at_unit = c.q_value(&[s], &a, head, false).unwrap();
                assert!(at_zero > at_unit, "probe {k}: {at_zero} <= {at_unit}");
            }
        }
    }
}
