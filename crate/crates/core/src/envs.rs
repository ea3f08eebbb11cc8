//! Toy continuous-control environments with exact, deterministic dynamics.
//!
//! * `pointmass2d`: `s' = clip(s + 0.1·a, [−1,1]²)`, reward `−‖s' − (0.8, 0.8)‖`.
//! * `twogoal`: same dynamics, reward `−min_i ‖s' − g_i‖` with goals at
//!   `±(0.8, 0.8)`.
//! * `pendulum`: explicit Euler on `θ'' = 3g/(2l)·sin θ + 3/(ml²)·u`, θ = 0 upright.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FpmdError, Result};

pub const POINT_GOAL: [f64; 2] = [0.8, 0.8];
const POINT_SPEED: f64 = 0.1;

const PENDULUM_G: f64 = 10.0;
const PENDULUM_M: f64 = 1.0;
const PENDULUM_L: f64 = 1.0;
const PENDULUM_DT: f64 = 0.05;
const PENDULUM_MAX_SPEED: f64 = 8.0;
const PENDULUM_MAX_TORQUE: f64 = 2.0;

/// Number of reset seeds averaged by [`oracle_return`].
pub const ORACLE_EPISODES: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvId {
    PointMass2d,
    Pendulum,
    TwoGoal,
}

impl EnvId {
    pub const ALL: [EnvId; 3] = [EnvId::PointMass2d, EnvId::Pendulum, EnvId::TwoGoal];

    pub fn name(self) -> &'static str {
        match self {
            EnvId::PointMass2d => "pointmass2d",
            EnvId::Pendulum => "pendulum",
            EnvId::TwoGoal => "twogoal",
        }
    }

    pub fn spec(self) -> EnvSpec {
        match self {
            EnvId::PointMass2d | EnvId::TwoGoal => EnvSpec {
                state_dim: 2,
                action_dim: 2,
                action_low: vec![-1.0; 2],
                action_high: vec![1.0; 2],
                horizon: 100,
                gamma: 0.99,
            },
            EnvId::Pendulum => EnvSpec {
                state_dim: 2,
                action_dim: 1,
                action_low: vec![-PENDULUM_MAX_TORQUE],
                action_high: vec![PENDULUM_MAX_TORQUE],
                horizon: 200,
                gamma: 0.99,
            },
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvId {
    type Err = FpmdError;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| FpmdError::UnknownEnv(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub horizon: usize,
    /// Discount used by the critic; in (0, 1).
    pub gamma: f64,
}

impl EnvSpec {
    pub fn clip_action(&self, action: &mut [f64]) {
        for ((a, lo), hi) in action.iter_mut().zip(&self.action_low).zip(&self.action_high) {
            *a = a.clamp(*lo, *hi);
        }
    }

    /// Half of the mean action-range width.
    pub fn action_half_width(&self) -> f64 {
        let total: f64 = self
            .action_low
            .iter()
            .zip(&self.action_high)
            .map(|(lo, hi)| hi - lo)
            .sum();
        total / (2.0 * self.action_dim as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub state: Vec<f64>,
    pub step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Done {
    No,
    /// A terminal state was reached; do not bootstrap.
    Terminated,
    /// The horizon cut the episode short; bootstrap as usual.
    Truncated,
}

impl Done {
    pub fn is_done(self) -> bool {
        self != Done::No
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next: EnvState,
    pub reward: f64,
    pub done: Done,
}

pub fn reset(env: EnvId, seed: u64) -> EnvState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = match env {
        EnvId::PointMass2d | EnvId::TwoGoal => {
            vec![rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]
        }
        EnvId::Pendulum => vec![rng.random_range(-PI..=PI), rng.random_range(-1.0..=1.0)],
    };
    EnvState { state, step: 0 }
}

pub fn step(env: EnvId, current: &EnvState, action: &[f64]) -> Result<StepResult> {
    let spec = env.spec();
    if action.len() != spec.action_dim {
        return Err(FpmdError::shape("env action", spec.action_dim, action.len()));
    }
    if !action.iter().all(|a| a.is_finite()) {
        return Err(FpmdError::NonFinite(format!("{env} action")));
    }
    let (state, reward) = match env {
        EnvId::PointMass2d => {
            let s = point_move(&current.state, action);
            let r = -dist(&s, &POINT_GOAL);
            (s, r)
        }
        EnvId::TwoGoal => {
            let s = point_move(&current.state, action);
            let g2 = [-POINT_GOAL[0], -POINT_GOAL[1]];
            let r = -dist(&s, &POINT_GOAL).min(dist(&s, &g2));
            (s, r)
        }
        EnvId::Pendulum => {
            let u = action[0].clamp(-PENDULUM_MAX_TORQUE, PENDULUM_MAX_TORQUE);
            let (theta, omega) = (current.state[0], current.state[1]);
            let r = -(wrap_angle(theta).powi(2) + 0.1 * omega * omega + 0.001 * u * u);
            let (th, om) = pendulum_euler(theta, omega, u, PENDULUM_DT);
            (vec![wrap_angle(th), om], r)
        }
    };
    let step = current.step + 1;
    let done = if step >= spec.horizon {
        Done::Truncated
    } else {
        Done::No
    };
    Ok(StepResult {
        next: EnvState { state, step },
        reward,
        done,
    })
}

fn point_move(s: &[f64], a: &[f64]) -> Vec<f64> {
    s.iter()
        .zip(a)
        .map(|(x, u)| (x + POINT_SPEED * u).clamp(-1.0, 1.0))
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Maps an angle to `[−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI && theta > 0.0 {
        PI
    } else {
        w
    }
}

/// One explicit Euler step of the pendulum; the angular velocity is clipped
/// to `[−8, 8]` after the update.
pub fn pendulum_euler(theta: f64, omega: f64, u: f64, dt: f64) -> (f64, f64) {
    let accel = 3.0 * PENDULUM_G / (2.0 * PENDULUM_L) * theta.sin()
        + 3.0 / (PENDULUM_M * PENDULUM_L * PENDULUM_L) * u;
    let next_theta = theta + dt * omega;
    let next_omega = (omega + dt * accel).clamp(-PENDULUM_MAX_SPEED, PENDULUM_MAX_SPEED);
    (next_theta, next_omega)
}

/// Conserved energy of the unforced pendulum (per unit `ml²/3`).
pub fn pendulum_energy(theta: f64, omega: f64) -> f64 {
    0.5 * omega * omega + 3.0 * PENDULUM_G / (2.0 * PENDULUM_L) * theta.cos()
}

/// Straight-line reference controller for the point-mass arena: unit-norm
/// action toward the goal, or the exact remaining displacement once the goal
/// is within one step.
pub fn point_oracle_action(state: &[f64]) -> [f64; 2] {
    let d = [POINT_GOAL[0] - state[0], POINT_GOAL[1] - state[1]];
    let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
    if n <= POINT_SPEED {
        [d[0] / POINT_SPEED, d[1] / POINT_SPEED]
    } else {
        [d[0] / n, d[1] / n]
    }
}

/// Undiscounted return of the reference controller from a given start.
pub fn point_oracle_episode(start: &[f64]) -> f64 {
    let env = EnvId::PointMass2d;
    let mut s = EnvState {
        state: start.to_vec(),
        step: 0,
    };
    let mut total = 0.0;
    loop {
        let a = point_oracle_action(&s.state);
        let out = step(env, &s, &a).expect("oracle action is valid");
        total += out.reward;
        s = out.next;
        if out.done.is_done() {
            return total;
        }
    }
}

/// Mean undiscounted return of the reference controller over reset seeds
/// `0..1000`.
pub fn oracle_return(env: EnvId) -> Result<f64> {
    match env {
        EnvId::PointMass2d => {
            let total: f64 = (0..ORACLE_EPISODES)
                .map(|seed| point_oracle_episode(&reset(env, seed).state))
                .sum();
            Ok(total / ORACLE_EPISODES as f64)
        }
        other => Err(FpmdError::NoOracle(other.name().to_string())),
    }
}
