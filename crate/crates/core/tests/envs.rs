use std::f64::consts::PI;

use fpmd::envs::{self, Done, EnvId, EnvState};
use proptest::prelude::*;

fn straight_line_return(start: [f64; 2]) -> f64 {
    // distance shrinks by exactly 0.1 per step until the final partial step
    let d0 = ((0.8 - start[0]).powi(2) + (0.8 - start[1]).powi(2)).sqrt();
    (1..=100).map(|k| -(d0 - 0.1 * k as f64).max(0.0)).sum()
}

#[test]
fn oracle_matches_closed_form_sum() {
    for start in [[0.0, 0.0], [-1.0, -1.0], [0.75, 0.8], [-0.3, 0.9]] {
        let got = envs::point_oracle_episode(&start);
        assert!((got - straight_line_return(start)).abs() < 1e-9, "{start:?}: {got}");
    }
    assert!((envs::point_oracle_episode(&[0.0, 0.0]) + 5.8451).abs() < 1e-3);
}

#[test]
fn oracle_return_is_the_reset_average() {
    let expected: f64 = (0..envs::ORACLE_EPISODES)
        .map(|seed| {
            let s = envs::reset(EnvId::PointMass2d, seed).state;
            straight_line_return([s[0], s[1]])
        })
        .sum::<f64>()
        / envs::ORACLE_EPISODES as f64;
    let got = envs::oracle_return(EnvId::PointMass2d).unwrap();
    assert!((got - expected).abs() < 1e-9);
    assert!((-9.5..-9.0).contains(&got), "{got}");
}

#[test]
fn unforced_pendulum_conserves_energy_as_dt_shrinks() {
    let drift = |dt: f64| {
        let (mut th, mut om) = (2.0, 0.5);
        let e0 = envs::pendulum_energy(th, om);
        let steps = (1.0 / dt).round() as usize;
        for _ in 0..steps {
            (th, om) = envs::pendulum_euler(th, om, 0.0, dt);
        }
        (envs::pendulum_energy(th, om) - e0).abs()
    };
    let coarse = drift(1e-3);
    let fine = drift(1e-4);
    assert!(fine < 2e-2, "{fine}");
    // explicit Euler is first order
    assert!((coarse / fine - 10.0).abs() < 2.0, "{coarse} {fine}");
}

#[test]
fn pendulum_step_follows_the_equation_of_motion() {
    let s = EnvState {
        state: vec![0.3, -1.2],
        step: 0,
    };
    let out = envs::step(EnvId::Pendulum, &s, &[1.5]).unwrap();
    let accel = 15.0 * 0.3f64.sin() + 3.0 * 1.5;
    assert!((out.next.state[0] - (0.3 - 0.05 * 1.2)).abs() < 1e-15);
    assert!((out.next.state[1] - (-1.2 + 0.05 * accel)).abs() < 1e-15);
    let reward = -(0.09 + 0.1 * 1.44 + 0.001 * 2.25);
    assert!((out.reward - reward).abs() < 1e-15);
}

#[test]
fn pendulum_torque_and_speed_are_clipped() {
    let s = EnvState {
        state: vec![PI / 2.0, 7.9],
        step: 0,
    };
    let out = envs::step(EnvId::Pendulum, &s, &[50.0]).unwrap();
    assert_eq!(out.next.state[1], 8.0);
    assert!((out.reward + ((PI / 2.0).powi(2) + 0.1 * 7.9 * 7.9 + 0.004)).abs() < 1e-12);
}

#[test]
fn pendulum_episode_lasts_two_hundred_steps() {
    let mut s = envs::reset(EnvId::Pendulum, 4);
    for i in 0..200 {
        let out = envs::step(EnvId::Pendulum, &s, &[0.0]).unwrap();
        assert_eq!(out.done == Done::Truncated, i == 199);
        s = out.next;
    }
}

fn any_env() -> impl Strategy<Value = EnvId> {
    prop_oneof![Just(EnvId::PointMass2d), Just(EnvId::TwoGoal), Just(EnvId::Pendulum)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rewards_are_bounded(env in any_env(), seed in 0u64..10_000, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let s = envs::reset(env, seed);
        let action: Vec<f64> = match env {
            EnvId::Pendulum => vec![2.0 * a],
            _ => vec![a, b],
        };
        let out = envs::step(env, &s, &action).unwrap();
        prop_assert!(out.reward <= 0.0);
        if env != EnvId::Pendulum {
            prop_assert!(out.reward >= -2.0 * 2f64.sqrt() * 1.1);
        }
    }

    #[test]
    fn step_is_pure(env in any_env(), seed in 0u64..10_000, a in -1.0f64..1.0) {
        let s = envs::reset(env, seed);
        let action = vec![a; env.spec().action_dim];
        let first = envs::step(env, &s, &action).unwrap();
        let second = envs::step(env, &s, &action).unwrap();
        prop_assert_eq!(first, second);
    }
}
