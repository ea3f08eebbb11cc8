use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::envs::{self, EnvId};
use crate::error::{FpmdError, Result};
use crate::trainer::{Agent, Checkpoint, Variant};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub a: Vec<f64>,
}

/// One particle's path from its prior draw to its action.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryDump {
    pub variant: Variant,
    pub iteration: u64,
    pub state: Vec<f64>,
    pub particle: usize,
    pub steps: usize,
    pub points: Vec<TrajectoryPoint>,
    pub straightness_defect: f64,
}

/// Largest distance of a path point from the chord between its endpoints,
/// divided by the chord length. Zero for degenerate (zero-length) paths.
pub fn straightness_defect(points: &[Vec<f64>]) -> f64 {
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return 0.0;
    };
    let chord: Vec<f64> = last.iter().zip(first).map(|(b, a)| b - a).collect();
    let len_sq: f64 = chord.iter().map(|x| x * x).sum();
    if len_sq == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for p in points {
        let rel: Vec<f64> = p.iter().zip(first).map(|(x, a)| x - a).collect();
        let along = rel.iter().zip(&chord).map(|(x, c)| x * c).sum::<f64>() / len_sq;
        let dev_sq: f64 = rel
            .iter()
            .zip(&chord)
            .map(|(x, c)| (x - along * c).powi(2))
            .sum();
        worst = worst.max(dev_sq.sqrt());
    }
    worst / len_sq.sqrt()
}

pub fn mean_straightness(dumps: &[TrajectoryDump]) -> f64 {
    if dumps.is_empty() {
        return 0.0;
    }
    dumps.iter().map(|d| d.straightness_defect).sum::<f64>() / dumps.len() as f64
}

/// Paths of `n_particles` prior draws at each of the reset states
/// `0..n_states` of `env`. Flow actors record their `steps`-step Euler
/// iterates; mean-flow actors record `a0 + τ·u(a0, 0, τ)` at `τ = k/steps`.
pub fn dump_trajectories(
    checkpoint: &Checkpoint,
    env: EnvId,
    n_states: usize,
    n_particles: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<TrajectoryDump>> {
    if steps == 0 || n_particles == 0 {
        return Err(FpmdError::InvalidArgument(
            "trajectory dump needs at least one step and one particle".into(),
        ));
    }
    let actor = checkpoint.agent.actor();
    let spec = env.spec();
    if spec.state_dim != actor.state_dim() || spec.action_dim != actor.action_dim() {
        return Err(FpmdError::InvalidArgument(format!(
            "checkpoint trained on {} does not fit {}",
            checkpoint.config.env, env
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_states * n_particles);
    for s in 0..n_states as u64 {
        let state = envs::reset(env, s).state;
        let states = Array2::from_shape_fn((n_particles, state.len()), |(_, j)| state[j] as f32);
        let a0 = actor.prior().sample(n_particles, &mut rng);
        let path: Vec<Array2<f32>> = match &checkpoint.agent {
            Agent::Flow(p) => p
                .euler_sample(states.view(), a0.view(), steps, true)?
                .trajectory
                .expect("recording requested"),
            Agent::MeanFlow(p) => {
                let mut path = vec![a0.clone()];
                for k in 1..=steps {
                    let tau = k as f32 / steps as f32;
                    let u = p.avg_velocity_batch(
                        states.view(),
                        a0.view(),
                        &vec![0.0; n_particles],
                        &vec![tau; n_particles],
                    )?;
                    path.push(&a0 + &(u * tau));
                }
                path
            }
        };
        for particle in 0..n_particles {
            let raw: Vec<Vec<f64>> = path
                .iter()
                .map(|a| a.row(particle).iter().map(|&x| x as f64).collect())
                .collect();
            out.push(TrajectoryDump {
                variant: checkpoint.agent.variant(),
                iteration: checkpoint.iteration,
                state: state.clone(),
                particle,
                steps,
                straightness_defect: straightness_defect(&raw),
                points: raw
                    .into_iter()
                    .enumerate()
                    .map(|(k, a)| TrajectoryPoint {
                        t: k as f64 / steps as f64,
                        a,
                    })
                    .collect(),
            });
        }
    }
    Ok(out)
}

/// One JSON object per line.
pub fn write_trajectories(path: &Path, dumps: &[TrajectoryDump]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for d in dumps {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
