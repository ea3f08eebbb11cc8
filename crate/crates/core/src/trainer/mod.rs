//! Off-policy training loop: best-of-N exploration, replay, clipped double-Q
//! critic updates and importance-weighted actor updates, one of each per
//! environment step.

mod agent;
mod config;
mod replay;
mod schedule;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

pub use agent::{Agent, Checkpoint, CONFIG_FILE};
pub use config::{TrainConfig, Variant};
pub use replay::{ReplayBuffer, Transition};
pub use schedule::NoiseSchedule;

use crate::critic::CriticPair;
use crate::envs::{self, EnvId, EnvSpec, EnvState};
use crate::error::{FpmdError, Result};
use crate::policy::{FlowBatch, MeanFlowBatch, RtSchedule};
use crate::tensor::{counter, Adam, AdamConfig, StepOutcome};

use agent::clip_rows;

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const ABORT_FILE: &str = "abort.json";

/// Seed of the evaluation sampler; evaluation never touches the training
/// stream.
const EVAL_SEED: u64 = 0x5eed_e7a1;

/// Index of the largest score; the lowest index wins ties.
pub fn best_candidate(scores: &[f32]) -> Option<usize> {
    let mut best: Option<(usize, f32)> = None;
    for (i, &q) in scores.iter().enumerate() {
        match best {
            Some((_, b)) if q <= b => {}
            _ if q.is_nan() => {}
            _ => best = Some((i, q)),
        }
    }
    best.map(|(i, _)| i)
}

/// Best-of-N exploration action: `particles` actor samples scored by the
/// online min-head critic, the argmax perturbed by `N(0, sigma²)` noise and
/// clipped to the action bounds.
#[allow(clippy::too_many_arguments)]
pub fn select_action<R: Rng + ?Sized>(
    agent: &Agent,
    critic: &CriticPair,
    state: &[f64],
    particles: usize,
    steps: usize,
    sigma: f64,
    spec: &EnvSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if particles == 0 {
        return Err(FpmdError::InvalidArgument("particles must be >= 1".into()));
    }
    let states = Array2::from_shape_fn((particles, state.len()), |(_, j)| state[j] as f32);
    let mut candidates = agent.sample(states.view(), steps, rng)?;
    clip_rows(&mut candidates, spec);
    let chosen = if particles == 1 {
        0
    } else {
        let q = critic.min_q(states.view(), candidates.view(), false)?;
        best_candidate(q.as_slice().expect("contiguous"))
            .ok_or_else(|| FpmdError::NonFinite("candidate Q values".into()))?
    };
    let mut action: Vec<f64> = candidates.row(chosen).iter().map(|&a| a as f64).collect();
    if sigma > 0.0 {
        for a in action.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *a += sigma * z;
        }
    }
    spec.clip_action(&mut action);
    Ok(action)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mean_return: f64,
    pub returns: Vec<f64>,
    /// Actor network rows evaluated per action taken.
    pub nfe_per_action: f64,
}

/// Greedy rollouts from reset seeds `0..episodes`: one prior draw per
/// action transported with `steps` evaluations, no candidate selection and no
/// noise. Episodes run in lockstep as one batch.
pub fn evaluate(agent: &Agent, env: EnvId, episodes: usize, steps: usize) -> Result<EvalReport> {
    if steps == 0 || episodes == 0 {
        return Err(FpmdError::InvalidArgument(
            "evaluation needs at least one episode and one step".into(),
        ));
    }
    let spec = env.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(EVAL_SEED);
    let mut current: Vec<EnvState> = (0..episodes as u64).map(|s| envs::reset(env, s)).collect();
    let mut active: Vec<usize> = (0..episodes).collect();
    let mut returns = vec![0.0; episodes];
    let (mut rows, mut actions) = (0u64, 0u64);
    while !active.is_empty() {
        let states = Array2::from_shape_fn((active.len(), spec.state_dim), |(i, j)| {
            current[active[i]].state[j] as f32
        });
        let before = counter::rows_evaluated();
        let mut a = agent.sample(states.view(), steps, &mut rng)?;
        rows += counter::rows_evaluated() - before;
        actions += active.len() as u64;
        clip_rows(&mut a, &spec);
        let mut still = Vec::with_capacity(active.len());
        for (i, &ep) in active.iter().enumerate() {
            let action: Vec<f64> = a.row(i).iter().map(|&x| x as f64).collect();
            let out = envs::step(env, &current[ep], &action)?;
            returns[ep] += out.reward;
            current[ep] = out.next;
            if !out.done.is_done() {
                still.push(ep);
            }
        }
        active = still;
    }
    Ok(EvalReport {
        mean_return: returns.iter().sum::<f64>() / episodes as f64,
        returns,
        nfe_per_action: rows as f64 / actions as f64,
    })
}

/// One metrics line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub iter: u64,
    pub env_steps: u64,
    pub eval_return: f64,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub mean_weight: Option<f64>,
    pub sigma_now: f64,
    pub nfe_per_action: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Running {
    critic: f64,
    actor: f64,
    weight: f64,
    n: u64,
}

impl Running {
    fn mean(&self, x: f64) -> Option<f64> {
        (self.n > 0).then(|| x / self.n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub mean_weight: f64,
}

/// Single owner of all mutable training state.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    spec: EnvSpec,
    agent: Agent,
    critic: CriticPair,
    actor_opt: Adam<f32>,
    q1_opt: Adam<f32>,
    q2_opt: Adam<f32>,
    buffer: ReplayBuffer,
    noise: NoiseSchedule,
    rt: RtSchedule,
    rng: ChaCha8Rng,
    env_state: EnvState,
    iteration: u64,
    running: Running,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.env.spec();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let agent = Agent::new(&config, &mut rng)?;
        let critic = CriticPair::new(
            spec.state_dim,
            spec.action_dim,
            &config.hidden_sizes(),
            config.tau,
            &mut rng,
        )?;
        let actor_opt = Adam::new(agent.actor().net(), AdamConfig::with_lr(config.actor_lr));
        let q1_opt = Adam::new(&critic.q1, AdamConfig::with_lr(config.critic_lr));
        let q2_opt = Adam::new(&critic.q2, AdamConfig::with_lr(config.critic_lr));
        let noise = NoiseSchedule::new(
            config.resolved_sigma_start(),
            config.sigma_end,
            config.resolved_decay_iters(),
        )?;
        let env_state = envs::reset(config.env, rng.random());
        Ok(Trainer {
            buffer: ReplayBuffer::new(config.buffer_capacity)?,
            spec,
            agent,
            critic,
            actor_opt,
            q1_opt,
            q2_opt,
            noise,
            rt: RtSchedule::default(),
            rng,
            env_state,
            iteration: 0,
            running: Running::default(),
            config,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn critic(&self) -> &CriticPair {
        &self.critic
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            iteration: self.iteration,
            agent: self.agent.clone(),
            critic: self.critic.clone(),
        }
    }

    /// One environment step followed, after warmup, by one critic and one
    /// actor update.
    pub fn step(&mut self) -> Result<Option<UpdateStats>> {
        let sigma = self.noise.sigma(self.iteration);
        let action = select_action(
            &self.agent,
            &self.critic,
            &self.env_state.state,
            self.config.particles,
            self.config.train_steps(),
            sigma,
            &self.spec,
            &mut self.rng,
        )?;
        let out = envs::step(self.config.env, &self.env_state, &action)?;
        self.buffer.push(Transition {
            state: self.env_state.state.clone(),
            action,
            reward: out.reward,
            next_state: out.next.state.clone(),
            done: out.done,
        })?;
        self.env_state = if out.done.is_done() {
            envs::reset(self.config.env, self.rng.random())
        } else {
            out.next
        };
        self.iteration += 1;
        if self.iteration <= self.config.warmup || self.buffer.len() < self.config.batch_size {
            return Ok(None);
        }
        let stats = self.update()?;
        self.running.critic += stats.critic_loss;
        self.running.actor += stats.actor_loss;
        self.running.weight += stats.mean_weight;
        self.running.n += 1;
        Ok(Some(stats))
    }

    fn diverged(&self, what: &str) -> FpmdError {
        FpmdError::Diverged {
            iter: self.iteration,
            message: what.to_string(),
        }
    }

    fn update(&mut self) -> Result<UpdateStats> {
        let n = self.config.batch_size;
        let batch = self.buffer.sample(n, &mut self.rng)?;

        let mut next_actions =
            self.agent
                .sample(batch.next_states.view(), self.config.target_steps(), &mut self.rng)?;
        clip_rows(&mut next_actions, &self.spec);
        let closs = self
            .critic
            .critic_loss(&batch, next_actions.view(), self.config.gamma)?;
        if !closs.loss.is_finite() {
            return Err(self.diverged("critic loss is not finite"));
        }
        let applied = [
            self.q1_opt.step(&mut self.critic.q1, &closs.grads1),
            self.q2_opt.step(&mut self.critic.q2, &closs.grads2),
        ];
        if applied.contains(&StepOutcome::SkippedNonFinite) {
            return Err(self.diverged("critic gradient is not finite"));
        }

        let states = batch.states;
        let mut a1 = self
            .agent
            .sample(states.view(), self.config.train_steps(), &mut self.rng)?;
        clip_rows(&mut a1, &self.spec);
        let q = self.critic.min_q(states.view(), a1.view(), false)?.to_vec();
        let a0 = self.agent.actor().prior().sample(n, &mut self.rng);
        let lambda = self.config.lambda;
        let (loss, grads, mean_weight) = match &mut self.agent {
            Agent::Flow(policy) => {
                let t = Array1::from_shape_fn(n, |_| self.rng.random::<f32>());
                let fb = FlowBatch { states, a0, a1, t };
                let out = policy.fpmd_loss(&fb, &q, lambda)?;
                (out.loss, out.grads, out.mean_weight)
            }
            Agent::MeanFlow(policy) => {
                let (mut r, mut t) = (Array1::zeros(n), Array1::zeros(n));
                for i in 0..n {
                    let (ri, ti) = self.rt.sample(&mut self.rng);
                    r[i] = ri as f32;
                    t[i] = ti as f32;
                }
                let mb = MeanFlowBatch {
                    states,
                    a0,
                    a1,
                    r,
                    t,
                };
                let out = policy.mpmd_loss(policy, &mb, &q, lambda)?;
                (out.loss, out.grads, out.mean_weight)
            }
        };
        if !loss.is_finite() {
            return Err(self.diverged("actor loss is not finite"));
        }
        let net = match &mut self.agent {
            Agent::Flow(p) => p.net_mut(),
            Agent::MeanFlow(p) => p.net_mut(),
        };
        if self.actor_opt.step(net, &grads) == StepOutcome::SkippedNonFinite {
            return Err(self.diverged("actor gradient is not finite"));
        }
        self.critic.polyak_update(self.config.tau);
        Ok(UpdateStats {
            critic_loss: closs.loss as f64,
            actor_loss: loss as f64,
            mean_weight: mean_weight as f64,
        })
    }

    /// Evaluates the current actor and drains the running loss averages
    /// into a metrics record.
    pub fn record(&mut self) -> Result<MetricsRecord> {
        let report = evaluate(
            &self.agent,
            self.config.env,
            self.config.eval_episodes,
            self.config.k_eval,
        )?;
        let r = self.running;
        self.running = Running::default();
        Ok(MetricsRecord {
            iter: self.iteration,
            env_steps: self.iteration,
            eval_return: report.mean_return,
            critic_loss: r.mean(r.critic),
            actor_loss: r.mean(r.actor),
            mean_weight: r.mean(r.weight),
            sigma_now: self.noise.sigma(self.iteration),
            nfe_per_action: report.nfe_per_action,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub records: Vec<MetricsRecord>,
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: Checkpoint,
}

pub fn checkpoint_dir(out_dir: &Path, iteration: u64) -> PathBuf {
    out_dir.join(format!("ckpt_{iteration:08}"))
}

fn due(interval: u64, iter: u64) -> bool {
    interval > 0 && iter % interval == 0
}

/// Runs `config.iterations` steps, writing `metrics.jsonl` and checkpoint
/// directories under `out_dir`. A checkpoint is always written before the
/// first step and after the last.
pub fn train(config: &TrainConfig, out_dir: &Path) -> Result<TrainSummary> {
    fs::create_dir_all(out_dir)?;
    let mut trainer = Trainer::new(config.clone())?;
    let mut metrics = BufWriter::new(File::create(out_dir.join(METRICS_FILE))?);
    let mut records = Vec::new();
    let mut checkpoints = Vec::new();
    let write_ckpt = |t: &Trainer, list: &mut Vec<PathBuf>| -> Result<()> {
        let dir = checkpoint_dir(out_dir, t.iteration());
        t.checkpoint().write(&dir)?;
        list.push(dir);
        Ok(())
    };
    write_ckpt(&trainer, &mut checkpoints)?;
    for _ in 0..config.iterations {
        if let Err(e) = trainer.step() {
            let record = serde_json::json!({
                "iter": trainer.iteration(),
                "error": e.to_string(),
            });
            fs::write(out_dir.join(ABORT_FILE), format!("{record}\n"))?;
            metrics.flush()?;
            return Err(e);
        }
        let iter = trainer.iteration();
        let last = iter == config.iterations;
        if due(config.eval_interval, iter) || last {
            let record = trainer.record()?;
            serde_json::to_writer(&mut metrics, &record)?;
            metrics.write_all(b"\n")?;
            records.push(record);
        }
        if (due(config.checkpoint_interval, iter) || last) && iter > 0 {
            write_ckpt(&trainer, &mut checkpoints)?;
        }
    }
    metrics.flush()?;
    Ok(TrainSummary {
        records,
        checkpoints,
        final_checkpoint: trainer.checkpoint(),
    })
}
