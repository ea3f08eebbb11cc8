use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::config::{TrainConfig, Variant};
use crate::critic::CriticPair;
use crate::envs::EnvSpec;
use crate::error::{FpmdError, Result};
use crate::policy::{Actor, FlowPolicy, GaussianPrior, MeanFlowPolicy};
use crate::tensor::checkpoint::TensorArchive;

pub const CONFIG_FILE: &str = "config.txt";

#[derive(Debug, Clone, PartialEq)]
pub enum Agent {
    Flow(FlowPolicy),
    MeanFlow(MeanFlowPolicy),
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(config: &TrainConfig, rng: &mut R) -> Result<Self> {
        let spec = config.env.spec();
        let prior = prior_for(config)?;
        let hidden = config.hidden_sizes();
        Ok(match config.variant {
            Variant::FlowRegression => {
                Agent::Flow(FlowPolicy::new(spec.state_dim, &hidden, prior, rng)?)
            }
            Variant::MeanFlow => Agent::MeanFlow(MeanFlowPolicy::new(
                spec.state_dim,
                &hidden,
                prior,
                config.meanflow_convention,
                rng,
            )?),
        })
    }

    pub fn variant(&self) -> Variant {
        match self {
            Agent::Flow(_) => Variant::FlowRegression,
            Agent::MeanFlow(_) => Variant::MeanFlow,
        }
    }

    pub fn actor(&self) -> &dyn Actor<f32> {
        match self {
            Agent::Flow(p) => p,
            Agent::MeanFlow(p) => p,
        }
    }

    /// Fresh prior draws transported with `steps` network evaluations per
    /// row. Not clipped.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        states: ArrayView2<'_, f32>,
        steps: usize,
        rng: &mut R,
    ) -> Result<Array2<f32>> {
        let actor = self.actor();
        let a0 = actor.prior().sample(states.nrows(), rng);
        actor.transport(states, a0.view(), steps)
    }
}

pub(crate) fn prior_for(config: &TrainConfig) -> Result<GaussianPrior<f32>> {
    GaussianPrior::isotropic(
        config.env.spec().action_dim,
        config.prior_mean,
        config.prior_std,
    )
}

pub(crate) fn clip_rows(actions: &mut Array2<f32>, spec: &EnvSpec) {
    for mut row in actions.rows_mut() {
        for (j, a) in row.iter_mut().enumerate() {
            *a = a.clamp(spec.action_low[j] as f32, spec.action_high[j] as f32);
        }
    }
}

/// Everything needed to resume evaluation of a run: the config snapshot,
/// the actor and all four critic networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub iteration: u64,
    pub agent: Agent,
    pub critic: CriticPair,
}

impl Checkpoint {
    pub fn to_archive(&self) -> TensorArchive {
        let mut archive = TensorArchive::new();
        archive.push("actor", self.actor_net().clone());
        archive.push("critic_q1", self.critic.q1.clone());
        archive.push("critic_q2", self.critic.q2.clone());
        archive.push("critic_target1", self.critic.target1.clone());
        archive.push("critic_target2", self.critic.target2.clone());
        archive.set_meta("variant", self.config.variant);
        archive.set_meta("env", self.config.env);
        archive.set_meta("iteration", self.iteration);
        archive.set_meta("meanflow_convention", self.config.meanflow_convention);
        archive
    }

    fn actor_net(&self) -> &crate::tensor::Mlp<f32> {
        self.agent.actor().net()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.to_archive().write(dir)?;
        fs::write(dir.join(CONFIG_FILE), self.config.to_text())?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let archive = TensorArchive::read(dir)?;
        let bad = |message: String| FpmdError::Checkpoint {
            path: dir.to_path_buf(),
            message,
        };
        let config = TrainConfig::load(&dir.join(CONFIG_FILE))
            .map_err(|e| bad(format!("config snapshot: {e}")))?;
        let net = |name: &str| {
            archive
                .network(name)
                .cloned()
                .ok_or_else(|| bad(format!("missing network `{name}`")))
        };
        let iteration = archive
            .meta("iteration")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing iteration".into()))?;
        if archive.meta("variant") != Some(config.variant.name()) {
            return Err(bad("variant in manifest disagrees with config".into()));
        }
        let spec = config.env.spec();
        let prior = prior_for(&config)?;
        let actor = net("actor")?;
        let agent = match config.variant {
            Variant::FlowRegression => {
                Agent::Flow(FlowPolicy::from_parts(actor, prior, spec.state_dim)?)
            }
            Variant::MeanFlow => Agent::MeanFlow(MeanFlowPolicy::from_parts(
                actor,
                prior,
                spec.state_dim,
                config.meanflow_convention,
            )?),
        };
        let critic = CriticPair {
            q1: net("critic_q1")?,
            q2: net("critic_q2")?,
            target1: net("critic_target1")?,
            target2: net("critic_target2")?,
            tau: config.tau,
        };
        Ok(Checkpoint {
            config,
            iteration,
            agent,
            critic,
        })
    }
}
