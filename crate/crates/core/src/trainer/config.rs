//! Flat `key = value` run configuration.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::envs::EnvId;
use crate::error::{FpmdError, Result};
use crate::policy::MeanFlowConvention;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Flow-matching actor sampled with Euler steps.
    FlowRegression,
    /// Mean-flow actor sampled in one step.
    MeanFlow,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::FlowRegression => "fpmd-r",
            Variant::MeanFlow => "fpmd-m",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl serde::Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = FpmdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fpmd-r" => Ok(Variant::FlowRegression),
            "fpmd-m" => Ok(Variant::MeanFlow),
            other => Err(FpmdError::InvalidArgument(format!(
                "unknown variant `{other}` (expected fpmd-r or fpmd-m)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub env: EnvId,
    pub lambda: f64,
    pub gamma: f64,
    pub tau: f64,
    pub particles: usize,
    pub k_train: usize,
    pub k_eval: usize,
    /// Sampling steps for the bootstrap action; `None` uses the
    /// training-time count of the variant.
    pub k_target: Option<usize>,
    /// `None` means `0.2 ×` half the action range.
    pub sigma_start: Option<f64>,
    pub sigma_end: f64,
    /// `None` means half of `iterations`.
    pub sigma_decay_iters: Option<u64>,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden_width: usize,
    pub hidden_depth: usize,
    pub iterations: u64,
    pub warmup: u64,
    pub seed: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub checkpoint_interval: u64,
    pub meanflow_convention: MeanFlowConvention,
    pub prior_mean: f64,
    pub prior_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::FlowRegression,
            env: EnvId::PointMass2d,
            lambda: 1.0,
            gamma: 0.99,
            tau: 0.005,
            particles: 32,
            k_train: 20,
            k_eval: 1,
            k_target: None,
            sigma_start: None,
            sigma_end: 0.02,
            sigma_decay_iters: None,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            hidden_width: 256,
            hidden_depth: 2,
            iterations: 100_000,
            warmup: 1000,
            seed: 0,
            eval_interval: 5000,
            eval_episodes: 10,
            checkpoint_interval: 0,
            meanflow_convention: MeanFlowConvention::default(),
            prior_mean: 0.0,
            prior_std: 1.0,
        }
    }
}

const KEYS: &[&str] = &[
    "variant",
    "env",
    "lambda",
    "gamma",
    "tau",
    "particles",
    "k_train",
    "k_eval",
    "k_target",
    "sigma_start",
    "sigma_end",
    "sigma_decay_iters",
    "batch_size",
    "buffer_capacity",
    "actor_lr",
    "critic_lr",
    "hidden_width",
    "hidden_depth",
    "iterations",
    "warmup",
    "seed",
    "eval_interval",
    "eval_episodes",
    "checkpoint_interval",
    "meanflow_convention",
    "prior_mean",
    "prior_std",
];

fn parse_value<V: FromStr>(line: usize, key: &str, raw: &str) -> Result<V> {
    raw.parse().map_err(|_| FpmdError::Config {
        line,
        message: format!("invalid value `{raw}` for `{key}`"),
    })
}

impl TrainConfig {
    /// Parses `key = value` lines on top of the defaults. `#` starts a
    /// comment; blank lines are ignored; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| FpmdError::Config {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(line_no, key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let named = |e: FpmdError| FpmdError::Config {
            line,
            message: e.to_string(),
        };
        match key {
            "variant" => self.variant = value.parse().map_err(named)?,
            "env" => self.env = value.parse().map_err(named)?,
            "lambda" => self.lambda = parse_value(line, key, value)?,
            "gamma" => self.gamma = parse_value(line, key, value)?,
            "tau" => self.tau = parse_value(line, key, value)?,
            "particles" => self.particles = parse_value(line, key, value)?,
            "k_train" => self.k_train = parse_value(line, key, value)?,
            "k_eval" => self.k_eval = parse_value(line, key, value)?,
            "k_target" => self.k_target = Some(parse_value(line, key, value)?),
            "sigma_start" => self.sigma_start = Some(parse_value(line, key, value)?),
            "sigma_end" => self.sigma_end = parse_value(line, key, value)?,
            "sigma_decay_iters" => self.sigma_decay_iters = Some(parse_value(line, key, value)?),
            "batch_size" => self.batch_size = parse_value(line, key, value)?,
            "buffer_capacity" => self.buffer_capacity = parse_value(line, key, value)?,
            "actor_lr" => self.actor_lr = parse_value(line, key, value)?,
            "critic_lr" => self.critic_lr = parse_value(line, key, value)?,
            "hidden_width" => self.hidden_width = parse_value(line, key, value)?,
            "hidden_depth" => self.hidden_depth = parse_value(line, key, value)?,
            "iterations" => self.iterations = parse_value(line, key, value)?,
            "warmup" => self.warmup = parse_value(line, key, value)?,
            "seed" => self.seed = parse_value(line, key, value)?,
            "eval_interval" => self.eval_interval = parse_value(line, key, value)?,
            "eval_episodes" => self.eval_episodes = parse_value(line, key, value)?,
            "checkpoint_interval" => self.checkpoint_interval = parse_value(line, key, value)?,
            "meanflow_convention" => self.meanflow_convention = value.parse().map_err(named)?,
            "prior_mean" => self.prior_mean = parse_value(line, key, value)?,
            "prior_std" => self.prior_std = parse_value(line, key, value)?,
            other => {
                return Err(FpmdError::Config {
                    line,
                    message: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(FpmdError::Config { line: 0, message });
        let positive = [
            ("lambda", self.lambda),
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("prior_std", self.prior_std),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("`{name}` must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("`gamma` must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail(format!("`tau` must lie in (0, 1], got {}", self.tau));
        }
        let counts = [
            ("particles", self.particles),
            ("k_train", self.k_train),
            ("k_eval", self.k_eval),
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("hidden_width", self.hidden_width),
            ("eval_episodes", self.eval_episodes),
        ];
        for (name, v) in counts {
            if v == 0 {
                return fail(format!("`{name}` must be at least 1"));
            }
        }
        if self.k_target == Some(0) {
            return fail("`k_target` must be at least 1".into());
        }
        if self.variant == Variant::MeanFlow && (self.k_eval != 1 || self.k_target.unwrap_or(1) != 1)
        {
            return fail("fpmd-m samples in one step: `k_eval` and `k_target` must be 1".into());
        }
        if self.batch_size > self.buffer_capacity {
            return fail("`batch_size` exceeds `buffer_capacity`".into());
        }
        let sigmas = [Some(self.sigma_end), self.sigma_start];
        if sigmas.iter().flatten().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return fail("noise scales must be finite and non-negative".into());
        }
        if self.sigma_start.unwrap_or(f64::INFINITY) < self.sigma_end {
            return fail("`sigma_start` must be at least `sigma_end`".into());
        }
        if !self.prior_mean.is_finite() {
            return fail("`prior_mean` must be finite".into());
        }
        Ok(())
    }

    /// Sampling steps used for training-time actor samples.
    pub fn train_steps(&self) -> usize {
        match self.variant {
            Variant::FlowRegression => self.k_train,
            Variant::MeanFlow => 1,
        }
    }

    pub fn target_steps(&self) -> usize {
        self.k_target.unwrap_or_else(|| self.train_steps())
    }

    pub fn resolved_sigma_start(&self) -> f64 {
        self.sigma_start
            .unwrap_or_else(|| 0.2 * self.env.spec().action_half_width())
    }

    pub fn resolved_decay_iters(&self) -> u64 {
        self.sigma_decay_iters.unwrap_or(self.iterations / 2)
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        vec![self.hidden_width; self.hidden_depth]
    }

    /// Renders every key; optional keys left at their automatic value are
    /// omitted. `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = match *key {
                "variant" => self.variant.to_string(),
                "env" => self.env.to_string(),
                "lambda" => self.lambda.to_string(),
                "gamma" => self.gamma.to_string(),
                "tau" => self.tau.to_string(),
                "particles" => self.particles.to_string(),
                "k_train" => self.k_train.to_string(),
                "k_eval" => self.k_eval.to_string(),
                "k_target" => match self.k_target {
                    Some(k) => k.to_string(),
                    None => continue,
                },
                "sigma_start" => match self.sigma_start {
                    Some(s) => s.to_string(),
                    None => continue,
                },
                "sigma_end" => self.sigma_end.to_string(),
                "sigma_decay_iters" => match self.sigma_decay_iters {
                    Some(n) => n.to_string(),
                    None => continue,
                },
                "batch_size" => self.batch_size.to_string(),
                "buffer_capacity" => self.buffer_capacity.to_string(),
                "actor_lr" => self.actor_lr.to_string(),
                "critic_lr" => self.critic_lr.to_string(),
                "hidden_width" => self.hidden_width.to_string(),
                "hidden_depth" => self.hidden_depth.to_string(),
                "iterations" => self.iterations.to_string(),
                "warmup" => self.warmup.to_string(),
                "seed" => self.seed.to_string(),
                "eval_interval" => self.eval_interval.to_string(),
                "eval_episodes" => self.eval_episodes.to_string(),
                "checkpoint_interval" => self.checkpoint_interval.to_string(),
                "meanflow_convention" => self.meanflow_convention.to_string(),
                "prior_mean" => self.prior_mean.to_string(),
                "prior_std" => self.prior_std.to_string(),
                _ => unreachable!("key list and renderer out of sync"),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}
