use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fpmd::diagnostics::{
    check_one_step_bound, dump_trajectories, mean_straightness, validate_flow_known_targets,
    validate_meanflow_fixed_point, write_trajectories, AnalyticField, BoundConfig, FixedPointConfig,
    FlowTrainConfig,
};
use fpmd::envs::{self, EnvId};
use fpmd::trainer::{self, Checkpoint, TrainConfig};
use fpmd::FpmdError;

#[derive(Parser)]
#[command(name = "fpmd", version, about = "Flow-policy mirror descent training and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent from a key=value config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        env: EnvId,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
    },
    /// Run a diagnostic and print one JSON report per line.
    Validate {
        #[arg(value_enum)]
        target: ValidateTarget,
        /// Checkpoint to probe; required by `bound`.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// Environment whose reset states are probed; defaults to the
        /// checkpoint's training environment.
        #[arg(long)]
        env: Option<EnvId>,
        #[arg(long, default_value_t = 20)]
        states: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write sampling trajectories of a checkpoint as JSON lines.
    DumpTraj {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        env: EnvId,
        #[arg(long, default_value_t = 16)]
        particles: usize,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 4)]
        states: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ValidateTarget {
    Flow,
    Meanflow,
    Bound,
}

fn run(cli: Cli) -> fpmd::Result<()> {
    match cli.command {
        Command::Train { config, out } => {
            let cfg = TrainConfig::load(&config)?;
            let summary = trainer::train(&cfg, &out)?;
            if let Some(last) = summary.records.last() {
                println!("{}", serde_json::to_string(last)?);
            }
        }
        Command::Eval {
            ckpt,
            env,
            steps,
            episodes,
        } => {
            let ck = Checkpoint::read(&ckpt)?;
            let report = trainer::evaluate(&ck.agent, env, episodes, steps)?;
            let line = serde_json::json!({
                "ckpt": ckpt.display().to_string(),
                "env": env.name(),
                "steps": steps,
                "episodes": episodes,
                "mean_return": report.mean_return,
                "nfe_per_action": report.nfe_per_action,
            });
            println!("{line}");
        }
        Command::Validate {
            target,
            ckpt,
            env,
            states,
            seed,
        } => match target {
            ValidateTarget::Flow => {
                let cfg = FlowTrainConfig {
                    seed,
                    ..Default::default()
                };
                for report in validate_flow_known_targets(&cfg)? {
                    println!("{}", serde_json::to_string(&report)?);
                }
            }
            ValidateTarget::Meanflow => {
                let cfg = FixedPointConfig {
                    seed,
                    ..Default::default()
                };
                for field in [AnalyticField::Constant(0.5), AnalyticField::Linear] {
                    let report = validate_meanflow_fixed_point(field, &cfg)?;
                    println!("{}", serde_json::to_string(&report)?);
                }
            }
            ValidateTarget::Bound => {
                let ckpt = ckpt.ok_or_else(|| FpmdError::InvalidArgument("validate bound needs --ckpt".into()))?;
                let ck = Checkpoint::read(&ckpt)?;
                let env = env.unwrap_or(ck.config.env);
                let probes: Vec<Vec<f64>> = (0..states as u64).map(|s| envs::reset(env, s).state).collect();
                let cfg = BoundConfig {
                    seed,
                    ..Default::default()
                };
                for report in check_one_step_bound(&ck.agent, &probes, &cfg)? {
                    println!("{}", serde_json::to_string(&report)?);
                }
            }
        },
        Command::DumpTraj {
            ckpt,
            env,
            particles,
            steps,
            states,
            seed,
            out,
        } => {
            let ck = Checkpoint::read(&ckpt)?;
            let dumps = dump_trajectories(&ck, env, states, particles, steps, seed)?;
            write_trajectories(&out, &dumps)?;
            let line = serde_json::json!({
                "out": out.display().to_string(),
                "trajectories": dumps.len(),
                "mean_straightness_defect": mean_straightness(&dumps),
            });
            println!("{line}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
