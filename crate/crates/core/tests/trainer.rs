use std::fs;

use fpmd::envs::{Done, EnvId};
use fpmd::policy::MeanFlowConvention;
use fpmd::trainer::{
    checkpoint_dir, evaluate, train, Agent, Checkpoint, ReplayBuffer, TrainConfig, Transition, Variant, METRICS_FILE,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny(variant: Variant, iterations: u64) -> TrainConfig {
    TrainConfig {
        variant,
        iterations,
        warmup: 50,
        hidden_width: 16,
        batch_size: 32,
        particles: 4,
        k_train: 4,
        eval_interval: 100,
        eval_episodes: 2,
        meanflow_convention: MeanFlowConvention::ForwardFromR,
        ..Default::default()
    }
}

#[test]
fn zero_iterations_write_only_the_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let summary = train(&tiny(Variant::FlowRegression, 0), dir.path()).unwrap();
    assert!(summary.records.is_empty());
    assert_eq!(fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap(), "");
    assert_eq!(summary.checkpoints, vec![checkpoint_dir(dir.path(), 0)]);
    let ckpt = Checkpoint::read(&summary.checkpoints[0]).unwrap();
    assert_eq!(ckpt.iteration, 0);
    assert_eq!(ckpt, summary.final_checkpoint);
}

#[test]
fn identical_seeds_give_bit_identical_logs() {
    for variant in [Variant::FlowRegression, Variant::MeanFlow] {
        let cfg = tiny(variant, 300);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = train(&cfg, a.path()).unwrap();
        let rb = train(&cfg, b.path()).unwrap();
        let la = fs::read(a.path().join(METRICS_FILE)).unwrap();
        let lb = fs::read(b.path().join(METRICS_FILE)).unwrap();
        assert_eq!(String::from_utf8(la.clone()).unwrap().lines().count(), 3);
        assert_eq!(la, lb);
        assert_eq!(ra.final_checkpoint, rb.final_checkpoint);

        let other = TrainConfig { seed: 1, ..cfg };
        let c = tempfile::tempdir().unwrap();
        train(&other, c.path()).unwrap();
        assert_ne!(la, fs::read(c.path().join(METRICS_FILE)).unwrap());
    }
}

#[test]
fn short_run_beats_the_untrained_actor() {
    let cfg = TrainConfig {
        iterations: 2000,
        hidden_width: 64,
        batch_size: 128,
        gamma: 0.9,
        critic_lr: 1e-3,
        eval_interval: 0,
        eval_episodes: 20,
        ..Default::default()
    };
    let untrained = Agent::new(&cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
    let baseline = evaluate(&untrained, EnvId::PointMass2d, 20, 1).unwrap().mean_return;
    let dir = tempfile::tempdir().unwrap();
    let summary = train(&cfg, dir.path()).unwrap();
    let trained = summary.records.last().unwrap().eval_return;
    assert!(trained > baseline, "trained {trained} vs untrained {baseline}");
}

#[test]
fn evaluation_counts_network_rows_per_action() {
    for variant in [Variant::FlowRegression, Variant::MeanFlow] {
        let cfg = tiny(variant, 0);
        let agent = Agent::new(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let one = evaluate(&agent, EnvId::PointMass2d, 3, 1).unwrap();
        assert_eq!(one.nfe_per_action, 1.0);
        assert_eq!(one.returns.len(), 3);
        if variant == Variant::FlowRegression {
            assert_eq!(evaluate(&agent, EnvId::PointMass2d, 3, 20).unwrap().nfe_per_action, 20.0);
        } else {
            assert!(evaluate(&agent, EnvId::PointMass2d, 3, 20).is_err());
        }
    }
}

#[test]
fn replay_sampling_is_uniform_over_filled_slots() {
    let mut buffer = ReplayBuffer::new(100).unwrap();
    for i in 0..250 {
        buffer
            .push(Transition {
                state: vec![i as f64, 0.0],
                action: vec![0.0, 0.0],
                reward: -(i as f64),
                next_state: vec![0.0, 0.0],
                done: Done::No,
            })
            .unwrap();
    }
    let mut counts = [0usize; 100];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 100_000;
    for i in buffer.sample_indices(draws, &mut rng).unwrap() {
        counts[i] += 1;
    }
    let expected = draws as f64 / 100.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile of chi-square with 99 degrees of freedom
    assert!(chi2 < 148.2, "{chi2}");
    // only the newest 100 transitions survive
    let rewards: Vec<f64> = (0..100).map(|i| buffer.get(i).unwrap().reward).collect();
    assert!(rewards.iter().all(|&r| r <= -150.0));
}

#[test]
fn config_file_round_trip() {
    let cfg = TrainConfig {
        variant: Variant::MeanFlow,
        env: EnvId::TwoGoal,
        lambda: 0.25,
        k_target: Some(1),
        sigma_start: Some(0.3),
        sigma_decay_iters: Some(77),
        meanflow_convention: MeanFlowConvention::ForwardFromR,
        prior_std: 0.5,
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.txt");
    fs::write(&path, cfg.to_text()).unwrap();
    assert_eq!(TrainConfig::load(&path).unwrap(), cfg);
}

#[test]
fn checkpoints_round_trip_and_reject_tampering() {
    for variant in [Variant::FlowRegression, Variant::MeanFlow] {
        let dir = tempfile::tempdir().unwrap();
        let summary = train(&tiny(variant, 120), dir.path()).unwrap();
        let last = summary.checkpoints.last().unwrap();
        let read = Checkpoint::read(last).unwrap();
        assert_eq!(read, summary.final_checkpoint);
        assert_eq!(read.iteration, 120);

        let config = last.join(fpmd::trainer::CONFIG_FILE);
        let text = fs::read_to_string(&config).unwrap();
        let flipped = match variant {
            Variant::FlowRegression => text.replace("fpmd-r", "fpmd-m"),
            Variant::MeanFlow => text.replace("fpmd-m", "fpmd-r"),
        };
        fs::write(&config, flipped).unwrap();
        assert!(Checkpoint::read(last).is_err());
    }
}
