use fpmd::critic::CriticPair;
use fpmd::diagnostics::w2::{assignment_w2_sq, sorted_w2_sq};
use fpmd::diagnostics::{
    calibrate_epsilon, check_one_step_bound, dump_trajectories, empirical_w2, straightness_defect,
    validate_meanflow_fixed_point, write_trajectories, AnalyticField, BoundConfig, FixedPointConfig, SampleSet,
    W2Method,
};
use fpmd::envs::{self, EnvId};
use fpmd::policy::{FlowPolicy, GaussianPrior, MeanFlowConvention, MeanFlowPolicy};
use fpmd::tensor::{Activation, Layer, Mlp};
use fpmd::trainer::{Agent, Checkpoint, TrainConfig, Variant};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn normal_set(seed: u64, n: usize, d: usize, mean: f64, sd: f64) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(mean, sd).unwrap();
    SampleSet::new(Array2::from_shape_simple_fn((n, d), || dist.sample(&mut rng)), "normal").unwrap()
}

#[test]
fn equal_variance_gaussians_are_their_mean_gap_apart() {
    let a = normal_set(1, 10_000, 1, 0.0, 1.0);
    let b = normal_set(2, 10_000, 1, 2.0, 1.0);
    let est = empirical_w2(&a, &b).unwrap();
    assert_eq!(est.method, W2Method::SortedExact);
    assert!((est.distance() - 2.0).abs() < 0.05, "{}", est.distance());
}

#[test]
fn two_point_translation() {
    let a = SampleSet::new(Array2::zeros((2, 1)), "a").unwrap();
    let b = SampleSet::new(Array2::ones((2, 1)), "b").unwrap();
    assert_eq!(empirical_w2(&a, &b).unwrap().distance(), 1.0);
}

#[test]
fn large_multivariate_sets_fall_back_to_slicing() {
    let a = normal_set(3, 600, 2, 0.0, 1.0);
    let b = normal_set(4, 600, 2, 0.0, 1.0);
    let est = empirical_w2(&a, &b).unwrap();
    assert_eq!(est.method, W2Method::SlicedApproximate);
    assert!(!est.is_exact());
    assert!(empirical_w2(&a, &normal_set(5, 600, 3, 0.0, 1.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w2_is_a_symmetric_translation_covariant_distance(
        seed in 0u64..10_000,
        n in 2usize..24,
        d in 1usize..4,
        shift in -5.0f64..5.0,
    ) {
        let a = normal_set(seed, n, d, 0.0, 1.0);
        let b = normal_set(seed + 1, n, d, 0.3, 2.0);
        let ab = empirical_w2(&a, &b).unwrap().squared;
        let ba = empirical_w2(&b, &a).unwrap().squared;
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-10 * (1.0 + ab));
        let moved = |s: &SampleSet| SampleSet::new(s.points() + shift, "moved").unwrap();
        let shifted = empirical_w2(&moved(&a), &moved(&b)).unwrap().squared;
        prop_assert!((shifted - ab).abs() <= 1e-10 * (1.0 + ab));
        prop_assert_eq!(empirical_w2(&a, &a).unwrap().squared, 0.0);
    }

    #[test]
    fn assignment_agrees_with_sorting_in_one_dimension(seed in 0u64..10_000, n in 2usize..40) {
        let a = normal_set(seed, n, 1, 0.0, 1.0);
        let b = normal_set(seed ^ 99, n, 1, 1.0, 0.5);
        let exact = assignment_w2_sq(a.points(), b.points());
        let sorted = sorted_w2_sq(a.points().column(0), b.points().column(0));
        prop_assert!((exact - sorted).abs() <= 1e-10 * (1.0 + sorted));
    }

    #[test]
    fn permuted_copies_are_at_distance_zero(seed in 0u64..10_000, n in 2usize..30) {
        let a = normal_set(seed, n, 2, 0.0, 1.0);
        let mut rows: Vec<usize> = (0..n).collect();
        rows.reverse();
        let b = SampleSet::new(a.points().select(ndarray::Axis(0), &rows), "reversed").unwrap();
        prop_assert!(empirical_w2(&a, &b).unwrap().squared.abs() < 1e-12);
    }
}

#[test]
fn same_distribution_estimates_rarely_exceed_the_calibrated_tolerance() {
    // the 1-D estimator is right-skewed: mean + 4 sd sits near its 99th
    // percentile, and a 32-pair calibration can land a little below that
    for d in [1, 2, 4, 8] {
        let eps = calibrate_epsilon(512, d, 1.0, 17).unwrap();
        let over = (0..100)
            .filter(|k| {
                let a = normal_set(1000 + 2 * k, 512, d, 0.0, 1.0);
                let b = normal_set(1001 + 2 * k, 512, d, 0.0, 1.0);
                empirical_w2(&a, &b).unwrap().squared > eps.value
            })
            .count();
        let allowed = if d == 1 { 5 } else { 0 };
        assert!(over <= allowed, "d={d}: {over}/100 above {}", eps.value);
    }
}

fn zero_field_meanflow(conv: MeanFlowConvention) -> MeanFlowPolicy<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let prior = GaussianPrior::isotropic(1, 0.0, 1.0).unwrap();
    let mut p = MeanFlowPolicy::<f64>::new(1, &[16, 16], prior, conv, &mut rng).unwrap();
    p.net_mut().zero_output_layer();
    p
}

#[test]
fn operator_maps_the_zero_field_to_a_constant_velocity_exactly() {
    for conv in [MeanFlowConvention::PaperLiteral, MeanFlowConvention::ForwardFromR] {
        let u0 = zero_field_meanflow(conv);
        let n = 50;
        let points = Array2::from_shape_fn((n, 1), |(i, _)| -1.0 + 0.04 * i as f64);
        let r: Vec<f64> = (0..n).map(|i| 0.01 * i as f64).collect();
        let t: Vec<f64> = (0..n).map(|i| 0.5 + 0.01 * i as f64).collect();
        let v = Array2::from_elem((n, 1), 0.5);
        let target = u0
            .meanflow_target(Array2::zeros((n, 1)).view(), points.view(), &r, &t, v.view())
            .unwrap();
        assert!(target.view().iter().all(|&x| x == 0.5));
    }
}

#[test]
fn fixed_point_error_falls_over_the_first_iterations() {
    let cfg = FixedPointConfig {
        outer_iterations: 5,
        ..Default::default()
    };
    let report = validate_meanflow_fixed_point(AnalyticField::Linear, &cfg).unwrap();
    assert_eq!(report.sup_errors.len(), 5);
    assert_eq!(report.contraction_ratios.len(), 4);
    for w in report.sup_errors.windows(2) {
        assert!(w[1] <= w[0], "{:?}", report.sup_errors);
    }
}

fn constant_flow_checkpoint(c: [f64; 2]) -> Checkpoint {
    let config = TrainConfig {
        iterations: 0,
        ..Default::default()
    };
    let layer = Layer {
        weight: Array2::zeros((2, 2 + 2 + 1)),
        bias: Array1::from(c.iter().map(|&x| x as f32).collect::<Vec<_>>()),
        activation: Activation::Identity,
    };
    let net = Mlp::from_layers(vec![layer]).unwrap();
    let prior = GaussianPrior::isotropic(2, 0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Checkpoint {
        agent: Agent::Flow(FlowPolicy::from_parts(net, prior, 2).unwrap()),
        critic: CriticPair::new(2, 2, &[8], 0.005, &mut rng).unwrap(),
        iteration: 0,
        config,
    }
}

#[test]
fn constant_field_trajectories_are_straight_segments() {
    let c = [0.25, -0.5];
    let ckpt = constant_flow_checkpoint(c);
    let dumps = dump_trajectories(&ckpt, EnvId::PointMass2d, 3, 5, 10, 0).unwrap();
    assert_eq!(dumps.len(), 15);
    for d in &dumps {
        assert_eq!(d.points.len(), 11);
        assert_eq!(d.variant, Variant::FlowRegression);
        assert!(d.straightness_defect < 1e-6);
        let (first, last) = (&d.points[0].a, &d.points[10].a);
        for j in 0..2 {
            assert!((last[j] - first[j] - c[j]).abs() < 1e-5);
        }
        assert!(d.points.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!((d.points[0].t, d.points[10].t), (0.0, 1.0));
    }
}

#[test]
fn single_step_trajectories_have_two_points() {
    let ckpt = constant_flow_checkpoint([0.1, 0.1]);
    let dumps = dump_trajectories(&ckpt, EnvId::PointMass2d, 2, 4, 1, 3).unwrap();
    assert!(dumps.iter().all(|d| d.points.len() == 2 && d.steps == 1));
    assert!(dump_trajectories(&ckpt, EnvId::PointMass2d, 2, 4, 0, 3).is_err());
    assert!(dump_trajectories(&ckpt, EnvId::Pendulum, 2, 4, 1, 3).is_err());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.jsonl");
    write_trajectories(&path, &dumps).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), dumps.len());
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 2);
        assert_eq!(v["variant"], "fpmd-r");
    }
}

#[test]
fn meanflow_trajectories_follow_the_average_velocity() {
    let config = TrainConfig {
        variant: Variant::MeanFlow,
        k_target: Some(1),
        hidden_width: 8,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ckpt = Checkpoint {
        agent: Agent::new(&config, &mut rng).unwrap(),
        critic: CriticPair::new(2, 2, &[8], 0.005, &mut rng).unwrap(),
        iteration: 0,
        config,
    };
    let dumps = dump_trajectories(&ckpt, EnvId::PointMass2d, 1, 2, 4, 0).unwrap();
    let Agent::MeanFlow(policy) = &ckpt.agent else { unreachable!() };
    for d in dumps {
        let a0: Vec<f32> = d.points[0].a.iter().map(|&x| x as f32).collect();
        let s: Vec<f32> = d.state.iter().map(|&x| x as f32).collect();
        let u = policy.avg_velocity(&s, &a0, 0.0, 1.0).unwrap();
        for j in 0..2 {
            assert!((d.points[4].a[j] - (a0[j] + u[j]) as f64).abs() < 1e-6);
        }
    }
}

#[test]
fn straightness_defect_is_scale_free() {
    let path: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 0.3], vec![2.0, 0.0]];
    let scaled: Vec<Vec<f64>> = path.iter().map(|p| p.iter().map(|x| 7.0 * x).collect()).collect();
    assert!((straightness_defect(&path) - 0.15).abs() < 1e-12);
    assert!((straightness_defect(&scaled) - 0.15).abs() < 1e-12);
}

#[test]
fn untrained_twogoal_actor_satisfies_the_bound_on_most_states() {
    let config = TrainConfig {
        env: EnvId::TwoGoal,
        hidden_width: 32,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let agent = Agent::new(&config, &mut rng).unwrap();
    let states: Vec<Vec<f64>> = (0..20).map(|s| envs::reset(EnvId::TwoGoal, s).state).collect();
    let cfg = BoundConfig {
        samples: 256,
        ..Default::default()
    };
    let report = check_one_step_bound(&agent, &states, &cfg).unwrap();
    assert_eq!(report.len(), 20);
    let holding = report.iter().filter(|b| b.holds).count();
    assert!(holding * 100 >= 95 * report.len(), "{holding}/20");
    assert!(report.iter().all(|b| b.refinement_agrees));
    assert!(report.iter().all(|b| (b.margin - (b.variance + b.epsilon_est - b.w2_sq)).abs() < 1e-12));
}

#[test]
fn bound_check_rejects_meanflow_actors() {
    let config = TrainConfig {
        variant: Variant::MeanFlow,
        k_target: Some(1),
        hidden_width: 8,
        ..Default::default()
    };
    let agent = Agent::new(&config, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(agent.actor().action_dim(), 2);
    assert!(check_one_step_bound(&agent, &[vec![0.0, 0.0]], &BoundConfig::default()).is_err());
}
