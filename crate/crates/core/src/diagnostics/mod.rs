//! Empirical checks of the one-step sampling error, the mean-flow fixed
//! point, and sampling-trajectory dumps.

mod bound;
mod epsilon;
mod fixed_point;
mod known_targets;
mod trajectories;
pub mod w2;

pub use bound::{check_one_step_bound, BoundConfig, StateBound};
pub use epsilon::{calibrate_epsilon, EpsilonEstimate, CALIBRATION_REPS};
pub use fixed_point::{
    analytic_average_velocity, probe_grid, validate_meanflow_fixed_point, AnalyticField,
    FixedPointConfig, FixedPointReport,
};
pub use known_targets::{
    train_unconditional_flow, validate_flow_known_targets, flow_target_report, FlowFixture, FlowTargetReport,
    FlowTrainConfig,
};
pub use trajectories::{
    dump_trajectories, mean_straightness, straightness_defect, write_trajectories,
    TrajectoryDump, TrajectoryPoint,
};
pub use w2::{empirical_w2, SampleSet, W2Estimate, W2Method};
