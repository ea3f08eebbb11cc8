//! Flow-matching (`fpmd-r`) and mean-flow (`fpmd-m`) actors.

pub mod flow;
pub mod meanflow;
mod prior;
mod regression;
mod weights;

use ndarray::{Array2, ArrayView2};

pub use flow::{EulerOutput, FlowBatch, FlowPolicy};
pub use meanflow::{
    fixed_point_iterate, fixed_point_iterate_scheduled, FixedPointBatch, MeanFlowBatch, MeanFlowConvention, MeanFlowPolicy,
    RtSchedule,
};
pub use prior::GaussianPrior;
pub use regression::{weighted_regression, LossOutput};
pub use weights::{importance_weights, WEIGHT_CLIP};

use crate::error::Result;
use crate::tensor::{Mlp, Scalar};

/// Each time variable enters a network as one raw coordinate.
pub const TIME_INPUTS: usize = 1;

/// What the trainer and the evaluation tools need from an actor.
pub trait Actor<T: Scalar = f32> {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn prior(&self) -> &GaussianPrior<T>;
    fn net(&self) -> &Mlp<T>;

    /// Maps prior draws `a0` to actions using `steps` network evaluations
    /// per row (mean-flow actors accept only `steps == 1`).
    fn transport(
        &self,
        states: ArrayView2<'_, T>,
        a0: ArrayView2<'_, T>,
        steps: usize,
    ) -> Result<Array2<T>>;
}
