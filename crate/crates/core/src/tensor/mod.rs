//! Numerical core shared by the actors and the critic: dense networks with
//! reverse-mode gradients and forward-mode directional derivatives, a
//! stop-gradient marker, Adam, and the on-disk tensor format.

mod adam;
pub mod checkpoint;
pub mod counter;
mod mlp;

use std::fmt::{Debug, Display};

use ndarray::{Array2, ArrayView2, LinalgScalar, ScalarOperand};
use num_traits::Float;

pub use adam::{Adam, AdamConfig, StepOutcome};
pub use mlp::{Activation, Layer, Mlp, ParamGrads};

/// Floating-point element type of networks and batches.
pub trait Scalar:
    Float + LinalgScalar + ScalarOperand + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + LinalgScalar + ScalarOperand + Debug + Display + Default + Send + Sync + 'static
{
}

/// A batch whose value takes part in a loss but never in its gradient.
///
/// Losses accept regression targets only in this form, so a target computed
/// from network outputs cannot leak derivatives back into those networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Detached<T>(Array2<T>);

impl<T: Scalar> Detached<T> {
    pub fn view(&self) -> ArrayView2<'_, T> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<T> {
        self.0
    }
}

/// Stop-gradient: returns the same values, marked as a constant.
pub fn stop_gradient<T: Scalar>(x: Array2<T>) -> Detached<T> {
    Detached(x)
}
