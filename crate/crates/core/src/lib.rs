//! Flow policy mirror descent.
//!
//! Online actor-critic learning where the actor is a flow-matching velocity
//! field (`fpmd-r`) or an average-velocity field (`fpmd-m`), trained by
//! exp(Q/λ)-weighted regression and sampled with a single network evaluation
//! at inference time. The crate also ships the toy environments it is tested
//! on and the diagnostics used to check one-step sampling error empirically.

pub mod critic;
pub mod diagnostics;
pub mod envs;
pub mod error;
pub mod policy;
pub mod tensor;
pub mod trainer;

pub use error::{FpmdError, Result};
