//! Policy optimisation for sparse-reward tasks guided by demonstration trajectories.
//!
//! An agent trained with a clipped policy-gradient update receives an extra
//! per-step penalty whenever its trajectory's state-action distribution strays
//! further than `delta` (in squared maximum mean discrepancy) from the closest
//! demonstration. The crate contains the environments, the kernel distance,
//! the demonstration buffer, the learner and an experiment harness.

pub mod demo_store;
pub mod envs;
pub mod error;
pub mod harness;
pub mod mmd;
pub mod policy;
pub mod trajectory;

pub use error::{Error, Result};
