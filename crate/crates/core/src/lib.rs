//! Stochastic gradient descent under a local Łojasiewicz condition.
//!
//! The crate provides test landscapes with analytic gradients, estimators for
//! the constants that drive the convergence theory, the stochastic-gradient
//! noise models and iteration engines, and Monte Carlo checks that compare
//! simulated ensembles against the theoretical bounds.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constants;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod landscapes;
pub mod noise;
pub mod objective;
pub mod rng;
pub mod sgd;
pub mod vector;
pub mod verify;

pub use error::{Error, Result};
pub use exec::{with_workers, Execution};
pub use objective::{fd_gradient, gradient_discrepancy, ExactConstants, Objective};
pub use rng::RngStream;
pub use vector::ParamVector;
