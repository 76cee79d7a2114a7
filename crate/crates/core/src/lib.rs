//! Kalman-filtered stochastic gradient descent.
//!
//! Stochastic gradients are treated as noisy measurements of a latent
//! gradient that follows a random walk; a linear time-varying Kalman filter
//! estimates it online and the optimizer steps along the estimate. The crate
//! provides:
//!
//! - [`dense`] / [`rng`]: the small linear algebra and deterministic sampling
//!   everything else is built on;
//! - [`models`] and [`kalman`]: state-space setups for plain, momentum and
//!   RMSProp dynamics, and the filter recursions with their diagnostics;
//! - [`optimizers`]: SGD, momentum, RMSProp and their filtered counterparts;
//! - [`distributed`]: the block-diagonal variant running one small filter per
//!   parameter block;
//! - [`problems`]: gradient oracles (2-D bowl, quadratics, BBVI, MLP regression);
//! - [`harness`] and [`verify`]: seeded experiment runs with CSV traces, and the
//!   numerical diagnostic suite.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dense;
pub mod distributed;
pub mod error;
pub mod harness;
pub mod kalman;
pub mod models;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod verify;

pub use dense::{Mat, Vector};
pub use error::{KgdError, Result};
pub use optimizers::{Method, OptState, OptimizerConfig, ScheduleSpec};
pub use rng::Rng;
