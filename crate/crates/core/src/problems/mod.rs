//! Stochastic gradient oracles `g(x; ξ)` used by the experiments.

mod bbvi;
mod fd;
mod mlp;
mod quadratic;
mod sinbowl;

pub use bbvi::{
    bbvi_elbo_grad, bbvi_elbo_grad_frozen, bbvi_logp, bbvi_logp_grad, BbviParams, BbviProblem,
    BbviTarget,
};
pub use fd::fd_gradient;
pub use mlp::{mlp_problem, param_count, Dataset, MlpProblem, MlpSpec};
pub use quadratic::{quadratic_problem, QuadraticProblem};
pub use sinbowl::{sinbowl_f, sinbowl_grad, sinbowl_true_grad, SinBowl, SINBOWL_GRID_MIN};

use crate::dense::Vector;
use crate::rng::Rng;

/// An objective with a stochastic gradient oracle.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// `f(x)`. For expectation objectives this is a deterministic estimate
    /// with fixed common random numbers.
    fn objective(&self, x: &Vector) -> f64;

    /// One draw of `g(x; ξ)`, consuming randomness from `rng`.
    fn grad_sample(&self, x: &Vector, rng: &mut Rng) -> Vector;

    /// Analytic `∇f(x)` when it exists in closed form.
    fn true_grad(&self, x: &Vector) -> Option<Vector>;

    /// Best available deterministic gradient, used for logging `‖∇f‖`.
    fn reference_grad(&self, x: &Vector) -> Option<Vector> {
        self.true_grad(x)
    }

    /// Starting point of a run; may draw from `rng`.
    fn initial_point(&self, rng: &mut Rng) -> Vector;
}
