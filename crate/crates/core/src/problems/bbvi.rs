//! Black-box variational inference on a 2-D funnel-shaped target.
//!
//! The target is `log p(x, y) = φ(y/1.35) + φ(x/eʸ)` with `φ(u) = -u²/2 - ½ln 2π`
//! (the standard normal log-density). The variational family is a diagonal
//! Gaussian parameterised by `(μ, log σ)`, and gradients are pathwise:
//! `z = μ + σ⊙ε` with `ε` held fixed.

use super::Problem;
use crate::dense::Vector;
use crate::rng::Rng;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const Y_SCALE: f64 = 1.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BbviTarget {
    #[default]
    Funnel,
    /// `N(0, I₂)`; used to sanity-check the estimator.
    StandardNormal,
}

impl BbviTarget {
    pub fn logp(self, z: [f64; 2]) -> f64 {
        match self {
            BbviTarget::Funnel => bbvi_logp(z),
            BbviTarget::StandardNormal => -0.5 * (z[0] * z[0] + z[1] * z[1]) - 2.0 * HALF_LN_2PI,
        }
    }

    pub fn logp_grad(self, z: [f64; 2]) -> [f64; 2] {
        match self {
            BbviTarget::Funnel => {
                let g = bbvi_logp_grad(&Vector::from(z.to_vec()));
                [g[0], g[1]]
            }
            BbviTarget::StandardNormal => [-z[0], -z[1]],
        }
    }
}

pub fn bbvi_logp(z: [f64; 2]) -> f64 {
    let (x, y) = (z[0], z[1]);
    let u = y / Y_SCALE;
    let w = x * (-y).exp();
    -0.5 * u * u - 0.5 * w * w - 2.0 * HALF_LN_2PI
}

/// `∇ log p(z) = (-x e^{-2y}, -y/1.35² + x² e^{-2y})`.
pub fn bbvi_logp_grad(z: &Vector) -> Vector {
    let (x, y) = (z[0], z[1]);
    let e = (-2.0 * y).exp();
    Vector::from(vec![-x * e, -y / (Y_SCALE * Y_SCALE) + x * x * e])
}

/// Variational parameters, packed as `[μ₁, μ₂, log σ₁, log σ₂]` for the
/// optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbviParams {
    pub mu: [f64; 2],
    pub log_sigma: [f64; 2],
}

impl BbviParams {
    pub fn from_vector(v: &Vector) -> Self {
        BbviParams {
            mu: [v[0], v[1]],
            log_sigma: [v[2], v[3]],
        }
    }

    pub fn to_vector(&self) -> Vector {
        Vector::from(vec![
            self.mu[0],
            self.mu[1],
            self.log_sigma[0],
            self.log_sigma[1],
        ])
    }
}

/// ELBO estimate and its gradient with respect to `(μ, log σ)` over the given
/// standard-normal draws.
pub fn bbvi_elbo_grad_frozen(
    params: &BbviParams,
    eps: &[[f64; 2]],
    target: BbviTarget,
) -> (f64, Vector) {
    assert!(!eps.is_empty(), "at least one sample is required");
    let sigma = [params.log_sigma[0].exp(), params.log_sigma[1].exp()];
    let mut elbo = 0.0;
    let mut grad = [0.0; 4];
    for e in eps {
        let z = [
            params.mu[0] + sigma[0] * e[0],
            params.mu[1] + sigma[1] * e[1],
        ];
        // log q(z|λ) at z = μ + σ⊙ε reduces to a function of ε and log σ only
        let log_q = -0.5 * (e[0] * e[0] + e[1] * e[1])
            - params.log_sigma[0]
            - params.log_sigma[1]
            - 2.0 * HALF_LN_2PI;
        elbo += target.logp(z) - log_q;
        let g = target.logp_grad(z);
        for i in 0..2 {
            grad[i] += g[i];
            grad[2 + i] += g[i] * sigma[i] * e[i] + 1.0;
        }
    }
    let s = eps.len() as f64;
    (
        elbo / s,
        Vector::from(grad.iter().map(|g| g / s).collect::<Vec<f64>>()),
    )
}

/// Draws `samples` noise vectors from `rng` and returns the reparameterised
/// ELBO estimate and gradient.
pub fn bbvi_elbo_grad(
    params: &BbviParams,
    rng: &mut Rng,
    samples: usize,
    target: BbviTarget,
) -> (f64, Vector) {
    let eps = draw_eps(rng, samples);
    bbvi_elbo_grad_frozen(params, &eps, target)
}

fn draw_eps(rng: &mut Rng, samples: usize) -> Vec<[f64; 2]> {
    (0..samples)
        .map(|_| [rng.standard_normal(), rng.standard_normal()])
        .collect()
}

/// Minimisation of `-ELBO`.
#[derive(Debug, Clone)]
pub struct BbviProblem {
    pub target: BbviTarget,
    /// Monte Carlo samples per gradient draw.
    pub samples: usize,
    pub start: BbviParams,
    eval_eps: Vec<[f64; 2]>,
}

impl BbviProblem {
    pub const EVAL_SAMPLES: usize = 4000;
    const EVAL_SEED: u64 = 0x0b1b_e7a1;

    pub fn new(target: BbviTarget, samples: usize) -> Self {
        assert!(samples >= 1, "samples must be >= 1");
        BbviProblem {
            target,
            samples,
            start: BbviParams {
                mu: [-1.0, -1.0],
                log_sigma: [-5.0, -5.0],
            },
            eval_eps: draw_eps(&mut Rng::new(Self::EVAL_SEED), Self::EVAL_SAMPLES),
        }
    }

    /// Deterministic ELBO estimate with fixed evaluation noise.
    pub fn elbo(&self, params: &BbviParams) -> f64 {
        bbvi_elbo_grad_frozen(params, &self.eval_eps, self.target).0
    }

    /// One minibatch draw returning both the ELBO estimate and the descent
    /// gradient of `-ELBO`.
    pub fn sample(&self, x: &Vector, rng: &mut Rng) -> (f64, Vector) {
        let (elbo, g) = bbvi_elbo_grad(&BbviParams::from_vector(x), rng, self.samples, self.target);
        (elbo, g.scale(-1.0))
    }
}

impl Problem for BbviProblem {
    fn name(&self) -> &str {
        "bbvi"
    }

    fn dim(&self) -> usize {
        4
    }

    fn objective(&self, x: &Vector) -> f64 {
        -self.elbo(&BbviParams::from_vector(x))
    }

    fn grad_sample(&self, x: &Vector, rng: &mut Rng) -> Vector {
        self.sample(x, rng).1
    }

    fn true_grad(&self, _x: &Vector) -> Option<Vector> {
        None
    }

    fn reference_grad(&self, x: &Vector) -> Option<Vector> {
        Some(
            bbvi_elbo_grad_frozen(&BbviParams::from_vector(x), &self.eval_eps, self.target)
                .1
                .scale(-1.0),
        )
    }

    fn initial_point(&self, _rng: &mut Rng) -> Vector {
        self.start.to_vector()
    }
}
