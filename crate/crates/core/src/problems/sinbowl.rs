//! `f(x) = 0.1‖x‖² + sin(x¹ + 2x²)`: a bowl with many shallow local minima.

use super::Problem;
use crate::dense::Vector;
use crate::rng::Rng;

/// Minimum of `f` over the 2001×2001 grid on `[-6, 6]²`, at `(-0.3, -0.606)`.
pub const SINBOWL_GRID_MIN: f64 = -0.952_548_393_874_695_5;

pub fn sinbowl_f(x: &Vector) -> f64 {
    0.1 * (x[0] * x[0] + x[1] * x[1]) + (x[0] + 2.0 * x[1]).sin()
}

pub fn sinbowl_true_grad(x: &Vector) -> Vector {
    let c = (x[0] + 2.0 * x[1]).cos();
    Vector::from(vec![0.2 * x[0] + c, 0.2 * x[1] + 2.0 * c])
}

/// `∇f(x) + noise_std·ξ`, `ξ ~ N(0, I₂)`.
pub fn sinbowl_grad(x: &Vector, rng: &mut Rng, noise_std: f64) -> Vector {
    let mut g = sinbowl_true_grad(x);
    if noise_std > 0.0 {
        g.axpy(1.0, &rng.normal_vec(2, noise_std));
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinBowl {
    pub noise_std: f64,
    pub start: [f64; 2],
}

impl SinBowl {
    pub const DEFAULT_START: [f64; 2] = [4.0, 4.0];

    pub fn new(noise_std: f64) -> Self {
        SinBowl {
            noise_std,
            start: Self::DEFAULT_START,
        }
    }
}

impl Problem for SinBowl {
    fn name(&self) -> &str {
        "sinbowl"
    }

    fn dim(&self) -> usize {
        2
    }

    fn objective(&self, x: &Vector) -> f64 {
        sinbowl_f(x)
    }

    fn grad_sample(&self, x: &Vector, rng: &mut Rng) -> Vector {
        sinbowl_grad(x, rng, self.noise_std)
    }

    fn true_grad(&self, x: &Vector) -> Option<Vector> {
        Some(sinbowl_true_grad(x))
    }

    fn initial_point(&self, _rng: &mut Rng) -> Vector {
        Vector::from(self.start.to_vec())
    }
}
