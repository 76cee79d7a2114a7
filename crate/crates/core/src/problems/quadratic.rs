use super::Problem;
use crate::dense::Vector;
use crate::rng::Rng;

/// `f(x) = ½ xᵀ H x` with diagonal `H`, entries log-spaced in `[1, cond]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    pub h: Vec<f64>,
    pub noise_std: f64,
    /// Every coordinate of the starting point.
    pub start: f64,
}

pub fn quadratic_problem(n: usize, cond: f64) -> QuadraticProblem {
    assert!(
        n >= 1 && cond >= 1.0,
        "quadratic_problem needs n >= 1 and cond >= 1"
    );
    let h = (0..n)
        .map(|i| {
            if n == 1 {
                1.0
            } else {
                cond.powf(i as f64 / (n - 1) as f64)
            }
        })
        .collect();
    QuadraticProblem {
        h,
        noise_std: 0.0,
        start: 1.0,
    }
}

impl QuadraticProblem {
    pub fn with_noise(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }

    pub fn with_start(mut self, start: f64) -> Self {
        self.start = start;
        self
    }
}

impl Problem for QuadraticProblem {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.h.len()
    }

    fn objective(&self, x: &Vector) -> f64 {
        0.5 * self
            .h
            .iter()
            .zip(x.iter())
            .map(|(h, v)| h * v * v)
            .sum::<f64>()
    }

    fn grad_sample(&self, x: &Vector, rng: &mut Rng) -> Vector {
        let mut g = self.true_grad(x).expect("analytic gradient");
        if self.noise_std > 0.0 {
            g.axpy(1.0, &rng.normal_vec(self.dim(), self.noise_std));
        }
        g
    }

    fn true_grad(&self, x: &Vector) -> Option<Vector> {
        Some(Vector::from(
            self.h
                .iter()
                .zip(x.iter())
                .map(|(h, v)| h * v)
                .collect::<Vec<f64>>(),
        ))
    }

    fn initial_point(&self, _rng: &mut Rng) -> Vector {
        Vector::filled(self.dim(), self.start)
    }
}
