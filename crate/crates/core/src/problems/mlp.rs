//! 1-D MLP regression with minibatch gradients from hand-written backprop.
//!
//! Parameters are packed layer by layer: the `out × in` weight matrix in
//! row-major order followed by the `out` biases. Hidden layers use `tanh`,
//! the output layer is linear.

use std::io::Write;
use std::path::Path;

use super::Problem;
use crate::dense::Vector;
use crate::error::Result;
use crate::rng::Rng;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    /// Likelihood variance.
    pub noise_var: f64,
    /// Isotropic Gaussian prior variance on every weight and bias.
    pub prior_var: f64,
    pub batch_size: usize,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Self {
        MlpSpec {
            layer_sizes,
            noise_var: 0.01,
            prior_var: 10.0,
            batch_size: 8,
        }
    }
}

pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

/// The regression data set: `(x, y)` pairs with standardized inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub const POINTS_PER_CLUSTER: usize = 40;
    pub const TARGET_NOISE_STD: f64 = 0.1;

    /// Two clusters of inputs, uniform on `[0, 2]` and `[6, 8]`, with targets
    /// `0.5·cos(x) + N(0, 0.1²)`; inputs are then shifted and scaled to zero
    /// mean and unit variance.
    pub fn generate(data_seed: u64) -> Self {
        let mut rng = Rng::new(data_seed);
        let mut raw_x = Vec::with_capacity(2 * Self::POINTS_PER_CLUSTER);
        for (lo, hi) in [(0.0, 2.0), (6.0, 8.0)] {
            for _ in 0..Self::POINTS_PER_CLUSTER {
                raw_x.push(rng.uniform_in(lo, hi));
            }
        }
        let y: Vec<f64> = raw_x
            .iter()
            .map(|x| 0.5 * x.cos() + Self::TARGET_NOISE_STD * rng.standard_normal())
            .collect();
        let n = raw_x.len() as f64;
        let mean = raw_x.iter().sum::<f64>() / n;
        let std = (raw_x.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        let x = raw_x.iter().map(|x| (x - mean) / std).collect();
        Dataset { x, y }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn write_csv_to(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y"])?;
        for (x, y) in self.x.iter().zip(&self.y) {
            w.write_record([format!("{x}"), format!("{y}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MlpProblem {
    pub spec: MlpSpec,
    pub data: Dataset,
    /// Initial weights are `N(0, (init_gain)² / fan_in)`; biases start at 0.
    pub init_gain: f64,
}

pub fn mlp_problem(spec: MlpSpec, data_seed: u64) -> MlpProblem {
    assert!(
        spec.layer_sizes.len() >= 2
            && spec.layer_sizes[0] == 1
            && *spec.layer_sizes.last().unwrap() == 1,
        "regression MLP must map 1 -> ... -> 1"
    );
    MlpProblem {
        spec,
        data: Dataset::generate(data_seed),
        init_gain: 1.0,
    }
}

impl MlpProblem {
    pub fn predict(&self, w: &Vector, x: f64) -> f64 {
        let mut act = vec![x];
        let mut off = 0;
        let sizes = &self.spec.layer_sizes;
        for (l, pair) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let last = l + 2 == sizes.len();
            act = (0..fan_out)
                .map(|o| {
                    let row = &w.as_slice()[off + o * fan_in..off + (o + 1) * fan_in];
                    let pre = row.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>()
                        + w[off + fan_in * fan_out + o];
                    if last {
                        pre
                    } else {
                        pre.tanh()
                    }
                })
                .collect();
            off += (fan_in + 1) * fan_out;
        }
        act[0]
    }

    /// Adds `scale · ∇_w [(y - ŷ)² / (2σ²)]` for one data point into `grad`.
    fn accumulate_point_grad(&self, w: &Vector, x: f64, y: f64, scale: f64, grad: &mut [f64]) {
        let sizes = &self.spec.layer_sizes;
        let layers = sizes.len() - 1;
        // forward, keeping every layer's activations
        let mut acts: Vec<Vec<f64>> = vec![vec![x]];
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for (l, pair) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            offsets.push(off);
            let input = &acts[l];
            let out: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &w.as_slice()[off + o * fan_in..off + (o + 1) * fan_in];
                    let pre = row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>()
                        + w[off + fan_in * fan_out + o];
                    if l + 1 == layers {
                        pre
                    } else {
                        pre.tanh()
                    }
                })
                .collect();
            acts.push(out);
            off += (fan_in + 1) * fan_out;
        }
        // backward
        let mut delta = vec![(acts[layers][0] - y) / self.spec.noise_var * scale];
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let off = offsets[l];
            let input = &acts[l];
            for o in 0..fan_out {
                for i in 0..fan_in {
                    grad[off + o * fan_in + i] += delta[o] * input[i];
                }
                grad[off + fan_in * fan_out + o] += delta[o];
            }
            if l > 0 {
                delta = (0..fan_in)
                    .map(|i| {
                        let back: f64 = (0..fan_out)
                            .map(|o| w[off + o * fan_in + i] * delta[o])
                            .sum();
                        back * (1.0 - input[i] * input[i])
                    })
                    .collect();
            }
        }
    }

    fn prior_grad(&self, w: &Vector, grad: &mut [f64]) {
        let n = self.data.len() as f64;
        for (g, wi) in grad.iter_mut().zip(w.iter()) {
            *g += wi / (self.spec.prior_var * n);
        }
    }

    /// Gradient over an explicit list of data indices.
    pub fn batch_grad(&self, w: &Vector, indices: &[usize]) -> Vector {
        let mut grad = vec![0.0; w.dim()];
        let scale = 1.0 / indices.len() as f64;
        for &i in indices {
            self.accumulate_point_grad(w, self.data.x[i], self.data.y[i], scale, &mut grad);
        }
        self.prior_grad(w, &mut grad);
        Vector::from(grad)
    }

    pub fn full_grad(&self, w: &Vector) -> Vector {
        let all: Vec<usize> = (0..self.data.len()).collect();
        self.batch_grad(w, &all)
    }
}

impl Problem for MlpProblem {
    fn name(&self) -> &str {
        "mlpreg"
    }

    fn dim(&self) -> usize {
        param_count(&self.spec.layer_sizes)
    }

    /// Negative log-posterior per data point.
    fn objective(&self, w: &Vector) -> f64 {
        let s2 = self.spec.noise_var;
        let nll: f64 = self
            .data
            .x
            .iter()
            .zip(&self.data.y)
            .map(|(x, y)| {
                let r = y - self.predict(w, *x);
                r * r / (2.0 * s2) + 0.5 * s2.ln() + HALF_LN_2PI
            })
            .sum();
        let p2 = self.spec.prior_var;
        let prior = w.norm_sq() / (2.0 * p2) + w.dim() as f64 * (0.5 * p2.ln() + HALF_LN_2PI);
        (nll + prior) / self.data.len() as f64
    }

    fn grad_sample(&self, w: &Vector, rng: &mut Rng) -> Vector {
        let idx: Vec<usize> = (0..self.spec.batch_size)
            .map(|_| rng.below(self.data.len()))
            .collect();
        self.batch_grad(w, &idx)
    }

    fn true_grad(&self, w: &Vector) -> Option<Vector> {
        Some(self.full_grad(w))
    }

    fn initial_point(&self, rng: &mut Rng) -> Vector {
        let mut w = Vec::with_capacity(self.dim());
        for pair in self.spec.layer_sizes.windows(2) {
            let std = self.init_gain / (pair[0] as f64).sqrt();
            w.extend(rng.normal_vec(pair[0] * pair[1], std).iter());
            w.extend(std::iter::repeat_n(0.0, pair[1]));
        }
        Vector::from(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::fd_gradient;

    #[test]
    fn parameter_counts() {
        assert_eq!(param_count(&[1, 4, 4, 1]), 33);
        assert_eq!(param_count(&[1, 20, 20, 1]), 481);
    }

    #[test]
    fn dataset_is_pure_function_of_seed() {
        let a = Dataset::generate(3);
        assert_eq!(a, Dataset::generate(3));
        assert_ne!(a, Dataset::generate(4));
        assert_eq!(a.len(), 80);
        let mean = a.x.iter().sum::<f64>() / 80.0;
        let var = a.x.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 80.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_batch_backprop_matches_finite_differences() {
        let p = mlp_problem(MlpSpec::new(vec![1, 4, 4, 1]), 0);
        let w = Rng::new(5).normal_vec(33, 0.5);
        let an = p.full_grad(&w);
        let fd = fd_gradient(|v| p.objective(v), &w, 1e-6).unwrap();
        for i in 0..33 {
            let rel = (an[i] - fd[i]).abs() / an[i].abs().max(1.0);
            assert!(rel < 1e-5, "coord {i}: {} vs {}", an[i], fd[i]);
        }
    }

    #[test]
    fn csv_export_has_header() {
        let mut buf = Vec::new();
        Dataset::generate(0).write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y\n"));
        assert_eq!(text.lines().count(), 81);
    }
}
