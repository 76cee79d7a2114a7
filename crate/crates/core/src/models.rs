//! State-space setups for the gradient filter.
//!
//! The state stacks `n`-blocks: `[x; g]` for plain KGD and `[x; u; g]` /
//! `[x; r; g]` for the momentum and RMSProp extensions. The gradient block is
//! always last, follows a random walk, and is the only block observed.

use crate::dense::{Mat, Vector};
use crate::error::{KgdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Plain,
    Momentum,
    RmsProp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub kind: ModelKind,
    pub n: usize,
    pub sigma_q: f64,
    pub sigma_r: f64,
    /// Momentum only.
    pub mu: f64,
    /// RMSProp only.
    pub gamma: f64,
    /// RMSProp only.
    pub eps: f64,
}

/// Default RMSProp denominator guard.
pub const DEFAULT_EPS: f64 = 1e-8;

impl StateSpaceModel {
    pub fn plain(n: usize, sigma_q: f64, sigma_r: f64) -> Result<Self> {
        StateSpaceModel {
            kind: ModelKind::Plain,
            n,
            sigma_q,
            sigma_r,
            mu: 0.0,
            gamma: 0.0,
            eps: DEFAULT_EPS,
        }
        .validated()
    }

    pub fn momentum(n: usize, sigma_q: f64, sigma_r: f64, mu: f64) -> Result<Self> {
        StateSpaceModel {
            kind: ModelKind::Momentum,
            n,
            sigma_q,
            sigma_r,
            mu,
            gamma: 0.0,
            eps: DEFAULT_EPS,
        }
        .validated()
    }

    pub fn rms_prop(n: usize, sigma_q: f64, sigma_r: f64, gamma: f64, eps: f64) -> Result<Self> {
        StateSpaceModel {
            kind: ModelKind::RmsProp,
            n,
            sigma_q,
            sigma_r,
            mu: 0.0,
            gamma,
            eps,
        }
        .validated()
    }

    fn validated(self) -> Result<Self> {
        if self.n == 0 {
            return Err(KgdError::Config("model dimension must be positive".into()));
        }
        if !(self.sigma_q > 0.0) || !(self.sigma_r > 0.0) {
            return Err(KgdError::Parameter(format!(
                "sigma_q and sigma_r must be positive (got {}, {})",
                self.sigma_q, self.sigma_r
            )));
        }
        match self.kind {
            ModelKind::Momentum if !(self.mu > 0.0 && self.mu < 1.0) => Err(KgdError::Parameter(
                format!("mu must lie in (0,1), got {}", self.mu),
            )),
            ModelKind::RmsProp if !(self.gamma > 0.0 && self.gamma < 1.0) => Err(
                KgdError::Parameter(format!("gamma must lie in (0,1), got {}", self.gamma)),
            ),
            ModelKind::RmsProp if !(self.eps > 0.0) => Err(KgdError::Parameter(format!(
                "eps must be positive, got {}",
                self.eps
            ))),
            _ => Ok(self),
        }
    }

    /// Number of `n`-blocks in the state.
    pub fn blocks(&self) -> usize {
        match self.kind {
            ModelKind::Plain => 2,
            ModelKind::Momentum | ModelKind::RmsProp => 3,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.blocks() * self.n
    }

    /// Offset of the gradient block inside the state.
    pub fn g_offset(&self) -> usize {
        (self.blocks() - 1) * self.n
    }

    pub fn process_noise(&self) -> Mat {
        Mat::scaled_identity(self.state_dim(), self.sigma_q)
    }

    pub fn measurement_noise(&self) -> Mat {
        Mat::scaled_identity(self.n, self.sigma_r)
    }
}

/// Per-step data the transition matrix depends on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionAux {
    pub alpha_t: f64,
    /// The gradient sample handed to the optimizer (RMSProp only).
    pub grad_sample: Option<Vector>,
    /// Running second moment `r_t` before this step (RMSProp only).
    pub r_t: Option<Vector>,
}

impl TransitionAux {
    pub fn with_alpha(alpha_t: f64) -> Self {
        TransitionAux {
            alpha_t,
            ..Default::default()
        }
    }
}

/// `β_t = 1 / (sqrt(γ r_t + (1-γ) g⊙g) + ε)` elementwise.
pub fn rmsprop_beta(r_t: &Vector, grad: &Vector, gamma: f64, eps: f64) -> Vector {
    Vector::from(
        r_t.iter()
            .zip(grad.iter())
            .map(|(r, g)| 1.0 / ((gamma * r + (1.0 - gamma) * g * g).sqrt() + eps))
            .collect::<Vec<f64>>(),
    )
}

/// Assembles `A_t` for `model`.
pub fn build_transition(model: &StateSpaceModel, aux: &TransitionAux) -> Result<Mat> {
    let n = model.n;
    let a = aux.alpha_t;
    if !(a > 0.0) || !a.is_finite() {
        return Err(KgdError::Config(format!(
            "stepsize must be positive, got {a}"
        )));
    }
    let dim = model.state_dim();
    let mut m = Mat::identity(dim);
    match model.kind {
        ModelKind::Plain => {
            for i in 0..n {
                m[(i, n + i)] = -a;
            }
        }
        ModelKind::Momentum => {
            let mu = model.mu;
            for i in 0..n {
                m[(i, n + i)] = a * mu;
                m[(i, 2 * n + i)] = -a * (1.0 - mu);
                m[(n + i, n + i)] = mu;
                m[(n + i, 2 * n + i)] = -(1.0 - mu);
            }
        }
        ModelKind::RmsProp => {
            let grad = aux
                .grad_sample
                .as_ref()
                .ok_or_else(|| KgdError::Config("RMSProp transition needs grad_sample".into()))?;
            let r_t = aux
                .r_t
                .as_ref()
                .ok_or_else(|| KgdError::Config("RMSProp transition needs r_t".into()))?;
            if grad.dim() != n || r_t.dim() != n {
                return Err(KgdError::Config(format!(
                    "RMSProp aux dimensions ({}, {}) do not match n = {n}",
                    grad.dim(),
                    r_t.dim()
                )));
            }
            if r_t.iter().any(|v| *v < 0.0) {
                return Err(KgdError::Config("r_t must be nonnegative".into()));
            }
            let beta = rmsprop_beta(r_t, grad, model.gamma, model.eps);
            for i in 0..n {
                m[(i, 2 * n + i)] = -a * beta[i];
                m[(n + i, n + i)] = model.gamma;
                m[(n + i, 2 * n + i)] = (1.0 - model.gamma) * grad[i];
            }
        }
    }
    Ok(m)
}

/// `C = [0 … 0 I]`, selecting the gradient block.
pub fn observation(model: &StateSpaceModel) -> Mat {
    let n = model.n;
    let mut c = Mat::zeros(n, model.state_dim());
    let off = model.g_offset();
    for i in 0..n {
        c[(i, off + i)] = 1.0;
    }
    c
}

/// `det(A_t)` from the upper-triangular structure: the product of its
/// diagonal. Plain transitions always give 1.
pub fn transition_determinant_check(model: &StateSpaceModel, aux: &TransitionAux) -> Result<f64> {
    let a = build_transition(model, aux)?;
    let n = a.rows();
    for i in 0..n {
        for j in 0..i {
            debug_assert_eq!(a[(i, j)], 0.0, "transition must be upper triangular");
        }
    }
    Ok(a.diagonal().iter().product())
}
