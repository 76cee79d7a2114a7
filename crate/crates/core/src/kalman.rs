//! Linear time-varying Kalman filter and the reduced gradient recursion.
//!
//! [`predict`] and [`update`] are the textbook recursions over an arbitrary
//! [`StateSpaceModel`]. Because every model's gradient row is `[0 … 0 I]`
//! and only the gradient block is observed, the gradient marginal of the
//! filter is closed on its own; [`reduced_gradient_step`] runs exactly that
//! marginal at `n` instead of `2n`/`3n` dimensions.

use crate::dense::{chol_solve, congruence, mat_mul, sym_eig_bounds, Mat, Vector, EIG_MAX_DIM};
use crate::error::{KgdError, Result};
use crate::models::{build_transition, observation, StateSpaceModel, TransitionAux};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub z_hat: Vector,
    pub p: Mat,
    /// Number of measurement updates applied so far.
    pub t: usize,
}

impl FilterState {
    pub fn new(z_hat: Vector, p: Mat) -> Result<Self> {
        if p.shape() != (z_hat.dim(), z_hat.dim()) {
            return Err(KgdError::Shape {
                op: "FilterState::new",
                lhs: p.shape(),
                rhs: (z_hat.dim(), 1),
            });
        }
        Ok(FilterState { z_hat, p, t: 0 })
    }

    pub fn dim(&self) -> usize {
        self.z_hat.dim()
    }

    /// Extreme eigenvalues of `P`, if the dimension allows the diagnostic.
    pub fn covariance_bounds(&self) -> Option<(f64, f64)> {
        (self.dim() <= EIG_MAX_DIM)
            .then(|| sym_eig_bounds(&self.p).ok())
            .flatten()
    }
}

/// The smoothing gain `K̃ = C K` of one update with its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub gain: Mat,
    /// `None` when the gain is too large for the eigen diagnostic.
    pub min_eig: Option<f64>,
    pub max_eig: Option<f64>,
}

impl GainReport {
    fn from_gain(gain: Mat) -> Self {
        let bounds = if gain.rows() <= EIG_MAX_DIM {
            let mut sym = gain.clone();
            sym.symmetrize();
            sym_eig_bounds(&sym).ok()
        } else {
            None
        };
        GainReport {
            gain,
            min_eig: bounds.map(|b| b.0),
            max_eig: bounds.map(|b| b.1),
        }
    }
}

/// Test hook replacing the computed gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainOverride {
    /// `K̃ = I`: the filtered gradient equals the measurement.
    Identity,
}

/// Posterior covariance form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceForm {
    /// `(I-KC) P (I-KC)ᵀ + K R Kᵀ`, PSD-preserving.
    #[default]
    Joseph,
    /// `(I-KC) P`.
    Simple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UpdateOptions {
    pub gain_override: Option<GainOverride>,
    pub covariance: CovarianceForm,
}

/// Time update: `ẑ⁻ = A ẑ`, `P⁻ = A P Aᵀ + Q`.
pub fn predict(state: &FilterState, a_t: &Mat, q: &Mat) -> Result<(Vector, Mat)> {
    let d = state.dim();
    if a_t.shape() != (d, d) {
        return Err(KgdError::Shape {
            op: "predict (transition)",
            lhs: a_t.shape(),
            rhs: (d, d),
        });
    }
    if q.shape() != (d, d) {
        return Err(KgdError::Shape {
            op: "predict (process noise)",
            lhs: q.shape(),
            rhs: (d, d),
        });
    }
    let z_prior = a_t.mul_vec(&state.z_hat)?;
    let mut p_prior = congruence(a_t, &state.p)?.add(q)?;
    p_prior.symmetrize();
    Ok((z_prior, p_prior))
}

/// Kalman gain `K = P⁻Cᵀ (R + C P⁻ Cᵀ)⁻¹`, via an SPD solve on the
/// innovation covariance.
fn kalman_gain(p_prior: &Mat, c: &Mat, r: &Mat, step: usize) -> Result<Mat> {
    let cp = mat_mul(c, p_prior)?;
    let mut s = mat_mul(c, &cp.transpose())?.add(r)?;
    s.symmetrize();
    match chol_solve(&s, &cp) {
        Ok(kt) => Ok(kt.transpose()),
        Err(KgdError::NotPositiveDefinite { pivot, value }) => {
            Err(KgdError::FilterDivergence { step, pivot, value })
        }
        Err(e) => Err(e),
    }
}

fn posterior_covariance(
    p_prior: &Mat,
    k: &Mat,
    c: &Mat,
    r: &Mat,
    form: CovarianceForm,
) -> Result<Mat> {
    let mut i_kc = mat_mul(k, c)?.scale(-1.0);
    i_kc.add_diagonal(1.0);
    let mut p = match form {
        CovarianceForm::Joseph => congruence(&i_kc, p_prior)?.add(&congruence(k, r)?)?,
        CovarianceForm::Simple => mat_mul(&i_kc, p_prior)?,
    };
    p.symmetrize();
    Ok(p)
}

/// Measurement update with default options (computed gain, Joseph form).
pub fn update(
    z_prior: &Vector,
    p_prior: &Mat,
    c: &Mat,
    r: &Mat,
    y: &Vector,
    step: usize,
) -> Result<(FilterState, GainReport)> {
    update_with(z_prior, p_prior, c, r, y, step, UpdateOptions::default())
}

/// Measurement update. `step` is the index assigned to the posterior and
/// reported on divergence.
pub fn update_with(
    z_prior: &Vector,
    p_prior: &Mat,
    c: &Mat,
    r: &Mat,
    y: &Vector,
    step: usize,
    opts: UpdateOptions,
) -> Result<(FilterState, GainReport)> {
    let m = z_prior.dim();
    let p = y.dim();
    if c.shape() != (p, m) {
        return Err(KgdError::Shape {
            op: "update (observation)",
            lhs: c.shape(),
            rhs: (p, m),
        });
    }
    if r.shape() != (p, p) {
        return Err(KgdError::Shape {
            op: "update (measurement noise)",
            lhs: r.shape(),
            rhs: (p, p),
        });
    }
    if p_prior.shape() != (m, m) {
        return Err(KgdError::Shape {
            op: "update (covariance)",
            lhs: p_prior.shape(),
            rhs: (m, m),
        });
    }
    let k = match opts.gain_override {
        None => kalman_gain(p_prior, c, r, step)?,
        // K = Cᵀ gives C K = I for a selector C
        Some(GainOverride::Identity) => c.transpose(),
    };
    let innovation = y.sub(&c.mul_vec(z_prior)?);
    let mut z_post = z_prior.add(&k.mul_vec(&innovation)?);
    if opts.gain_override == Some(GainOverride::Identity) {
        // write the measurement through exactly instead of ẑ⁻ + (y - ẑ⁻)
        for i in 0..p {
            if let Some(j) = (0..m).find(|&j| c[(i, j)] == 1.0) {
                z_post[j] = y[i];
            }
        }
    }
    let p_post = posterior_covariance(p_prior, &k, c, r, opts.covariance)?;
    let gain = mat_mul(c, &k)?;
    Ok((
        FilterState {
            z_hat: z_post,
            p: p_post,
            t: step,
        },
        GainReport::from_gain(gain),
    ))
}

/// One step of the gradient-marginal recursion:
/// `P⁻ = P + σ_Q I`, `K̃ = P⁻ (P⁻ + σ_R I)⁻¹`, `ĝ' = ĝ + K̃ (y - ĝ)`,
/// `P' = (I - K̃) P⁻`.
pub fn reduced_gradient_step(
    g_hat: &Vector,
    p_gg: &Mat,
    y: &Vector,
    sigma_q: f64,
    sigma_r: f64,
) -> Result<(Vector, Mat, Mat)> {
    if !(sigma_q > 0.0) || !(sigma_r > 0.0) {
        return Err(KgdError::Parameter(format!(
            "sigma_q and sigma_r must be positive (got {sigma_q}, {sigma_r})"
        )));
    }
    let n = g_hat.dim();
    if p_gg.shape() != (n, n) || y.dim() != n {
        return Err(KgdError::Shape {
            op: "reduced_gradient_step",
            lhs: p_gg.shape(),
            rhs: (y.dim(), n),
        });
    }
    let mut p_prior = p_gg.clone();
    p_prior.add_diagonal(sigma_q);
    let mut s = p_prior.clone();
    s.add_diagonal(sigma_r);
    // K̃ᵀ = S⁻¹ P⁻ since both factors are symmetric
    let gain = chol_solve(&s, &p_prior)?.transpose();
    let g_next = g_hat.add(&gain.mul_vec(&y.sub(g_hat))?);
    let mut i_k = gain.scale(-1.0);
    i_k.add_diagonal(1.0);
    let mut p_next = mat_mul(&i_k, &p_prior)?;
    p_next.symmetrize();
    Ok((g_next, p_next, gain))
}

/// A full-state filter bound to its model.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    pub model: StateSpaceModel,
    pub state: FilterState,
    observation: Mat,
    process_noise: Mat,
    measurement_noise: Mat,
}

impl KalmanFilter {
    pub fn new(model: StateSpaceModel, state: FilterState) -> Result<Self> {
        if state.dim() != model.state_dim() {
            return Err(KgdError::Config(format!(
                "filter state has dimension {}, model expects {}",
                state.dim(),
                model.state_dim()
            )));
        }
        Ok(KalmanFilter {
            observation: observation(&model),
            process_noise: model.process_noise(),
            measurement_noise: model.measurement_noise(),
            model,
            state,
        })
    }

    /// Predict with `A_t` built from `aux`, then update on `y`.
    pub fn step(
        &mut self,
        aux: &TransitionAux,
        y: &Vector,
        opts: UpdateOptions,
    ) -> Result<GainReport> {
        let a_t = build_transition(&self.model, aux)?;
        let (z_prior, p_prior) = predict(&self.state, &a_t, &self.process_noise)?;
        let (state, report) = update_with(
            &z_prior,
            &p_prior,
            &self.observation,
            &self.measurement_noise,
            y,
            self.state.t + 1,
            opts,
        )?;
        self.state = state;
        Ok(report)
    }

    /// Current gradient estimate `ĝ_{t|t}`.
    pub fn gradient_estimate(&self) -> Vector {
        let off = self.model.g_offset();
        self.state.z_hat.slice(off..off + self.model.n)
    }

    /// `P^{gg}_{t|t}`.
    pub fn gradient_covariance(&self) -> Mat {
        let off = self.model.g_offset();
        self.state.p.block(off, off, self.model.n, self.model.n)
    }
}

/// The `n`-dimensional gradient-marginal filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedFilter {
    pub g_hat: Vector,
    pub p_gg: Mat,
    pub sigma_q: f64,
    pub sigma_r: f64,
    pub t: usize,
}

impl ReducedFilter {
    pub fn new(g0: Vector, p0_scale: f64, sigma_q: f64, sigma_r: f64) -> Self {
        let n = g0.dim();
        ReducedFilter {
            g_hat: g0,
            p_gg: Mat::scaled_identity(n, p0_scale),
            sigma_q,
            sigma_r,
            t: 0,
        }
    }

    pub fn step(&mut self, y: &Vector, gain_override: Option<GainOverride>) -> Result<GainReport> {
        let (g, p, gain) =
            reduced_gradient_step(&self.g_hat, &self.p_gg, y, self.sigma_q, self.sigma_r)?;
        self.t += 1;
        match gain_override {
            None => {
                self.g_hat = g;
                self.p_gg = p;
                Ok(GainReport::from_gain(gain))
            }
            Some(GainOverride::Identity) => {
                // K̃ = I: posterior collapses onto the measurement with covariance σ_R I
                let n = y.dim();
                self.g_hat = y.clone();
                self.p_gg = Mat::scaled_identity(n, self.sigma_r);
                Ok(GainReport::from_gain(Mat::identity(n)))
            }
        }
    }
}

/// Runs two covariance recursions from different initial covariances and
/// returns `‖P¹_{t|t} - P²_{t|t}‖_F` for `t = 0..=steps`.
///
/// The covariance recursion does not depend on measurements, so none are
/// needed; `aux_at(t)` supplies the transition data of step `t`.
pub fn robustness_probe(
    model: &StateSpaceModel,
    p0_a: &Mat,
    p0_b: &Mat,
    steps: usize,
    aux_at: impl Fn(usize) -> TransitionAux,
) -> Result<Vec<f64>> {
    robustness_probe_on(model, p0_a, p0_b, steps, aux_at, |p| p.clone())
}

/// As [`robustness_probe`], measuring only the gradient block `P^{gg}`.
pub fn robustness_probe_gradient_block(
    model: &StateSpaceModel,
    p0_a: &Mat,
    p0_b: &Mat,
    steps: usize,
    aux_at: impl Fn(usize) -> TransitionAux,
) -> Result<Vec<f64>> {
    let off = model.g_offset();
    let n = model.n;
    robustness_probe_on(model, p0_a, p0_b, steps, aux_at, |p| {
        p.block(off, off, n, n)
    })
}

fn robustness_probe_on(
    model: &StateSpaceModel,
    p0_a: &Mat,
    p0_b: &Mat,
    steps: usize,
    aux_at: impl Fn(usize) -> TransitionAux,
    view: impl Fn(&Mat) -> Mat,
) -> Result<Vec<f64>> {
    if steps < 10 {
        return Err(KgdError::Parameter(format!(
            "robustness probe needs at least 10 steps, got {steps}"
        )));
    }
    let d = model.state_dim();
    for p0 in [p0_a, p0_b] {
        if p0.shape() != (d, d) {
            return Err(KgdError::Shape {
                op: "robustness_probe",
                lhs: p0.shape(),
                rhs: (d, d),
            });
        }
    }
    let c = observation(model);
    let q = model.process_noise();
    let r = model.measurement_noise();
    let mut pa = p0_a.clone();
    let mut pb = p0_b.clone();
    let distance = |a: &Mat, b: &Mat| -> Result<f64> { Ok(view(a).sub(&view(b))?.frobenius()) };
    let mut series = Vec::with_capacity(steps + 1);
    series.push(distance(&pa, &pb)?);
    for t in 0..steps {
        let a_t = build_transition(model, &aux_at(t))?;
        for p in [&mut pa, &mut pb] {
            let mut prior = congruence(&a_t, p)?.add(&q)?;
            prior.symmetrize();
            let k = kalman_gain(&prior, &c, &r, t + 1)?;
            *p = posterior_covariance(&prior, &k, &c, &r, CovarianceForm::Joseph)?;
        }
        series.push(distance(&pa, &pb)?);
    }
    Ok(series)
}

/// Steady-state scalar gain of the plain model for one coordinate, found by
/// iterating the covariance recursion until it stops moving.
pub fn steady_state_gain(sigma_q: f64, sigma_r: f64, p0: f64) -> f64 {
    let mut p = p0;
    let mut gain = 0.0;
    for _ in 0..100_000 {
        let prior = p + sigma_q;
        let next_gain = prior / (prior + sigma_r);
        let next = (1.0 - next_gain) * prior;
        let done = (next - p).abs() <= 1e-16 * next.max(1e-300);
        p = next;
        gain = next_gain;
        if done {
            break;
        }
    }
    gain
}
