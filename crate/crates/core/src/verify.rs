//! Numerical diagnostics behind `kgd verify`.
//!
//! Each check runs a small deterministic experiment and compares it with a
//! property the filter or the gradient oracles must satisfy.

use crate::dense::{Mat, Vector};
use crate::error::Result;
use crate::kalman::{robustness_probe, robustness_probe_gradient_block, GainOverride};
use crate::models::{StateSpaceModel, TransitionAux};
use crate::optimizers::{FilterMode, Method, OptState, OptimizerConfig, ScheduleSpec};
use crate::problems::{
    bbvi_elbo_grad_frozen, fd_gradient, mlp_problem, quadratic_problem, sinbowl_f,
    sinbowl_true_grad, BbviParams, BbviTarget, MlpSpec, Problem,
};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check {
            name,
            passed,
            detail,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// KGD with the common constants and constant step 0.1.
pub fn reference_config(method: Method) -> OptimizerConfig {
    OptimizerConfig::new(method, ScheduleSpec::constant(0.1))
}

/// Per-step filter diagnostics of a KGD run on the noisy 2-D bowl.
#[derive(Debug, Clone, PartialEq)]
pub struct SinbowlDiagnostics {
    /// `(min, max)` eigenvalue of `K̃_t` for `t = 1..=steps`.
    pub gain: Vec<(f64, f64)>,
    /// `(min, max)` eigenvalue of `P_{t|t}` for `t = 1..=steps`.
    pub covariance: Vec<(f64, f64)>,
}

pub fn sinbowl_diagnostics(
    config: &OptimizerConfig,
    steps: usize,
    seed: u64,
) -> Result<SinbowlDiagnostics> {
    let mut rng = Rng::new(seed);
    let x0 = Vector::from(crate::problems::SinBowl::DEFAULT_START.to_vec());
    let g0 = crate::problems::sinbowl_grad(&x0, &mut rng, 1.0);
    let mut st = OptState::init(config, x0, &g0)?;
    let mut out = SinbowlDiagnostics {
        gain: Vec::with_capacity(steps),
        covariance: Vec::with_capacity(steps),
    };
    for _ in 0..steps {
        let g = crate::problems::sinbowl_grad(&st.x, &mut rng, 1.0);
        let report = st.step(config, &g)?;
        let gain = report.gain.expect("filtered method");
        out.gain.push((
            gain.min_eig.unwrap_or(f64::NAN),
            gain.max_eig.unwrap_or(f64::NAN),
        ));
        let cov = st
            .filter
            .as_ref()
            .and_then(|f| f.covariance_bounds())
            .unwrap_or((f64::NAN, f64::NAN));
        out.covariance.push(cov);
    }
    Ok(out)
}

/// Largest `‖x_full - x_b‖_∞` over a trajectory where both optimizers see
/// the same noise draws at their own iterates.
pub fn trajectory_deviation(
    a: &OptimizerConfig,
    b: &OptimizerConfig,
    steps: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let x0 = Vector::from(crate::problems::SinBowl::DEFAULT_START.to_vec());
    let noise0 = rng.normal_vec(2, 1.0);
    let g0 = sinbowl_true_grad(&x0).add(&noise0);
    let mut sa = OptState::init(a, x0.clone(), &g0)?;
    let mut sb = OptState::init(b, x0, &g0)?;
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let noise = rng.normal_vec(2, 1.0);
        sa.step(a, &sinbowl_true_grad(&sa.x).add(&noise))?;
        sb.step(b, &sinbowl_true_grad(&sb.x).add(&noise))?;
        worst = worst.max(sa.x.sub(&sb.x).max_abs());
    }
    Ok(worst)
}

fn gain_bounds_check() -> Result<(bool, String)> {
    let d = sinbowl_diagnostics(&reference_config(Method::Kgd), 500, 0)?;
    let tail = &d.gain[4..];
    let lo = tail.iter().map(|g| g.0).fold(f64::INFINITY, f64::min);
    let hi = tail.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max);
    Ok((
        lo > 0.0 && hi < 1.0,
        format!("eig(K̃) in [{lo:.4e}, {hi:.4e}] for t in 5..=500"),
    ))
}

fn covariance_bounds_check() -> Result<(bool, String)> {
    let d = sinbowl_diagnostics(&reference_config(Method::Kgd), 500, 0)?;
    let tail = &d.covariance[99..];
    let lo = tail.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let hi = tail.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    Ok((
        lo >= 1e-6 && hi <= 1e3,
        format!("eig(P) in [{lo:.4e}, {hi:.4e}] for t in 100..=500"),
    ))
}

/// The observed gradient block forgets its initial covariance; the `x` block
/// is never measured and keeps the offset, so the full-`P` ratio is reported
/// for information only.
fn robustness_check() -> Result<(bool, String)> {
    let model = StateSpaceModel::plain(2, 0.01, 2.0)?;
    let (pa, pb) = (Mat::zeros(4, 4), Mat::scaled_identity(4, 0.01));
    let aux = |_| TransitionAux::with_alpha(0.1);
    let g = robustness_probe_gradient_block(&model, &pa, &pb, 100, aux)?;
    let full = robustness_probe(&model, &pa, &pb, 50, aux)?;
    let monotone = g[5..].windows(2).all(|w| w[1] <= w[0] + 1e-15);
    let ratio = g[100] / g[0];
    Ok((
        monotone && ratio < 1e-3,
        format!(
            "P^gg ratio at t=100 {ratio:.3e}, non-increasing after t=5: {monotone}; full-P ratio at t=50 {:.4}",
            full[50] / full[0]
        ),
    ))
}

fn reduction_check() -> Result<(bool, String)> {
    let full = reference_config(Method::Kgd);
    let mut reduced = full.clone();
    reduced.filter_mode = FilterMode::Reduced;
    let dev = trajectory_deviation(&full, &reduced, 500, 0)?;
    Ok((
        dev <= 1e-10,
        format!("max |x_full - x_reduced| = {dev:.3e} over 500 steps"),
    ))
}

fn identity_check() -> Result<(bool, String)> {
    let mut kgd = reference_config(Method::Kgd);
    kgd.gain_override = Some(GainOverride::Identity);
    let dev = trajectory_deviation(&kgd, &reference_config(Method::Sgd), 500, 0)?;
    Ok((
        dev <= 1e-14,
        format!("max |x_kgd(K̃=I) - x_sgd| = {dev:.3e} over 500 steps"),
    ))
}

/// Worst relative error between `analytic` and central differences of `f`
/// over `points`.
pub fn worst_fd_error(
    f: impl Fn(&Vector) -> f64,
    analytic: impl Fn(&Vector) -> Vector,
    points: &[Vector],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in points {
        let fd = fd_gradient(&f, x, 1e-6)?;
        let an = analytic(x);
        for i in 0..x.dim() {
            worst = worst.max((fd[i] - an[i]).abs() / an[i].abs().max(1.0));
        }
    }
    Ok(worst)
}

fn gradient_check() -> Result<(bool, String)> {
    let mut rng = Rng::new(0x9ad);
    let pts = |rng: &mut Rng, dim: usize, std: f64| -> Vec<Vector> {
        (0..20).map(|_| rng.normal_vec(dim, std)).collect()
    };

    let sinbowl = worst_fd_error(sinbowl_f, sinbowl_true_grad, &pts(&mut rng, 2, 2.0))?;

    let quad = quadratic_problem(10, 10.0);
    let quadratic = worst_fd_error(
        |x| quad.objective(x),
        |x| quad.true_grad(x).unwrap(),
        &pts(&mut rng, 10, 1.0),
    )?;

    let mlp = mlp_problem(MlpSpec::new(vec![1, 4, 4, 1]), 0);
    let mlp_err = worst_fd_error(
        |w| mlp.objective(w),
        |w| mlp.full_grad(w),
        &pts(&mut rng, 33, 0.5),
    )?;

    let eps: Vec<[f64; 2]> = (0..4)
        .map(|_| [rng.standard_normal(), rng.standard_normal()])
        .collect();
    let elbo =
        |v: &Vector| bbvi_elbo_grad_frozen(&BbviParams::from_vector(v), &eps, BbviTarget::Funnel);
    let bbvi = worst_fd_error(|v| elbo(v).0, |v| elbo(v).1, &pts(&mut rng, 4, 0.5))?;

    let worst = sinbowl.max(quadratic).max(mlp_err).max(bbvi);
    Ok((
        worst <= 1e-5,
        format!("worst rel. error: sinbowl {sinbowl:.1e}, quadratic {quadratic:.1e}, mlp {mlp_err:.1e}, bbvi {bbvi:.1e}"),
    ))
}

/// Runs every diagnostic.
pub fn run_all() -> Vec<Check> {
    vec![
        check("gain bounds", gain_bounds_check()),
        check("covariance bounds", covariance_bounds_check()),
        check("robustness decay", robustness_check()),
        check("reduction equivalence", reduction_check()),
        check("identity gain equals sgd", identity_check()),
        check("gradient checks", gradient_check()),
    ]
}
