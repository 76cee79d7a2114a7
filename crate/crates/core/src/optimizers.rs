//! SGD, momentum and RMSProp, each with a Kalman-filtered counterpart.
//!
//! Filtered methods keep the authoritative iterate (and `u`/`r`) outside the
//! filter: every step feeds the raw gradient sample to the filter, extracts
//! the gradient estimate `ĝ_{t|t}` and runs the plain update rule on it.

use std::fmt;
use std::str::FromStr;

use crate::dense::{sym_eig_bounds, Vector, EIG_MAX_DIM};
use crate::error::{KgdError, Result};
use crate::kalman::{
    CovarianceForm, FilterState, GainOverride, GainReport, KalmanFilter, ReducedFilter,
    UpdateOptions,
};
use crate::models::{ModelKind, StateSpaceModel, TransitionAux};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Sgd,
    Momentum,
    RmsProp,
    Kgd,
    KgdMomentum,
    KgdRmsProp,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Sgd,
        Method::Momentum,
        Method::RmsProp,
        Method::Kgd,
        Method::KgdMomentum,
        Method::KgdRmsProp,
    ];

    pub fn is_filtered(self) -> bool {
        self.model_kind().is_some()
    }

    pub fn model_kind(self) -> Option<ModelKind> {
        match self {
            Method::Kgd => Some(ModelKind::Plain),
            Method::KgdMomentum => Some(ModelKind::Momentum),
            Method::KgdRmsProp => Some(ModelKind::RmsProp),
            _ => None,
        }
    }

    fn uses_momentum(self) -> bool {
        matches!(self, Method::Momentum | Method::KgdMomentum)
    }

    fn uses_rmsprop(self) -> bool {
        matches!(self, Method::RmsProp | Method::KgdRmsProp)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::Momentum => "momentum",
            Method::RmsProp => "rmsprop",
            Method::Kgd => "kgd",
            Method::KgdMomentum => "kgd-momentum",
            Method::KgdRmsProp => "kgd-rmsprop",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = KgdError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| KgdError::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    /// `a / (1 + t)`
    Harmonic,
    /// `a · rate^{-t}`
    Geometric,
}

impl FromStr for ScheduleKind {
    type Err = KgdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ScheduleKind::Constant),
            "harmonic" => Ok(ScheduleKind::Harmonic),
            "geometric" => Ok(ScheduleKind::Geometric),
            other => Err(KgdError::Config(format!("unknown alpha kind '{other}'"))),
        }
    }
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::Harmonic => "harmonic",
            ScheduleKind::Geometric => "geometric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub a: f64,
    pub rate: f64,
}

impl ScheduleSpec {
    pub fn constant(a: f64) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::Constant,
            a,
            rate: 1.0,
        }
    }

    pub fn harmonic(a: f64) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::Harmonic,
            a,
            rate: 1.0,
        }
    }

    pub fn geometric(a: f64, rate: f64) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::Geometric,
            a,
            rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(KgdError::Config(format!(
                "stepsize base must be positive, got {}",
                self.a
            )));
        }
        if self.kind == ScheduleKind::Geometric && !(self.rate >= 1.0) {
            return Err(KgdError::Config(format!(
                "geometric rate must be >= 1 for a non-increasing schedule, got {}",
                self.rate
            )));
        }
        Ok(())
    }
}

pub fn alpha_at(schedule: &ScheduleSpec, t: usize) -> f64 {
    match schedule.kind {
        ScheduleKind::Constant => schedule.a,
        ScheduleKind::Harmonic => schedule.a / (1.0 + t as f64),
        ScheduleKind::Geometric => schedule.a * schedule.rate.powf(-(t as f64)),
    }
}

/// Which recursion backs a filtered method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterMode {
    /// Full `2n`/`3n`-dimensional filter.
    #[default]
    Full,
    /// The `n`-dimensional gradient marginal only.
    Reduced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub alpha_schedule: ScheduleSpec,
    pub sigma_q: f64,
    pub sigma_r: f64,
    pub p0_scale: f64,
    pub mu: f64,
    pub gamma: f64,
    pub eps: f64,
    pub gain_override: Option<GainOverride>,
    pub filter_mode: FilterMode,
    pub covariance_form: CovarianceForm,
}

impl OptimizerConfig {
    pub const DEFAULT_SIGMA_Q: f64 = 0.01;
    pub const DEFAULT_SIGMA_R: f64 = 2.0;
    pub const DEFAULT_P0: f64 = 0.01;
    pub const DEFAULT_MU: f64 = 0.9;
    pub const DEFAULT_GAMMA: f64 = 0.9;

    pub fn new(method: Method, alpha_schedule: ScheduleSpec) -> Self {
        OptimizerConfig {
            method,
            alpha_schedule,
            sigma_q: Self::DEFAULT_SIGMA_Q,
            sigma_r: Self::DEFAULT_SIGMA_R,
            p0_scale: Self::DEFAULT_P0,
            mu: Self::DEFAULT_MU,
            gamma: Self::DEFAULT_GAMMA,
            eps: crate::models::DEFAULT_EPS,
            gain_override: None,
            filter_mode: FilterMode::Full,
            covariance_form: CovarianceForm::Joseph,
        }
    }

    pub fn with_method(&self, method: Method) -> Self {
        OptimizerConfig {
            method,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha_schedule.validate()?;
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(KgdError::Config(format!(
                "mu must lie in (0,1), got {}",
                self.mu
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(KgdError::Config(format!(
                "gamma must lie in (0,1), got {}",
                self.gamma
            )));
        }
        if !(self.eps > 0.0) {
            return Err(KgdError::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if self.method.is_filtered() {
            if !(self.sigma_q > 0.0) || !(self.sigma_r > 0.0) {
                return Err(KgdError::Config(
                    "sigma_q and sigma_r must be positive".into(),
                ));
            }
            if !(self.p0_scale >= 0.0) {
                return Err(KgdError::Config(format!(
                    "p0 must be nonnegative, got {}",
                    self.p0_scale
                )));
            }
        }
        Ok(())
    }

    /// State-space model of a filtered method for dimension `n`.
    pub fn model(&self, n: usize) -> Result<Option<StateSpaceModel>> {
        Ok(match self.method.model_kind() {
            None => None,
            Some(ModelKind::Plain) => Some(StateSpaceModel::plain(n, self.sigma_q, self.sigma_r)?),
            Some(ModelKind::Momentum) => Some(StateSpaceModel::momentum(
                n,
                self.sigma_q,
                self.sigma_r,
                self.mu,
            )?),
            Some(ModelKind::RmsProp) => Some(StateSpaceModel::rms_prop(
                n,
                self.sigma_q,
                self.sigma_r,
                self.gamma,
                self.eps,
            )?),
        })
    }
}

#[derive(Debug, Clone)]
pub enum GradientFilter {
    Full(KalmanFilter),
    Reduced(ReducedFilter),
}

impl GradientFilter {
    pub fn gradient_estimate(&self) -> Vector {
        match self {
            GradientFilter::Full(f) => f.gradient_estimate(),
            GradientFilter::Reduced(f) => f.g_hat.clone(),
        }
    }

    /// Extreme eigenvalues of the filter covariance (the full `P` or `P^{gg}`).
    pub fn covariance_bounds(&self) -> Option<(f64, f64)> {
        match self {
            GradientFilter::Full(f) => f.state.covariance_bounds(),
            GradientFilter::Reduced(f) => (f.p_gg.rows() <= EIG_MAX_DIM)
                .then(|| sym_eig_bounds(&f.p_gg).ok())
                .flatten(),
        }
    }

    pub fn full_state(&self) -> Option<&FilterState> {
        match self {
            GradientFilter::Full(f) => Some(&f.state),
            GradientFilter::Reduced(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptState {
    pub x: Vector,
    pub aux_u: Option<Vector>,
    pub aux_r: Option<Vector>,
    pub filter: Option<GradientFilter>,
    pub t: usize,
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub alpha: f64,
    pub gain: Option<GainReport>,
    /// Gradient (raw or filtered) that drove this step's update rule.
    pub direction: Vector,
}

fn check_gradient(grad: &Vector, n: usize) -> Result<()> {
    if grad.dim() != n {
        return Err(KgdError::Input(format!(
            "gradient has dimension {}, expected {n}",
            grad.dim()
        )));
    }
    if let Some(i) = grad.iter().position(|v| !v.is_finite()) {
        return Err(KgdError::Input(format!(
            "non-finite gradient component {i}"
        )));
    }
    Ok(())
}

impl OptState {
    pub fn init(config: &OptimizerConfig, x0: Vector, first_grad: &Vector) -> Result<Self> {
        config.validate()?;
        let n = x0.dim();
        if first_grad.dim() != n {
            return Err(KgdError::Config(format!(
                "first gradient has dimension {}, iterate has {n}",
                first_grad.dim()
            )));
        }
        let filter = match config.model(n)? {
            None => None,
            Some(model) => {
                check_gradient(first_grad, n)?;
                Some(match config.filter_mode {
                    FilterMode::Full => {
                        let mut parts = vec![&x0];
                        let zeros = Vector::zeros(n);
                        if model.blocks() == 3 {
                            parts.push(&zeros);
                        }
                        parts.push(first_grad);
                        let z0 = Vector::concat(&parts);
                        let p0 =
                            crate::dense::Mat::scaled_identity(model.state_dim(), config.p0_scale);
                        GradientFilter::Full(KalmanFilter::new(model, FilterState::new(z0, p0)?)?)
                    }
                    FilterMode::Reduced => GradientFilter::Reduced(ReducedFilter::new(
                        first_grad.clone(),
                        config.p0_scale,
                        config.sigma_q,
                        config.sigma_r,
                    )),
                })
            }
        };
        Ok(OptState {
            aux_u: config.method.uses_momentum().then(|| Vector::zeros(n)),
            aux_r: config.method.uses_rmsprop().then(|| Vector::zeros(n)),
            x: x0,
            filter,
            t: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    /// Advances one iteration on the gradient sample `g(x_t; ξ_t)`.
    pub fn step(&mut self, config: &OptimizerConfig, grad_sample: &Vector) -> Result<StepReport> {
        let n = self.dim();
        check_gradient(grad_sample, n)?;
        let alpha = alpha_at(&config.alpha_schedule, self.t);

        let (direction, gain) = match self.filter.as_mut() {
            None => (grad_sample.clone(), None),
            Some(filter) => {
                let report = match filter {
                    GradientFilter::Full(kf) => {
                        let aux = TransitionAux {
                            alpha_t: alpha,
                            grad_sample: config.method.uses_rmsprop().then(|| grad_sample.clone()),
                            r_t: self.aux_r.clone(),
                        };
                        let opts = UpdateOptions {
                            gain_override: config.gain_override,
                            covariance: config.covariance_form,
                        };
                        kf.step(&aux, grad_sample, opts)?
                    }
                    GradientFilter::Reduced(rf) => rf.step(grad_sample, config.gain_override)?,
                };
                (filter.gradient_estimate(), Some(report))
            }
        };

        let x = self.x.as_mut_slice();
        let v = direction.as_slice();
        if config.method.uses_momentum() {
            let u = self.aux_u.as_mut().expect("momentum state").as_mut_slice();
            let mu = config.mu;
            for i in 0..n {
                u[i] = mu * u[i] - (1.0 - mu) * v[i];
                x[i] += alpha * u[i];
            }
        } else if config.method.uses_rmsprop() {
            let r = self.aux_r.as_mut().expect("rmsprop state").as_mut_slice();
            let gamma = config.gamma;
            for i in 0..n {
                r[i] = gamma * r[i] + (1.0 - gamma) * v[i] * v[i];
                x[i] -= alpha * v[i] / (r[i].sqrt() + config.eps);
            }
        } else {
            for i in 0..n {
                x[i] -= alpha * v[i];
            }
        }
        self.t += 1;
        Ok(StepReport {
            alpha,
            gain,
            direction,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from(xs.to_vec())
    }

    #[test]
    fn schedules() {
        assert_eq!(alpha_at(&ScheduleSpec::constant(0.1), 12345), 0.1);
        assert_eq!(alpha_at(&ScheduleSpec::geometric(0.01, 1.001), 0), 0.01);
        assert!(
            (alpha_at(&ScheduleSpec::geometric(0.01, 1.001), 1000) - 0.01 / 1.001f64.powi(1000))
                .abs()
                < 1e-15
        );
        assert!((alpha_at(&ScheduleSpec::harmonic(0.1), 9) - 0.01).abs() < 1e-17);
        for spec in [
            ScheduleSpec::harmonic(0.5),
            ScheduleSpec::geometric(1.0, 1.01),
            ScheduleSpec::constant(2.0),
        ] {
            let seq: Vec<f64> = (0..200).map(|t| alpha_at(&spec, t)).collect();
            assert!(seq.iter().all(|a| *a > 0.0));
            assert!(seq.windows(2).all(|w| w[1] <= w[0]));
        }
        assert!(ScheduleSpec::geometric(0.1, 0.9).validate().is_err());
        assert!(ScheduleSpec::constant(0.0).validate().is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("adam".parse::<Method>().is_err());
    }

    #[test]
    fn kgd_init_stacks_first_gradient() {
        let cfg = OptimizerConfig::new(Method::Kgd, ScheduleSpec::constant(0.1));
        let st = OptState::init(&cfg, v(&[0.0, 0.0]), &v(&[1.0, 2.0])).unwrap();
        let fs = st.filter.as_ref().unwrap().full_state().unwrap();
        assert_eq!(fs.z_hat.as_slice(), &[0.0, 0.0, 1.0, 2.0]);
        assert_eq!(fs.p, crate::dense::Mat::scaled_identity(4, 0.01));
        assert_eq!(st.t, 0);
    }

    #[test]
    fn baseline_init() {
        let sgd = OptState::init(
            &OptimizerConfig::new(Method::Sgd, ScheduleSpec::constant(0.1)),
            v(&[1.0]),
            &v(&[0.0]),
        )
        .unwrap();
        assert!(sgd.filter.is_none() && sgd.aux_u.is_none() && sgd.aux_r.is_none());
        let mom = OptState::init(
            &OptimizerConfig::new(Method::Momentum, ScheduleSpec::constant(0.1)),
            v(&[1.0, 1.0]),
            &v(&[0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(mom.aux_u, Some(Vector::zeros(2)));
        let km = OptState::init(
            &OptimizerConfig::new(Method::KgdMomentum, ScheduleSpec::constant(0.1)),
            v(&[1.0, 1.0]),
            &v(&[3.0, 4.0]),
        )
        .unwrap();
        assert_eq!(
            km.filter.unwrap().full_state().unwrap().z_hat.as_slice(),
            &[1.0, 1.0, 0.0, 0.0, 3.0, 4.0]
        );
    }

    #[test]
    fn init_dimension_mismatch() {
        let cfg = OptimizerConfig::new(Method::Kgd, ScheduleSpec::constant(0.1));
        assert!(matches!(
            OptState::init(&cfg, v(&[0.0, 0.0]), &v(&[1.0])),
            Err(KgdError::Config(_))
        ));
    }

    #[test]
    fn sgd_step() {
        let cfg = OptimizerConfig::new(Method::Sgd, ScheduleSpec::constant(0.1));
        let mut st = OptState::init(&cfg, v(&[0.0, 0.0]), &v(&[1.0, 2.0])).unwrap();
        st.step(&cfg, &v(&[1.0, 2.0])).unwrap();
        assert_eq!(st.x.as_slice(), &[-0.1, -0.2]);
    }

    #[test]
    fn momentum_step() {
        let cfg = OptimizerConfig::new(Method::Momentum, ScheduleSpec::constant(0.1));
        let mut st = OptState::init(&cfg, v(&[0.0, 0.0]), &v(&[1.0, 2.0])).unwrap();
        st.step(&cfg, &v(&[1.0, 2.0])).unwrap();
        let u = st.aux_u.as_ref().unwrap();
        assert!((u[0] + 0.1).abs() < 1e-15 && (u[1] + 0.2).abs() < 1e-15);
        assert!((st.x[0] + 0.01).abs() < 1e-15 && (st.x[1] + 0.02).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_step() {
        let cfg = OptimizerConfig::new(Method::RmsProp, ScheduleSpec::constant(0.1));
        let mut st = OptState::init(&cfg, v(&[0.0]), &v(&[2.0])).unwrap();
        st.step(&cfg, &v(&[2.0])).unwrap();
        let expected = -0.1 * 2.0 / (0.4f64.sqrt() + 1e-8);
        assert!((st.x[0] - expected).abs() < 1e-15);
        assert!((st.aux_r.as_ref().unwrap()[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn kgd_scalar_step_chains_filter_example() {
        let cfg = OptimizerConfig::new(Method::Kgd, ScheduleSpec::constant(0.1));
        let mut st = OptState::init(&cfg, v(&[1.0]), &v(&[2.0])).unwrap();
        let report = st.step(&cfg, &v(&[3.0])).unwrap();
        let k = 0.02 / 2.02;
        assert!((report.gain.unwrap().gain[(0, 0)] - k).abs() < 1e-15);
        let dec = 0.1 * (2.0 + k);
        assert!((dec - 0.20099010).abs() < 1e-8);
        assert!((st.x[0] - (1.0 - dec)).abs() < 1e-15);
    }

    #[test]
    fn nan_gradient_rejected() {
        let cfg = OptimizerConfig::new(Method::Kgd, ScheduleSpec::constant(0.1));
        let mut st = OptState::init(&cfg, v(&[0.0]), &v(&[1.0])).unwrap();
        assert!(matches!(
            st.step(&cfg, &Vector::from(vec![f64::NAN])),
            Err(KgdError::Input(_))
        ));
        assert_eq!(st.t, 0);
    }

    #[test]
    fn identity_override_collapses_to_sgd() {
        let sched = ScheduleSpec::harmonic(0.3);
        let sgd_cfg = OptimizerConfig::new(Method::Sgd, sched);
        let mut rng = crate::rng::Rng::new(9);
        let grads: Vec<Vector> = (0..200).map(|_| rng.normal_vec(3, 1.0)).collect();
        for mode in [FilterMode::Full, FilterMode::Reduced] {
            let mut kgd_cfg = OptimizerConfig::new(Method::Kgd, sched);
            kgd_cfg.gain_override = Some(GainOverride::Identity);
            kgd_cfg.filter_mode = mode;
            let x0 = v(&[1.0, -2.0, 0.5]);
            let mut a = OptState::init(&sgd_cfg, x0.clone(), &grads[0]).unwrap();
            let mut b = OptState::init(&kgd_cfg, x0, &grads[0]).unwrap();
            for g in &grads[1..] {
                a.step(&sgd_cfg, g).unwrap();
                b.step(&kgd_cfg, g).unwrap();
                assert_eq!(a.x, b.x);
            }
        }
    }

    #[test]
    fn zero_gradient_stream_is_fixed_point() {
        for m in Method::ALL {
            let cfg = OptimizerConfig::new(m, ScheduleSpec::constant(0.1));
            let x0 = v(&[0.7, -0.3]);
            let mut st = OptState::init(&cfg, x0.clone(), &Vector::zeros(2)).unwrap();
            for _ in 0..50 {
                st.step(&cfg, &Vector::zeros(2)).unwrap();
            }
            assert_eq!(st.x, x0, "{m}");
        }
    }
}
