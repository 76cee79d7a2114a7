//! Seeded experiment runs: problem × optimizer × seeds → CSV traces.
//!
//! A run is a pure function of its [`ExperimentConfig`] and seed. Every seed
//! gets a fresh [`Rng`] that draws the starting point, then the initial
//! gradient, then one gradient sample per iteration, so all methods see
//! aligned random streams.

mod cli;
mod summary;

pub use cli::{
    parse_config_file, parse_config_str, CliFilterMode, CliGainOverride, CliProblem, CompareArgs,
    RunArgs,
};
pub use summary::{
    compare, compare_traces, median, seed_outcomes, sign_test_p, summarize, ComparisonReport,
    PairedRow, SeedOutcome, Summary,
};

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::dense::Vector;
use crate::distributed::DistState;
use crate::error::{KgdError, Result};
use crate::optimizers::{OptState, OptimizerConfig, StepReport};
use crate::problems::{
    mlp_problem, quadratic_problem, BbviProblem, BbviTarget, MlpSpec, Problem, SinBowl,
};
use crate::rng::Rng;

pub const CSV_HEADER: [&str; 10] = [
    "seed",
    "t",
    "f",
    "grad_norm",
    "gain_min",
    "gain_max",
    "p_min_eig",
    "p_max_eig",
    "step_micros",
    "status",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    SinBowl {
        noise_std: f64,
    },
    Quadratic {
        dim: usize,
        cond: f64,
        noise_std: f64,
    },
    Bbvi {
        samples: usize,
    },
    MlpReg {
        layers: Vec<usize>,
        batch_size: usize,
        data_seed: u64,
    },
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::SinBowl { .. } => "sinbowl",
            ProblemSpec::Quadratic { .. } => "quadratic",
            ProblemSpec::Bbvi { .. } => "bbvi",
            ProblemSpec::MlpReg { .. } => "mlpreg",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(KgdError::Config(m.to_string()));
        match self {
            ProblemSpec::SinBowl { noise_std } | ProblemSpec::Quadratic { noise_std, .. }
                if !(*noise_std >= 0.0) =>
            {
                bad("noise-std must be >= 0")
            }
            ProblemSpec::Quadratic { dim, cond, .. } if *dim == 0 || !(*cond >= 1.0) => {
                bad("quadratic needs dim >= 1 and cond >= 1")
            }
            ProblemSpec::Bbvi { samples: 0 } => bad("samples must be >= 1"),
            ProblemSpec::MlpReg {
                layers, batch_size, ..
            } => {
                if layers.len() < 2
                    || layers[0] != 1
                    || layers[layers.len() - 1] != 1
                    || layers.contains(&0)
                {
                    bad("layers must be positive and map 1 -> ... -> 1")
                } else if *batch_size == 0 {
                    bad("batch-size must be >= 1")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Problem>> {
        self.validate()?;
        Ok(match self {
            ProblemSpec::SinBowl { noise_std } => Box::new(SinBowl::new(*noise_std)),
            ProblemSpec::Quadratic {
                dim,
                cond,
                noise_std,
            } => Box::new(quadratic_problem(*dim, *cond).with_noise(*noise_std)),
            ProblemSpec::Bbvi { samples } => {
                Box::new(BbviProblem::new(BbviTarget::Funnel, *samples))
            }
            ProblemSpec::MlpReg {
                layers,
                batch_size,
                data_seed,
            } => {
                let mut spec = MlpSpec::new(layers.clone());
                spec.batch_size = *batch_size;
                Box::new(mlp_problem(spec, *data_seed))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// Carries the method, the step-size schedule and the filter constants.
    pub optimizer: OptimizerConfig,
    pub steps: usize,
    pub seeds: Vec<u64>,
    /// Enables the block-diagonal distributed optimizer.
    pub block_size: Option<usize>,
    pub out_path: Option<PathBuf>,
    pub record_every: usize,
    /// Fill `step_micros`. Off by default so traces stay byte-reproducible.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(
        problem: ProblemSpec,
        optimizer: OptimizerConfig,
        steps: usize,
        seeds: Vec<u64>,
    ) -> Self {
        ExperimentConfig {
            problem,
            optimizer,
            steps,
            seeds,
            block_size: None,
            out_path: None,
            record_every: 1,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(KgdError::Config("steps must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(KgdError::Config("at least one seed is required".into()));
        }
        if self.record_every == 0 {
            return Err(KgdError::Config("record-every must be >= 1".into()));
        }
        if self.block_size == Some(0) {
            return Err(KgdError::Config("block-size must be >= 1".into()));
        }
        self.problem.validate()?;
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    Failed(String),
}

impl Status {
    pub fn is_ok(&self) -> bool {
        matches!(self, Status::Ok)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub seed: u64,
    pub t: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub gain_min: Option<f64>,
    pub gain_max: Option<f64>,
    pub p_min_eig: Option<f64>,
    pub p_max_eig: Option<f64>,
    pub step_micros: Option<u64>,
    pub status: Status,
}

#[allow(clippy::large_enum_variant)]
enum Runner {
    Mono(OptState),
    Dist(DistState),
}

impl Runner {
    fn x(&self) -> &Vector {
        match self {
            Runner::Mono(s) => &s.x,
            Runner::Dist(s) => &s.x,
        }
    }

    fn step(&mut self, cfg: &OptimizerConfig, g: &Vector) -> Result<Vec<StepReport>> {
        match self {
            Runner::Mono(s) => s.step(cfg, g).map(|r| vec![r]),
            Runner::Dist(s) => s.step(cfg, g),
        }
    }

    fn covariance_bounds(&self) -> Option<(f64, f64)> {
        let states: Vec<&OptState> = match self {
            Runner::Mono(s) => vec![s],
            Runner::Dist(s) => s.blocks.iter().collect(),
        };
        fold_bounds(
            states
                .iter()
                .map(|s| s.filter.as_ref().and_then(|f| f.covariance_bounds())),
        )
    }
}

/// Min of the minima and max of the maxima; `None` if any part is missing.
fn fold_bounds(parts: impl Iterator<Item = Option<(f64, f64)>>) -> Option<(f64, f64)> {
    let mut acc: Option<(f64, f64)> = None;
    for p in parts {
        let (lo, hi) = p?;
        acc = Some(match acc {
            None => (lo, hi),
            Some((a, b)) => (a.min(lo), b.max(hi)),
        });
    }
    acc
}

fn gain_bounds(reports: &[StepReport]) -> Option<(f64, f64)> {
    fold_bounds(reports.iter().map(|r| {
        let g = r.gain.as_ref()?;
        Some((g.min_eig?, g.max_eig?))
    }))
}

fn gradient_norm(problem: &dyn Problem, x: &Vector, reports: &[StepReport]) -> f64 {
    match problem.reference_grad(x) {
        Some(g) => g.norm(),
        None => reports
            .iter()
            .map(|r| r.direction.norm_sq())
            .sum::<f64>()
            .sqrt(),
    }
}

/// Runs one seed. A filter or input error ends the trajectory with a failure
/// row at the step where it happened.
pub fn run_seed(config: &ExperimentConfig, problem: &dyn Problem, seed: u64) -> Vec<TraceRecord> {
    let mut rng = Rng::new(seed);
    let x0 = problem.initial_point(&mut rng);
    let g0 = problem.grad_sample(&x0, &mut rng);
    let opt = &config.optimizer;
    let init = match config.block_size {
        Some(d) => DistState::init(opt, d, x0.clone(), &g0).map(Runner::Dist),
        None => OptState::init(opt, x0.clone(), &g0).map(Runner::Mono),
    };
    let mut runner = match init {
        Ok(r) => r,
        Err(e) => return vec![failure_row(problem, seed, 0, &x0, e)],
    };

    let mut records = Vec::with_capacity(config.steps / config.record_every + 1);
    for t in 1..=config.steps {
        let g = problem.grad_sample(runner.x(), &mut rng);
        let started = config.timing.then(Instant::now);
        let reports = match runner.step(opt, &g) {
            Ok(r) => r,
            Err(e) => {
                records.push(failure_row(problem, seed, t, runner.x(), e));
                return records;
            }
        };
        let micros = started.map(|s| s.elapsed().as_micros() as u64);
        if t % config.record_every == 0 || t == config.steps {
            let x = runner.x();
            let gains = gain_bounds(&reports);
            let cov = runner.covariance_bounds();
            records.push(TraceRecord {
                seed,
                t,
                f: problem.objective(x),
                grad_norm: gradient_norm(problem, x, &reports),
                gain_min: gains.map(|g| g.0),
                gain_max: gains.map(|g| g.1),
                p_min_eig: cov.map(|c| c.0),
                p_max_eig: cov.map(|c| c.1),
                step_micros: micros,
                status: Status::Ok,
            });
        }
    }
    records
}

fn failure_row(
    problem: &dyn Problem,
    seed: u64,
    t: usize,
    x: &Vector,
    err: KgdError,
) -> TraceRecord {
    TraceRecord {
        seed,
        t,
        f: problem.objective(x),
        grad_norm: problem.reference_grad(x).map_or(f64::NAN, |g| g.norm()),
        gain_min: None,
        gain_max: None,
        p_min_eig: None,
        p_max_eig: None,
        step_micros: None,
        status: Status::Failed(err.to_string()),
    }
}

/// All seeds, run in parallel and returned in seed-list order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TraceRecord>> {
    config.validate()?;
    let problem = config.problem.build()?;
    let per_seed: Vec<Vec<TraceRecord>> = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, problem.as_ref(), seed))
        .collect();
    let traces = per_seed.concat();
    if let Some(path) = &config.out_path {
        write_csv_path(path, &traces)?;
    }
    Ok(traces)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

pub fn write_csv(out: impl Write, traces: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in traces {
        let status = match &r.status {
            Status::Ok => "ok".to_string(),
            Status::Failed(msg) => format!("failed: {msg}"),
        };
        w.write_record([
            r.seed.to_string(),
            r.t.to_string(),
            format!("{:e}", r.f),
            format!("{:e}", r.grad_norm),
            fmt_opt(r.gain_min),
            fmt_opt(r.gain_max),
            fmt_opt(r.p_min_eig),
            fmt_opt(r.p_max_eig),
            r.step_micros.map_or_else(String::new, |m| m.to_string()),
            status,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_path(path: &Path, traces: &[TraceRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(file), traces)
}

/// Reads a trace file written by [`write_csv`].
pub fn read_csv(input: impl std::io::Read) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(KgdError::Input(format!(
            "unexpected trace header {header:?}"
        )));
    }
    let num = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| KgdError::Input(format!("bad {what} value {s:?}")))
    };
    let opt = |s: &str, what: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s, what).map(Some)
        }
    };
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let int = |i: usize| -> Result<u64> {
            row[i]
                .parse::<u64>()
                .map_err(|_| KgdError::Input(format!("bad {} value {:?}", CSV_HEADER[i], &row[i])))
        };
        let status = match &row[9] {
            "ok" => Status::Ok,
            s => Status::Failed(s.strip_prefix("failed: ").unwrap_or(s).to_string()),
        };
        out.push(TraceRecord {
            seed: int(0)?,
            t: int(1)? as usize,
            f: num(&row[2], "f")?,
            grad_norm: num(&row[3], "grad_norm")?,
            gain_min: opt(&row[4], "gain_min")?,
            gain_max: opt(&row[5], "gain_max")?,
            p_min_eig: opt(&row[6], "p_min_eig")?,
            p_max_eig: opt(&row[7], "p_max_eig")?,
            step_micros: if row[8].is_empty() {
                None
            } else {
                Some(int(8)?)
            },
            status,
        });
    }
    Ok(out)
}
