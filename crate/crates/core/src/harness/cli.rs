//! Command-line flags and the `key = value` config format that mirrors them.

use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, ValueEnum};

use super::{ExperimentConfig, ProblemSpec};
use crate::error::{KgdError, Result};
use crate::kalman::GainOverride;
use crate::optimizers::{FilterMode, Method, OptimizerConfig, ScheduleKind, ScheduleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliProblem {
    Sinbowl,
    Quadratic,
    Bbvi,
    Mlpreg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliFilterMode {
    Full,
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliGainOverride {
    None,
    Identity,
}

fn parse_layers(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect()
}

fn parse_seeds(s: &str) -> std::result::Result<Vec<u64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|e| format!("{p:?}: {e}")))
        .collect()
}

/// Flags of `kgd run`; config files use the same names without the dashes.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub problem: CliProblem,
    #[arg(long, value_parser = |s: &str| s.parse::<Method>())]
    pub method: Method,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: ::std::vec::Vec<u64>,
    #[arg(long, default_value = "constant", value_parser = |s: &str| s.parse::<ScheduleKind>())]
    pub alpha_kind: ScheduleKind,
    #[arg(long)]
    pub alpha: f64,
    /// Geometric decay base.
    #[arg(long, default_value_t = 1.0)]
    pub alpha_rate: f64,
    #[arg(long, default_value_t = 0.01)]
    pub sigma_q: f64,
    #[arg(long, default_value_t = 2.0)]
    pub sigma_r: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p0: f64,
    #[arg(long, default_value_t = 0.9)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    #[arg(long, default_value_t = crate::models::DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long)]
    pub block_size: Option<usize>,
    /// MLP minibatch size.
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    /// Gradient noise for sinbowl and quadratic.
    #[arg(long, default_value_t = 1.0)]
    pub noise_std: f64,
    /// Quadratic dimension.
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    /// Quadratic condition number.
    #[arg(long, default_value_t = 10.0)]
    pub cond: f64,
    /// MLP layer sizes, e.g. `1,4,4,1`.
    #[arg(long, default_value = "1,4,4,1", value_parser = parse_layers)]
    pub layers: ::std::vec::Vec<usize>,
    /// Monte Carlo samples per BBVI gradient.
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[arg(long, value_enum, default_value = "full")]
    pub filter: CliFilterMode,
    #[arg(long, value_enum, default_value = "none")]
    pub gain_override: CliGainOverride,
    /// Record per-step wall time in `step_micros`.
    #[arg(long)]
    pub timing: bool,
    /// Trace CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config_a: PathBuf,
    #[arg(long)]
    pub config_b: PathBuf,
    #[arg(long)]
    pub threshold: f64,
    /// Paired-rows CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    pub fn to_config(&self) -> Result<ExperimentConfig> {
        let problem = match self.problem {
            CliProblem::Sinbowl => ProblemSpec::SinBowl {
                noise_std: self.noise_std,
            },
            CliProblem::Quadratic => ProblemSpec::Quadratic {
                dim: self.dim,
                cond: self.cond,
                noise_std: self.noise_std,
            },
            CliProblem::Bbvi => ProblemSpec::Bbvi {
                samples: self.samples,
            },
            CliProblem::Mlpreg => ProblemSpec::MlpReg {
                layers: self.layers.clone(),
                batch_size: self.batch_size,
                data_seed: self.data_seed,
            },
        };
        let schedule = ScheduleSpec {
            kind: self.alpha_kind,
            a: self.alpha,
            rate: self.alpha_rate,
        };
        let mut opt = OptimizerConfig::new(self.method, schedule);
        opt.sigma_q = self.sigma_q;
        opt.sigma_r = self.sigma_r;
        opt.p0_scale = self.p0;
        opt.mu = self.mu;
        opt.gamma = self.gamma;
        opt.eps = self.eps;
        opt.filter_mode = match self.filter {
            CliFilterMode::Full => FilterMode::Full,
            CliFilterMode::Reduced => FilterMode::Reduced,
        };
        opt.gain_override = match self.gain_override {
            CliGainOverride::None => None,
            CliGainOverride::Identity => Some(GainOverride::Identity),
        };
        let config = ExperimentConfig {
            problem,
            optimizer: opt,
            steps: self.steps,
            seeds: self.seeds.clone(),
            block_size: self.block_size,
            out_path: self.out.clone(),
            record_every: self.record_every,
            timing: self.timing,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Parser)]
#[command(name = "config")]
struct ConfigFile {
    #[command(flatten)]
    run: RunArgs,
}

/// Parses `key = value` lines (blank lines and `#` comments allowed) through
/// the same flag definitions as `kgd run`, so unknown keys are rejected.
pub fn parse_config_str(text: &str) -> Result<RunArgs> {
    let cmd = ConfigFile::command();
    let mut argv = vec!["config".to_string()];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| {
                KgdError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
        let arg = cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key))
            .ok_or_else(|| KgdError::Config(format!("line {}: unknown key `{key}`", lineno + 1)))?;
        if arg.get_action().takes_values() {
            argv.push(format!("--{key}"));
            argv.push(value.to_string());
        } else {
            match value {
                "true" => argv.push(format!("--{key}")),
                "false" => {}
                _ => {
                    return Err(KgdError::Config(format!(
                        "line {}: `{key}` expects true or false",
                        lineno + 1
                    )))
                }
            }
        }
    }
    ConfigFile::try_parse_from(argv)
        .map(|c| c.run)
        .map_err(|e| KgdError::Config(e.to_string()))
}

pub fn parse_config_file(path: &Path) -> Result<RunArgs> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| KgdError::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}
