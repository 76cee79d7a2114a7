use super::{run_experiment, ExperimentConfig, TraceRecord};
use crate::error::{KgdError, Result};

/// Final state of one seed's trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub final_f: f64,
    pub final_grad_norm: f64,
    /// First recorded `t` with `f ≤ threshold`.
    pub iters_to_threshold: Option<usize>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub seeds: Vec<SeedOutcome>,
    pub median_final_f: f64,
    /// Interquartile range of the final objective.
    pub iqr_final_f: f64,
    /// `None` when at least half of the seeds never reach the threshold.
    pub median_iters_to_threshold: Option<f64>,
    pub median_final_grad_norm: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    if lo == hi {
        return sorted[lo];
    }
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Groups records by seed (in order of first appearance) and condenses them.
pub fn seed_outcomes(traces: &[TraceRecord], threshold: f64) -> Vec<SeedOutcome> {
    let mut out: Vec<SeedOutcome> = Vec::new();
    for r in traces {
        let idx = match out.iter().position(|o| o.seed == r.seed) {
            Some(i) => i,
            None => {
                out.push(SeedOutcome {
                    seed: r.seed,
                    final_f: r.f,
                    final_grad_norm: r.grad_norm,
                    iters_to_threshold: None,
                    failed: false,
                });
                out.len() - 1
            }
        };
        let o = &mut out[idx];
        o.final_f = r.f;
        o.final_grad_norm = r.grad_norm;
        o.failed |= !r.status.is_ok();
        if o.iters_to_threshold.is_none() && r.status.is_ok() && r.f <= threshold {
            o.iters_to_threshold = Some(r.t);
        }
    }
    out
}

pub fn summarize(traces: &[TraceRecord], threshold: f64) -> Result<Summary> {
    if traces.is_empty() {
        return Err(KgdError::Input("cannot summarize an empty trace".into()));
    }
    let seeds = seed_outcomes(traces, threshold);
    let mut finals: Vec<f64> = seeds.iter().map(|s| s.final_f).collect();
    finals.sort_by(f64::total_cmp);
    let iters: Vec<f64> = seeds
        .iter()
        .map(|s| s.iters_to_threshold.map_or(f64::INFINITY, |t| t as f64))
        .collect();
    let med_iters = median(&iters);
    let norms: Vec<f64> = seeds.iter().map(|s| s.final_grad_norm).collect();
    Ok(Summary {
        median_final_f: quantile(&finals, 0.5),
        iqr_final_f: quantile(&finals, 0.75) - quantile(&finals, 0.25),
        median_iters_to_threshold: med_iters.is_finite().then_some(med_iters),
        median_final_grad_norm: median(&norms),
        seeds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedRow {
    pub seed: u64,
    pub final_f_a: f64,
    pub final_f_b: f64,
    /// `final_f_a - final_f_b`.
    pub delta_f: f64,
    pub iters_a: Option<usize>,
    pub iters_b: Option<usize>,
    /// `iters_a - iters_b` when both reach the threshold.
    pub delta_iters: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<PairedRow>,
    /// Seeds where A ends strictly lower.
    pub a_better: usize,
    pub b_better: usize,
    pub ties: usize,
    /// Two-sided exact sign-test p-value on the final objective, ties dropped.
    pub sign_test_p: f64,
}

/// Two-sided binomial tail `P(|K - m/2| ≥ |k - m/2|)` for `K ~ Bin(m, ½)`.
pub fn sign_test_p(k: usize, m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let tail = k.min(m - k);
    // log-space binomial coefficients keep large m finite
    let ln_choose = |i: usize| -> f64 {
        (1..=i)
            .map(|j| ((m - i + j) as f64 / j as f64).ln())
            .sum::<f64>()
    };
    let one_side: f64 = (0..=tail)
        .map(|i| (ln_choose(i) - m as f64 * std::f64::consts::LN_2).exp())
        .sum();
    (2.0 * one_side).min(1.0)
}

/// Pairs two trace sets seed by seed.
pub fn compare_traces(
    a: &[TraceRecord],
    b: &[TraceRecord],
    threshold: f64,
) -> Result<ComparisonReport> {
    let sa = seed_outcomes(a, threshold);
    let sb = seed_outcomes(b, threshold);
    if sa.iter().map(|s| s.seed).ne(sb.iter().map(|s| s.seed)) {
        return Err(KgdError::Config(
            "compared runs must use the same seed list".into(),
        ));
    }
    let rows: Vec<PairedRow> = sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| PairedRow {
            seed: x.seed,
            final_f_a: x.final_f,
            final_f_b: y.final_f,
            delta_f: x.final_f - y.final_f,
            iters_a: x.iters_to_threshold,
            iters_b: y.iters_to_threshold,
            delta_iters: match (x.iters_to_threshold, y.iters_to_threshold) {
                (Some(i), Some(j)) => Some(i as i64 - j as i64),
                _ => None,
            },
        })
        .collect();
    let a_better = rows.iter().filter(|r| r.delta_f < 0.0).count();
    let b_better = rows.iter().filter(|r| r.delta_f > 0.0).count();
    Ok(ComparisonReport {
        ties: rows.len() - a_better - b_better,
        sign_test_p: sign_test_p(a_better, a_better + b_better),
        rows,
        a_better,
        b_better,
    })
}

/// Runs both configurations and pairs them seed by seed.
pub fn compare(
    a: &ExperimentConfig,
    b: &ExperimentConfig,
    threshold: f64,
) -> Result<ComparisonReport> {
    if a.problem != b.problem {
        return Err(KgdError::Config(format!(
            "compared runs must use the same problem ({:?} vs {:?})",
            a.problem, b.problem
        )));
    }
    if a.seeds != b.seeds {
        return Err(KgdError::Config(
            "compared runs must use the same seed list".into(),
        ));
    }
    compare_traces(&run_experiment(a)?, &run_experiment(b)?, threshold)
}

impl ComparisonReport {
    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "seed",
            "final_f_a",
            "final_f_b",
            "delta_f",
            "iters_a",
            "iters_b",
            "delta_iters",
        ])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.seed.to_string(),
                format!("{:e}", r.final_f_a),
                format!("{:e}", r.final_f_b),
                format!("{:e}", r.delta_f),
                opt(r.iters_a.map(|v| v.to_string())),
                opt(r.iters_b.map(|v| v.to_string())),
                opt(r.delta_iters.map(|v| v.to_string())),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
