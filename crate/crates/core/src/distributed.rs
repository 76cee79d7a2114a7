//! Block-diagonal ("distributed") filtered optimization.
//!
//! The parameter vector is cut into contiguous blocks of at most `D`
//! coordinates and each block gets its own optimizer and filter. Blocks never
//! read each other's state, so one iteration can advance them in any order or
//! in parallel and merge the slices afterwards.

use std::ops::Range;

use rayon::prelude::*;

use crate::dense::Vector;
use crate::error::{KgdError, Result};
use crate::optimizers::{OptState, OptimizerConfig, StepReport};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    pub n: usize,
    pub block_size: usize,
    pub ranges: Vec<Range<usize>>,
}

impl BlockPartition {
    pub fn count(&self) -> usize {
        self.ranges.len()
    }
}

/// Splits `0..n` into `⌈n/d⌉` contiguous ranges of length `d` (the last may
/// be shorter).
pub fn partition(n: usize, d: usize) -> Result<BlockPartition> {
    if n == 0 || d == 0 {
        return Err(KgdError::Config(format!(
            "partition needs n >= 1 and d >= 1, got ({n}, {d})"
        )));
    }
    let ranges = (0..n.div_ceil(d))
        .map(|i| i * d..((i + 1) * d).min(n))
        .collect();
    Ok(BlockPartition {
        n,
        block_size: d,
        ranges,
    })
}

/// How blocks are scheduled within one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockOrder {
    Forward,
    Reverse,
    #[default]
    Parallel,
}

#[derive(Debug, Clone)]
pub struct DistState {
    pub partition: BlockPartition,
    pub blocks: Vec<OptState>,
    pub x: Vector,
}

impl DistState {
    pub fn init(
        config: &OptimizerConfig,
        block_size: usize,
        x0: Vector,
        first_grad: &Vector,
    ) -> Result<Self> {
        let n = x0.dim();
        if first_grad.dim() != n {
            return Err(KgdError::Config(format!(
                "first gradient has dimension {}, iterate has {n}",
                first_grad.dim()
            )));
        }
        let partition = partition(n, block_size)?;
        let blocks = partition
            .ranges
            .iter()
            .enumerate()
            .map(|(i, r)| {
                OptState::init(config, x0.slice(r.clone()), &first_grad.slice(r.clone())).map_err(
                    |e| KgdError::Block {
                        block: i,
                        source: Box::new(e),
                    },
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DistState {
            partition,
            blocks,
            x: x0,
        })
    }

    pub fn t(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.t)
    }

    /// One synchronous iteration over all blocks, in parallel.
    pub fn step(
        &mut self,
        config: &OptimizerConfig,
        grad_sample: &Vector,
    ) -> Result<Vec<StepReport>> {
        self.step_with(config, grad_sample, BlockOrder::Parallel)
    }

    pub fn step_with(
        &mut self,
        config: &OptimizerConfig,
        grad_sample: &Vector,
        order: BlockOrder,
    ) -> Result<Vec<StepReport>> {
        if grad_sample.dim() != self.partition.n {
            return Err(KgdError::Input(format!(
                "gradient has dimension {}, expected {}",
                grad_sample.dim(),
                self.partition.n
            )));
        }
        let ranges = &self.partition.ranges;
        let advance = |(i, block): (usize, &mut OptState)| {
            block
                .step(config, &grad_sample.slice(ranges[i].clone()))
                .map_err(|e| KgdError::Block {
                    block: i,
                    source: Box::new(e),
                })
        };
        let reports: Vec<Result<StepReport>> = match order {
            BlockOrder::Forward => self.blocks.iter_mut().enumerate().map(advance).collect(),
            BlockOrder::Reverse => {
                let mut out: Vec<_> = self
                    .blocks
                    .iter_mut()
                    .enumerate()
                    .rev()
                    .map(advance)
                    .collect();
                out.reverse();
                out
            }
            BlockOrder::Parallel => self
                .blocks
                .par_iter_mut()
                .enumerate()
                .map(advance)
                .collect(),
        };
        let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
        let x = self.x.as_mut_slice();
        for (block, range) in self.blocks.iter().zip(ranges) {
            x[range.clone()].copy_from_slice(block.x.as_slice());
        }
        Ok(reports)
    }
}

/// Cost model of one filter update: monolithic `n^γ` against `⌈n/d⌉·d^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlopEstimate {
    pub monolithic: f64,
    pub distributed: f64,
    pub speedup: f64,
    pub blocks: usize,
    /// Set when `d` does not divide `n`.
    pub approximate: bool,
}

pub fn flop_estimate(n: usize, d: usize, gamma_exp: f64) -> Result<FlopEstimate> {
    if n == 0 || d == 0 || d > n {
        return Err(KgdError::Parameter(format!(
            "flop_estimate needs 1 <= d <= n, got n={n}, d={d}"
        )));
    }
    if !(2.0..=3.0).contains(&gamma_exp) {
        return Err(KgdError::Parameter(format!(
            "exponent must lie in [2, 3], got {gamma_exp}"
        )));
    }
    let blocks = n.div_ceil(d);
    let monolithic = (n as f64).powf(gamma_exp);
    let distributed = blocks as f64 * (d as f64).powf(gamma_exp);
    Ok(FlopEstimate {
        monolithic,
        distributed,
        speedup: monolithic / distributed,
        blocks,
        approximate: !n.is_multiple_of(d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{Method, ScheduleSpec};

    #[test]
    fn partition_examples() {
        assert_eq!(partition(7, 3).unwrap().ranges, vec![0..3, 3..6, 6..7]);
        assert_eq!(partition(10, 10).unwrap().ranges, vec![0..10]);
        assert_eq!(partition(10, 50).unwrap().ranges, vec![0..10]);
        let p = partition(481, 50).unwrap();
        assert_eq!(p.count(), 10);
        assert_eq!(p.ranges.last().unwrap().len(), 31);
        assert_eq!(partition(7980, 50).unwrap().count(), 160);
        assert!(partition(0, 3).is_err());
    }

    #[test]
    fn slices_gradient_per_block() {
        let cfg = OptimizerConfig::new(Method::Sgd, ScheduleSpec::constant(1.0));
        let mut st = DistState::init(&cfg, 2, Vector::zeros(4), &Vector::zeros(4)).unwrap();
        let reports = st
            .step(&cfg, &Vector::from(vec![1.0, 2.0, 3.0, 4.0]))
            .unwrap();
        assert_eq!(reports[0].direction.as_slice(), &[1.0, 2.0]);
        assert_eq!(reports[1].direction.as_slice(), &[3.0, 4.0]);
        assert_eq!(st.x.as_slice(), &[-1.0, -2.0, -3.0, -4.0]);
    }

    #[test]
    fn flop_examples() {
        let e = flop_estimate(100, 10, 2.807).unwrap();
        assert!((e.speedup - 10f64.powf(1.807)).abs() < 1e-9);
        assert!((e.speedup - 64.1).abs() < 0.05);
        assert!(!e.approximate);
        assert_eq!(flop_estimate(37, 37, 2.807).unwrap().speedup, 1.0);
        let e = flop_estimate(7980, 50, 2.807).unwrap();
        assert_eq!(e.blocks, 160);
        assert!(e.approximate);
    }

    #[test]
    fn block_errors_carry_index() {
        let cfg = OptimizerConfig::new(Method::Kgd, ScheduleSpec::constant(0.1));
        let mut st = DistState::init(&cfg, 2, Vector::zeros(4), &Vector::zeros(4)).unwrap();
        let err = st
            .step_with(
                &cfg,
                &Vector::from(vec![0.0, 0.0, f64::NAN, 0.0]),
                BlockOrder::Forward,
            )
            .unwrap_err();
        assert!(matches!(err, KgdError::Block { block: 1, .. }), "{err:?}");
    }
}
