//! All six optimizers on a noisy quadratic with the same gradient noise
//! stream.
//!
//! The filter's lag destabilises KGD-Momentum once `α·λ_max` reaches about
//! 0.2 even though plain momentum is still stable there; `cond = 100` at this
//! step size diverges.

use kgd::harness::{run_experiment, summarize, ExperimentConfig, ProblemSpec};
use kgd::{Method, OptimizerConfig, ScheduleSpec};

fn main() -> kgd::Result<()> {
    let problem = ProblemSpec::Quadratic {
        dim: 10,
        cond: 10.0,
        noise_std: 1.0,
    };
    println!("{:>12} {:>12} {:>12}", "method", "median f", "median ‖∇f‖");
    for method in Method::ALL {
        let config = ExperimentConfig::new(
            problem.clone(),
            OptimizerConfig::new(method, ScheduleSpec::constant(0.01)),
            2000,
            (0..10).collect(),
        );
        let s = summarize(&run_experiment(&config)?, 0.0)?;
        println!(
            "{method:>12} {:>12.4e} {:>12.4e}",
            s.median_final_f, s.median_final_grad_norm
        );
    }
    Ok(())
}
