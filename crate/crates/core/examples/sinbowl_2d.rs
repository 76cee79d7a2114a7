//! KGD against SGD on the noisy 2-D bowl, 20 seeds, 500 steps.
//!
//! Run with `cargo run --release --example sinbowl_2d [out.csv]`.

use kgd::harness::{run_experiment, summarize, write_csv_path, ExperimentConfig, ProblemSpec};
use kgd::problems::SINBOWL_GRID_MIN;
use kgd::{Method, OptimizerConfig, ScheduleSpec};

fn main() -> kgd::Result<()> {
    let out = std::env::args().nth(1);
    let seeds: Vec<u64> = (0..20).collect();
    println!("grid minimum f* = {SINBOWL_GRID_MIN:.6}");
    for method in [Method::Kgd, Method::Sgd] {
        let config = ExperimentConfig::new(
            ProblemSpec::SinBowl { noise_std: 1.0 },
            OptimizerConfig::new(method, ScheduleSpec::constant(0.1)),
            500,
            seeds.clone(),
        );
        let traces = run_experiment(&config)?;
        let s = summarize(&traces, SINBOWL_GRID_MIN + 0.3)?;
        println!(
            "{method:>4}: median final f {:+.4} (IQR {:.4}), median ‖∇f‖ {:.4}, within 0.3 of f* on {}/20 seeds",
            s.median_final_f,
            s.iqr_final_f,
            s.median_final_grad_norm,
            s.seeds.iter().filter(|o| o.final_f <= SINBOWL_GRID_MIN + 0.3).count(),
        );
        if let Some(path) = &out {
            let path = format!("{path}.{method}.csv");
            write_csv_path(path.as_ref(), &traces)?;
            println!("      trace written to {path}");
        }
    }
    Ok(())
}
