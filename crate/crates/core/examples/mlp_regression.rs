//! Trains the 1-4-4-1 tanh network on the synthetic sine data with RMSProp
//! and KGD-RMSProp, minibatch 8, step `0.01 / 1.001^t`.

use kgd::harness::{run_experiment, ExperimentConfig, ProblemSpec};
use kgd::problems::{mlp_problem, MlpSpec, Problem};
use kgd::{Method, OptState, OptimizerConfig, Rng, ScheduleSpec};

fn main() -> kgd::Result<()> {
    let layers = vec![1, 4, 4, 1];
    let spec = ProblemSpec::MlpReg {
        layers: layers.clone(),
        batch_size: 8,
        data_seed: 0,
    };
    for method in [Method::RmsProp, Method::KgdRmsProp] {
        let config = ExperimentConfig {
            record_every: 250,
            ..ExperimentConfig::new(
                spec.clone(),
                OptimizerConfig::new(method, ScheduleSpec::geometric(0.01, 1.001)),
                1000,
                (0..5).collect(),
            )
        };
        let traces = run_experiment(&config)?;
        let curve: Vec<String> = traces
            .iter()
            .filter(|r| r.seed == 0)
            .map(|r| format!("t={} f={:.4}", r.t, r.f))
            .collect();
        println!("{method:>11} seed 0: {}", curve.join(", "));
    }

    // Fit of one trained network on every tenth training point.
    let problem = mlp_problem(MlpSpec::new(layers), 0);
    let config = OptimizerConfig::new(Method::KgdRmsProp, ScheduleSpec::geometric(0.01, 1.001));
    let mut rng = Rng::new(0);
    let w0 = problem.initial_point(&mut rng);
    let g0 = problem.grad_sample(&w0, &mut rng);
    let mut state = OptState::init(&config, w0, &g0)?;
    for _ in 0..1000 {
        let g = problem.grad_sample(&state.x, &mut rng);
        state.step(&config, &g)?;
    }
    let data = &problem.data;
    for k in (0..data.len()).step_by(10) {
        println!(
            "x = {:+.3}: target {:+.3}, net {:+.3}",
            data.x[k],
            data.y[k],
            problem.predict(&state.x, data.x[k])
        );
    }
    Ok(())
}
