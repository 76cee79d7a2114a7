//! Block-diagonal KGD on a 400-dimensional quadratic: cost model, wall-clock
//! per step and progress for several block sizes.
//!
//! With isotropic noise and initial covariance the plain model's gain is a
//! multiple of the identity, so every partition reproduces the monolithic
//! iterates and only the cost changes.

use std::time::Instant;

use kgd::distributed::{flop_estimate, DistState};
use kgd::problems::{quadratic_problem, Problem};
use kgd::{Method, OptState, OptimizerConfig, Rng, ScheduleSpec};

const N: usize = 400;
const STEPS: usize = 20;

fn main() -> kgd::Result<()> {
    let problem = quadratic_problem(N, 10.0).with_noise(1.0);
    let config = OptimizerConfig::new(Method::Kgd, ScheduleSpec::constant(0.05));

    for d in [10, 50, 100, N] {
        let est = flop_estimate(N, d, 3.0)?;
        let mut rng = Rng::new(1);
        let x0 = problem.initial_point(&mut rng);
        let g0 = problem.grad_sample(&x0, &mut rng);
        let start = Instant::now();
        let x = if d == N {
            let mut st = OptState::init(&config, x0, &g0)?;
            for _ in 0..STEPS {
                let g = problem.grad_sample(&st.x, &mut rng);
                st.step(&config, &g)?;
            }
            st.x
        } else {
            let mut st = DistState::init(&config, d, x0, &g0)?;
            for _ in 0..STEPS {
                let g = problem.grad_sample(&st.x, &mut rng);
                st.step(&config, &g)?;
            }
            st.x
        };
        let per_step = start.elapsed() / STEPS as u32;
        println!(
            "D = {d:>3}: {:>2} blocks, predicted speedup {:>6.0}x, {per_step:>10.2?}/step, ‖∇f‖ after {STEPS} steps {:.3}",
            est.blocks,
            est.speedup,
            problem.true_grad(&x).expect("closed-form gradient").norm(),
        );
    }
    Ok(())
}
