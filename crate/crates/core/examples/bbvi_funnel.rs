//! Fits a diagonal Gaussian to the 2-D funnel with KGD-RMSProp and prints the
//! ELBO every 100 steps.

use kgd::problems::{BbviParams, BbviProblem, BbviTarget, Problem};
use kgd::{Method, OptState, OptimizerConfig, Rng, ScheduleSpec};

fn main() -> kgd::Result<()> {
    let problem = BbviProblem::new(BbviTarget::Funnel, 1);
    let config = OptimizerConfig::new(Method::KgdRmsProp, ScheduleSpec::constant(0.01));
    let mut rng = Rng::new(0);
    let x0 = problem.initial_point(&mut rng);
    let g0 = problem.grad_sample(&x0, &mut rng);
    let mut state = OptState::init(&config, x0, &g0)?;

    println!(
        "{:>5} {:>9} {:>8} {:>8} {:>9} {:>9}",
        "t", "ELBO", "mu1", "mu2", "sigma1", "sigma2"
    );
    for t in 0..=1000 {
        if t % 100 == 0 {
            let p = BbviParams::from_vector(&state.x);
            println!(
                "{t:>5} {:>9.4} {:>8.4} {:>8.4} {:>9.5} {:>9.5}",
                problem.elbo(&p),
                p.mu[0],
                p.mu[1],
                p.log_sigma[0].exp(),
                p.log_sigma[1].exp(),
            );
        }
        let g = problem.grad_sample(&state.x, &mut rng);
        state.step(&config, &g)?;
    }
    Ok(())
}
