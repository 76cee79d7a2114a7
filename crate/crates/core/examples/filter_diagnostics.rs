//! Gain and covariance spectra of KGD on the noisy bowl, plus the forgetting
//! of the initial covariance.

use kgd::dense::Mat;
use kgd::kalman::{robustness_probe, robustness_probe_gradient_block, steady_state_gain};
use kgd::models::{StateSpaceModel, TransitionAux};
use kgd::verify::{reference_config, sinbowl_diagnostics};
use kgd::Method;

fn main() -> kgd::Result<()> {
    let config = reference_config(Method::Kgd);
    let diag = sinbowl_diagnostics(&config, 500, 0)?;
    for t in [1, 2, 5, 10, 50, 500] {
        let (gl, gh) = diag.gain[t - 1];
        let (pl, ph) = diag.covariance[t - 1];
        println!("t = {t:>3}: gain eig [{gl:.5}, {gh:.5}], P eig [{pl:.4}, {ph:.4}]");
    }
    println!(
        "scalar steady-state gain {:.5}",
        steady_state_gain(config.sigma_q, config.sigma_r, config.p0_scale)
    );

    // Two filters started from P0 = 0.01·I and 0.02·I.
    let model = StateSpaceModel::plain(2, config.sigma_q, config.sigma_r)?;
    let (a, b) = (Mat::scaled_identity(4, 0.01), Mat::scaled_identity(4, 0.02));
    let aux = |_| TransitionAux::with_alpha(0.1);
    let full = robustness_probe(&model, &a, &b, 100, aux)?;
    let grad = robustness_probe_gradient_block(&model, &a, &b, 100, aux)?;
    for t in [0, 10, 50, 100] {
        println!(
            "t = {t:>3}: ‖ΔP‖_F {:.5}, gradient block {:.3e}",
            full[t], grad[t]
        );
    }
    Ok(())
}
