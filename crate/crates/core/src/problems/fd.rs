use crate::dense::Vector;
use crate::error::{KgdError, Result};

/// Central-difference gradient with per-coordinate step `h·max(1, |xᵢ|)`.
pub fn fd_gradient(f: impl Fn(&Vector) -> f64, x: &Vector, h: f64) -> Result<Vector> {
    if !(h > 0.0) {
        return Err(KgdError::Parameter(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let mut probe = x.clone();
    let mut grad = Vec::with_capacity(x.dim());
    for i in 0..x.dim() {
        let hi = h * x[i].abs().max(1.0);
        probe[i] = x[i] + hi;
        let up = f(&probe);
        probe[i] = x[i] - hi;
        let down = f(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(KgdError::NonFiniteObjective { coord: i });
        }
        grad.push((up - down) / (2.0 * hi));
    }
    Ok(Vector::from(grad))
}
