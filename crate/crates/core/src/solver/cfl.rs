use crate::domain::{TensorField, YeeGrid};
use crate::error::{Error, Result};

/// Time step and delay depth with `tau = depth * dt` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStep {
    pub dt: f64,
    pub depth: usize,
    /// Step before rounding to a divisor of `tau`.
    pub dt_raw: f64,
}

/// `dt_raw = safety / (c_max sqrt(sum 1/h^2))`, then shrunk so that `tau / dt` is an integer.
pub fn compute_dt(
    g: &YeeGrid,
    eps: &TensorField,
    mu: &TensorField,
    cfl_safety: f64,
    tau: f64,
) -> Result<TimeStep> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Config(format!("tau = {tau}; tau > 0 is required")));
    }
    if !(cfl_safety.is_finite() && cfl_safety > 0.0) {
        return Err(Error::Config(format!(
            "cfl_safety = {cfl_safety} must be positive"
        )));
    }
    if !(eps.lambda_min > 0.0 && mu.lambda_min > 0.0) {
        return Err(Error::Assumption(
            "material tensors are not uniformly positive definite".into(),
        ));
    }
    let c_max = 1.0 / (eps.lambda_min * mu.lambda_min).sqrt();
    let inv = g.h.iter().map(|h| 1.0 / (h * h)).sum::<f64>().sqrt();
    let dt_raw = cfl_safety / (c_max * inv);
    // guard against tau/dt_raw landing a hair above an integer through rounding
    let ratio = tau / dt_raw;
    let depth = if (ratio - ratio.round()).abs() <= 1e-12 * ratio {
        ratio.round()
    } else {
        ratio.ceil()
    } as usize;
    let depth = depth.max(1);
    Ok(TimeStep {
        dt: tau / depth as f64,
        depth,
        dt_raw,
    })
}
