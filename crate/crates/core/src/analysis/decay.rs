use super::energy::EnergyTrace;
use crate::error::{Error, Result};

/// Least-squares fit of `ln E_xi = ln(C E_xi(0)) - lambda t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub lambda: f64,
    pub c: f64,
    /// Coefficient of determination; 0 when the data have no spread.
    pub r2: f64,
    pub points: usize,
}

pub fn fit_decay(trace: &EnergyTrace, window: (f64, f64)) -> Result<DecayFit> {
    let e0 = trace.rows.first().map(|r| r.e_xi).unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = trace
        .rows
        .iter()
        .filter(|r| r.t >= window.0 && r.t <= window.1)
        .map(|r| (r.t, r.e_xi))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Config(format!(
            "decay window [{}, {}] holds fewer than two records",
            window.0, window.1
        )));
    }
    if let Some((t, e)) = pts.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(Error::Config(format!(
            "decay window rejected: E_xi({t}) = {e} is not positive"
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, e) in &pts {
        let (dt, dy) = (t - mt, e.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    // spread below round-off of the logarithms counts as no spread
    let flat = syy <= n * (1e-13 * my.abs().max(1.0)).powi(2);
    let slope = if stt > 0.0 && !flat { sty / stt } else { 0.0 };
    let intercept = my - slope * mt;
    let ss_res: f64 = pts
        .iter()
        .map(|(t, e)| (e.ln() - intercept - slope * t).powi(2))
        .sum();
    let r2 = if flat { 0.0 } else { 1.0 - ss_res / syy };
    let c = if e0 > 0.0 {
        intercept.exp() / e0
    } else {
        f64::NAN
    };
    Ok(DecayFit {
        lambda: -slope,
        c,
        r2,
        points: pts.len(),
    })
}
