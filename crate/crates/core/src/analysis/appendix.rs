use super::dissipation::{sample_pairs, MAX_PAIRS};
use super::energy::{cumulative_trapezoid, trapezoid};
use crate::error::{Error, Result};

pub const APPENDIX_SLACK: f64 = 1.05;

/// Outcome of the exponential-decay certificate. `certified` requires every check.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixCertificate {
    pub horizon: f64,
    pub c_tilde: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub a1_holds: bool,
    pub a1_worst: f64,
    pub a2_holds: bool,
    pub a2_windows: usize,
    pub a2_worst_ratio: f64,
    pub bound_holds: bool,
    pub bound_worst_ratio: f64,
    pub certified: bool,
}

/// Rate data `gamma = c~/(c~ + T/2)`, `lambda = -ln(gamma)/T` with `c~ = (c_T + c c2E)/c1E`.
pub fn decay_rate(c: f64, c_t: f64, c1e: f64, c2e: f64, horizon: f64) -> (f64, f64, f64) {
    let c_tilde = (c_t + c * c2e) / c1e;
    let gamma = c_tilde / (c_tilde + horizon / 2.0);
    (c_tilde, gamma, -gamma.ln() / horizon)
}

#[allow(clippy::too_many_arguments)]
pub fn appendix_analyze(
    t: &[f64],
    e: &[f64],
    d: &[f64],
    c1e: f64,
    c2e: f64,
    c: f64,
    c_t: f64,
    horizon: f64,
) -> Result<AppendixCertificate> {
    if !(horizon > 4.0 * c) {
        return Err(Error::Contract(format!(
            "Choosing T > 4c is required: T = {horizon}, 4c = {}",
            4.0 * c
        )));
    }
    if t.len() != e.len() || t.len() != d.len() || t.len() < 2 {
        return Err(Error::Contract(
            "trace arrays must share a length of at least two".into(),
        ));
    }
    let (c_tilde, gamma, lambda) = decay_rate(c, c_t, c1e, c2e, horizon);
    let emax = e.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * emax;

    // Two-sided dissipation over sampled pairs.
    let cd = cumulative_trapezoid(t, d);
    let mut a1_holds = true;
    let mut a1_worst = 0.0f64;
    for (i, j) in sample_pairs(t.len(), MAX_PAIRS) {
        let de = e[j] - e[i];
        let id = cd[j] - cd[i];
        let upper = de - (-(c1e / APPENDIX_SLACK) * id);
        let lower = -APPENDIX_SLACK * c2e * id - de;
        let v = upper.max(lower);
        a1_worst = a1_worst.max(v);
        if v > tol {
            a1_holds = false;
        }
    }

    // Observability on each complete window [mT, (m+1)T].
    let t0 = t[0];
    let mut a2_windows = 0;
    let mut a2_worst_ratio = 0.0f64;
    let mut a2_holds = true;
    let eps_t = 1e-9 * horizon;
    let mut m = 0usize;
    loop {
        let a = t0 + m as f64 * horizon;
        let b = a + horizon;
        if b > t[t.len() - 1] + eps_t {
            break;
        }
        let idx: Vec<usize> = (0..t.len())
            .filter(|&i| t[i] >= a - eps_t && t[i] <= b + eps_t)
            .collect();
        if idx.len() >= 2 {
            let ts: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
            let es: Vec<f64> = idx.iter().map(|&i| e[i]).collect();
            let ds: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
            let lhs = trapezoid(&ts, &es);
            let rhs = c * (es[0] + es[es.len() - 1]) + c_t * trapezoid(&ts, &ds);
            a2_windows += 1;
            if rhs > 0.0 {
                a2_worst_ratio = a2_worst_ratio.max(lhs / rhs);
            } else if lhs > 0.0 {
                a2_worst_ratio = f64::INFINITY;
            }
            if lhs > APPENDIX_SLACK * rhs + tol {
                a2_holds = false;
            }
        }
        m += 1;
    }
    if a2_windows == 0 {
        a2_holds = false;
    }

    // Pointwise envelope.
    let mut bound_holds = true;
    let mut bound_worst_ratio = 0.0f64;
    for (ti, ei) in t.iter().zip(e) {
        let env = (-lambda * (ti - t0)).exp() * e[0] / gamma;
        if env > 0.0 {
            bound_worst_ratio = bound_worst_ratio.max(ei / env);
        }
        if *ei > env * (1.0 + 1e-12) + tol {
            bound_holds = false;
        }
    }

    Ok(AppendixCertificate {
        horizon,
        c_tilde,
        gamma,
        lambda,
        a1_holds,
        a1_worst,
        a2_holds,
        a2_windows,
        a2_worst_ratio,
        bound_holds,
        bound_worst_ratio,
        certified: a1_holds && a2_holds && bound_holds,
    })
}
