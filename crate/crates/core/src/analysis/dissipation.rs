use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::energy::{cumulative_trapezoid, EnergyTrace};
use crate::error::{Error, Result};

pub const DEFAULT_DISSIPATION_SLACK: f64 = 1.05;
/// Cap on the number of `(t1, t2)` pairs examined.
pub const MAX_PAIRS: usize = 10_000;
/// Absolute round-off allowance, scaled by `max(1, max E_xi)`.
pub const ROUNDOFF_TOL: f64 = 1e-12;

/// Weight `xi` of the delay energy and the two-sided dissipation constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationConstants {
    pub xi: f64,
    pub c1e: f64,
    pub c2e: f64,
    /// Open interval of admissible `xi`.
    pub interval: (f64, f64),
}

impl DissipationConstants {
    /// Constants for an explicit `xi`; `None` when it lies outside the admissible interval.
    pub fn with_xi(gamma1: f64, gamma2: f64, c1: f64, c2: f64, xi: f64) -> Option<Self> {
        let lo = gamma2 * c2 / 2.0;
        let hi = gamma1 * c1 - gamma2 * c2 / 2.0;
        if !(xi > lo && xi < hi) {
            return None;
        }
        let c1e = (hi - xi).min(xi - lo);
        let c2e = gamma1 * c2 + gamma2 * c2 / 2.0 + xi;
        Some(DissipationConstants {
            xi,
            c1e,
            c2e,
            interval: (lo, hi),
        })
    }
}

/// Midpoint `xi = gamma1 c1 / 2` of `(gamma2 c2 / 2, gamma1 c1 - gamma2 c2 / 2)`.
pub fn xi_default(gamma1: f64, gamma2: f64, c1: f64, c2: f64) -> Result<DissipationConstants> {
    if !(gamma1 * c1 > gamma2 * c2) {
        return Err(Error::Assumption(format!(
            "no admissible xi: xi exists only if gamma1 c1 > gamma2 c2 (here gamma1 c1 = {}, gamma2 c2 = {})",
            gamma1 * c1,
            gamma2 * c2
        )));
    }
    let xi = gamma1 * c1 / 2.0;
    DissipationConstants::with_xi(gamma1, gamma2, c1, c2, xi)
        .ok_or_else(|| Error::Assumption("admissible xi interval is empty".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma31Report {
    pub pairs: usize,
    pub slack: f64,
    /// `min over pairs of -(c1E/slack) int D - dE` (non-negative when the upper side holds).
    pub upper_margin: f64,
    /// `min over pairs of dE + slack c2E int D` (non-negative when the lower side holds).
    pub lower_margin: f64,
    pub upper_holds: bool,
    pub lower_holds: bool,
    /// Row pairs attaining the worst margins.
    pub worst_upper_pair: Option<(usize, usize)>,
    pub worst_lower_pair: Option<(usize, usize)>,
}

impl Lemma31Report {
    pub fn holds(&self) -> bool {
        self.upper_holds && self.lower_holds
    }
}

/// Row pairs `i < j`: every pair when few, else all consecutive pairs plus seeded random ones.
pub fn sample_pairs(rows: usize, max_pairs: usize) -> Vec<(usize, usize)> {
    if rows < 2 {
        return Vec::new();
    }
    let total = rows * (rows - 1) / 2;
    if total <= max_pairs {
        return (0..rows)
            .flat_map(|i| (i + 1..rows).map(move |j| (i, j)))
            .collect();
    }
    let mut pairs: Vec<(usize, usize)> = (0..rows - 1).map(|i| (i, i + 1)).collect();
    pairs.push((0, rows - 1));
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    while pairs.len() < max_pairs.max(rows) {
        let a = rng.gen_range(0..rows);
        let b = rng.gen_range(0..rows);
        if a != b {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    pairs
}

/// `-c1E int D >= E_xi(t2) - E_xi(t1) >= -c2E int D` over sampled pairs, with multiplicative slack.
pub fn lemma31_check(trace: &EnergyTrace, k: &DissipationConstants, slack: f64) -> Lemma31Report {
    let t = trace.times();
    let e = trace.e_xi();
    let cum = cumulative_trapezoid(&t, &trace.damping());
    let tol = ROUNDOFF_TOL * e.iter().fold(1.0f64, |m, v| m.max(*v));
    let pairs = sample_pairs(t.len(), MAX_PAIRS);
    let mut rep = Lemma31Report {
        pairs: pairs.len(),
        slack,
        upper_margin: f64::INFINITY,
        lower_margin: f64::INFINITY,
        upper_holds: true,
        lower_holds: true,
        worst_upper_pair: None,
        worst_lower_pair: None,
    };
    if pairs.is_empty() {
        rep.upper_margin = 0.0;
        rep.lower_margin = 0.0;
    }
    for &(i, j) in &pairs {
        let de = e[j] - e[i];
        let int_d = cum[j] - cum[i];
        let up = -(k.c1e / slack) * int_d - de;
        let lo = de + slack * k.c2e * int_d;
        if up < rep.upper_margin {
            rep.upper_margin = up;
            rep.worst_upper_pair = Some((i, j));
        }
        if lo < rep.lower_margin {
            rep.lower_margin = lo;
            rep.worst_lower_pair = Some((i, j));
        }
    }
    rep.upper_holds = rep.upper_margin >= -tol;
    rep.lower_holds = rep.lower_margin >= -tol;
    rep
}

/// Largest mismatch, relative to `max(E_xi(0), tiny)`, between the recorded change of `E_xi` over
/// consecutive records and minus the trapezoid integral of the per-step boundary rate.
pub fn dissipation_residual(trace: &EnergyTrace, step_times: &[f64], step_rate: &[f64]) -> f64 {
    if trace.rows.len() < 2 {
        return 0.0;
    }
    let cum = cumulative_trapezoid(step_times, step_rate);
    let at = |t: f64| -> f64 {
        let i = step_times.partition_point(|&s| s < t - 1e-9 * t.abs().max(1.0));
        cum[i.min(cum.len() - 1)]
    };
    let scale = trace.rows[0].e_xi;
    let mut worst: f64 = 0.0;
    for w in trace.rows.windows(2) {
        let predicted = -(at(w[1].t) - at(w[0].t));
        let actual = w[1].e_xi - w[0].e_xi;
        worst = worst.max((actual - predicted).abs());
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::energy::{EnergyRow, EnergyTrace};

    fn synthetic(e: impl Fn(f64) -> f64, d: impl Fn(f64) -> f64, n: usize, dt: f64) -> EnergyTrace {
        EnergyTrace {
            rows: (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    EnergyRow {
                        t,
                        e_weighted: e(t),
                        e_plain: e(t),
                        e_xi: e(t),
                        d: d(t),
                        flux: d(t),
                    }
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn xi_examples() {
        let k = xi_default(1.0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(k.interval, (0.25, 0.75));
        assert_eq!((k.xi, k.c1e, k.c2e), (0.5, 0.25, 1.75));
        let k = xi_default(1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(k.interval, (0.0, 1.0));
        assert_eq!((k.xi, k.c1e, k.c2e), (0.5, 0.5, 1.5));
        let err = xi_default(0.5, 1.0, 1.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("gamma1 c1 > gamma2 c2"));
    }

    #[test]
    fn conservative_trace_has_zero_margin() {
        let tr = synthetic(|_| 2.0, |_| 0.0, 50, 0.1);
        let k = xi_default(1.0, 0.0, 1.0, 1.0).unwrap();
        let r = lemma31_check(&tr, &k, 1.05);
        assert!(r.holds());
        assert_eq!(r.upper_margin, 0.0);
        assert_eq!(r.lower_margin, 0.0);
    }

    #[test]
    fn growth_without_damping_is_flagged() {
        let tr = synthetic(|t| 1.0 + 0.1 * (3.0 * t).sin().max(0.0), |_| 0.0, 50, 0.1);
        let k = xi_default(1.0, 0.0, 1.0, 1.0).unwrap();
        let r = lemma31_check(&tr, &k, 1.05);
        assert!(!r.upper_holds);
    }

    #[test]
    fn pair_sampling_is_capped_and_deterministic() {
        let p = sample_pairs(2001, MAX_PAIRS);
        assert_eq!(p.len(), MAX_PAIRS);
        assert_eq!(p, sample_pairs(2001, MAX_PAIRS));
        assert!(p.iter().all(|(i, j)| i < j && *j < 2001));
        assert_eq!(sample_pairs(10, MAX_PAIRS).len(), 45);
    }

    #[test]
    fn exact_balance_has_small_residual() {
        let tr = synthetic(|t| (-t).exp(), |t| (-t).exp(), 201, 0.01);
        let times = tr.times();
        let rate = tr.damping();
        let r = dissipation_residual(&tr, &times, &rate);
        assert!(r < 1e-5, "{r}");
        let zero = synthetic(|_| 0.0, |_| 0.0, 10, 0.1);
        assert_eq!(
            dissipation_residual(&zero, &zero.times(), &zero.damping()),
            0.0
        );
    }
}
