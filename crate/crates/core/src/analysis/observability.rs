use super::dissipation::DissipationConstants;
use super::energy::{trapezoid, EnergyTrace};
use crate::domain::{MaterialReport, MultiplierField};
use crate::error::{Error, Result};
use crate::feedback::FeedbackLaw;
use crate::solver::Weighting;

pub const DEFAULT_OBSERVABILITY_SLACK: f64 = 1.10;

/// Inputs the observability constants were assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservabilityInputs {
    pub alpha: f64,
    pub d1: f64,
    pub beta: f64,
    pub m_sup: f64,
    pub lambda_max_eps: f64,
    pub lambda_max_mu: f64,
}

/// Constants of `int_0^T E_xi <= c (E_xi(0) + E_xi(T)) + c_T int_0^T D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservabilityConstants {
    pub delta: f64,
    pub c: f64,
    pub c_t: f64,
    /// `max(lambda_max(eps), lambda_max(mu), 1)`; already folded into `c`, `c_t` in weighted mode.
    pub kappa: f64,
    pub weighting: Weighting,
    pub inputs: ObservabilityInputs,
}

pub fn observability_constants(
    report: &MaterialReport,
    m: &MultiplierField,
    k: &DissipationConstants,
    law: &FeedbackLaw,
    tau: f64,
    weighting: Weighting,
) -> Result<ObservabilityConstants> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| Error::Contract(format!("material report lacks {name}")))
    };
    let inputs = ObservabilityInputs {
        alpha: need(report.alpha, "alpha")?,
        d1: need(report.d1, "d1")?,
        beta: report.beta.unwrap_or(m.beta),
        m_sup: report.m_sup.unwrap_or(m.m_sup),
        lambda_max_eps: need(report.lambda_max_eps, "lambda_max(eps)")?,
        lambda_max_mu: need(report.lambda_max_mu, "lambda_max(mu)")?,
    };
    observability_from_inputs(
        inputs,
        k,
        law.constants().c2,
        law.gamma1,
        law.gamma2,
        tau,
        weighting,
    )
}

pub fn observability_from_inputs(
    inputs: ObservabilityInputs,
    k: &DissipationConstants,
    c2: f64,
    gamma1: f64,
    gamma2: f64,
    tau: f64,
    weighting: Weighting,
) -> Result<ObservabilityConstants> {
    let ObservabilityInputs {
        alpha,
        d1,
        beta,
        m_sup,
        lambda_max_eps: le,
        lambda_max_mu: lm,
    } = inputs;
    if !(d1 > 0.0) {
        return Err(Error::Assumption(format!(
            "d1 = {d1} is not positive; the multiplier estimate fails"
        )));
    }
    if !(beta > 0.0) {
        return Err(Error::Assumption(format!(
            "beta = {beta} is not positive; the domain is not star-shaped"
        )));
    }
    if !(alpha > 0.0) {
        return Err(Error::Assumption(format!(
            "alpha = {alpha} is not positive"
        )));
    }
    let delta = beta * alpha / (m_sup * m_sup * le.max(lm).powi(2));
    let mut c = m_sup * le * lm / (d1 * alpha);
    let mut c_t = (1.0 / (d1 * alpha))
        * (1.0 / (2.0 * delta) + c2 * c2 * gamma1.max(gamma2).powi(2) / delta)
        + k.xi * tau;
    let kappa = le.max(lm).max(1.0);
    if weighting == Weighting::Weighted {
        c *= kappa;
        c_t *= kappa;
    }
    Ok(ObservabilityConstants {
        delta,
        c,
        c_t,
        kappa,
        weighting,
        inputs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma32Report {
    pub horizon: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Trapezoid check on the rows with `t <= T`.
pub fn lemma32_check(
    trace: &EnergyTrace,
    oc: &ObservabilityConstants,
    horizon: f64,
    slack: f64,
) -> Lemma32Report {
    let rows: Vec<_> = trace
        .rows
        .iter()
        .filter(|r| r.t <= horizon * (1.0 + 1e-12) + 1e-300)
        .collect();
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.e_xi).collect();
    let d: Vec<f64> = rows.iter().map(|r| r.d).collect();
    let lhs = trapezoid(&t, &e);
    let rhs = match (e.first(), e.last()) {
        (Some(a), Some(b)) => oc.c * (a + b) + oc.c_t * trapezoid(&t, &d),
        _ => 0.0,
    };
    let ratio = if rhs > 0.0 {
        lhs / rhs
    } else if lhs > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Lemma32Report {
        horizon,
        lhs,
        rhs,
        ratio,
        slack,
        holds: lhs <= slack * rhs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::dissipation::xi_default;
    use crate::analysis::energy::EnergyRow;

    fn unit_inputs() -> ObservabilityInputs {
        ObservabilityInputs {
            alpha: 1.0,
            d1: 1.0,
            beta: 0.5,
            m_sup: 3f64.sqrt() / 2.0,
            lambda_max_eps: 1.0,
            lambda_max_mu: 1.0,
        }
    }

    #[test]
    fn centered_cube_example() {
        let k = xi_default(1.0, 0.0, 1.0, 1.0).unwrap();
        let oc =
            observability_from_inputs(unit_inputs(), &k, 1.0, 1.0, 0.0, 0.25, Weighting::Weighted)
                .unwrap();
        assert!((oc.delta - 2.0 / 3.0).abs() < 1e-15);
        assert!((oc.c - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((oc.c_t - 2.375).abs() < 1e-14);
    }

    #[test]
    fn doubling_lambda_max() {
        let k = xi_default(1.0, 0.0, 1.0, 1.0).unwrap();
        let a = observability_from_inputs(unit_inputs(), &k, 1.0, 1.0, 0.0, 0.25, Weighting::Plain)
            .unwrap();
        let mut i = unit_inputs();
        i.lambda_max_eps = 2.0;
        let b = observability_from_inputs(i, &k, 1.0, 1.0, 0.0, 0.25, Weighting::Plain).unwrap();
        assert!((a.delta / b.delta - 4.0).abs() < 1e-14);
        assert!((b.c / a.c - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_d1_is_a_hypothesis_failure() {
        let k = xi_default(1.0, 0.0, 1.0, 1.0).unwrap();
        let mut i = unit_inputs();
        i.d1 = 0.0;
        assert!(matches!(
            observability_from_inputs(i, &k, 1.0, 1.0, 0.0, 0.25, Weighting::Plain),
            Err(Error::Assumption(_))
        ));
    }

    fn flat(e: f64, n: usize, dt: f64) -> EnergyTrace {
        EnergyTrace {
            rows: (0..n)
                .map(|i| EnergyRow {
                    t: i as f64 * dt,
                    e_weighted: e,
                    e_plain: e,
                    e_xi: e,
                    d: 0.0,
                    flux: 0.0,
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn zero_and_flat_traces() {
        let k = xi_default(1.0, 0.0, 1.0, 1.0).unwrap();
        let oc =
            observability_from_inputs(unit_inputs(), &k, 1.0, 1.0, 0.0, 0.25, Weighting::Plain)
                .unwrap();
        let z = lemma32_check(&flat(0.0, 10, 0.1), &oc, 0.9, 1.1);
        assert!(z.holds);
        assert_eq!(z.ratio, 0.0);
        let f = lemma32_check(&flat(1.0, 1001, 0.1), &oc, 100.0, 1.1);
        assert!(!f.holds);
    }
}
