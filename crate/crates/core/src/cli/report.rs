//! Decay certificates, run classification and the `key = value` summaries written next to outputs.

use std::fmt::Write as _;

use crate::analysis::energy::fmt_num;
use crate::analysis::{
    appendix_analyze, fit_decay, lemma31_check, lemma32_check, observability_constants,
    AppendixCertificate, DecayFit, DissipationConstants, EnergyTrace, Lemma31Report, Lemma32Report,
    ObservabilityConstants,
};
use crate::domain::{MaterialReport, MultiplierField};
use crate::feedback::FeedbackLaw;

use super::config::Config;

/// Growth factor of `E_xi` over the run beyond which a run is classified unstable.
pub const UNSTABLE_GROWTH: f64 = 10.0;
/// Default certificate window as a multiple of the smallest admissible one, `4c`.
pub const HORIZON_FACTOR: f64 = 1.25;

/// The three certified inequalities with the constants they used.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub dissipation: DissipationConstants,
    pub observability: ObservabilityConstants,
    pub lemma31: Lemma31Report,
    pub lemma32: Lemma32Report,
    pub appendix: Result<AppendixCertificate, String>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.lemma31.holds()
            && self.lemma32.holds
            && self.appendix.as_ref().is_ok_and(|a| a.certified)
    }
}

/// Either a certificate or the reason none is issued.
#[derive(Debug, Clone)]
pub enum CertificateStatus {
    Issued(Box<Certificate>),
    Withheld(String),
}

/// Certificates need an admissible `xi`, a valid multiplier and a trace with at least two rows.
pub fn certify(
    cfg: &Config,
    trace: &EnergyTrace,
    law: &FeedbackLaw,
    report: &MaterialReport,
    multiplier: Option<&MultiplierField>,
    dissipation: Option<&DissipationConstants>,
) -> CertificateStatus {
    if law.is_pmc() {
        return CertificateStatus::Withheld("no feedback (both gains are 0)".into());
    }
    let Some(k) = dissipation else {
        return CertificateStatus::Withheld(
            "decay hypothesis not met: an admissible xi needs gamma1 c1 > gamma2 c2 and xi inside the interval".into(),
        );
    };
    let Some(m) = multiplier else {
        return CertificateStatus::Withheld("no valid star center".into());
    };
    if trace.rows.len() < 2 {
        return CertificateStatus::Withheld("trace has fewer than two rows".into());
    }
    let oc = match observability_constants(report, m, k, law, law.tau, cfg.analysis.weighting) {
        Ok(oc) => oc,
        Err(e) => {
            return CertificateStatus::Withheld(format!("observability constants unavailable: {e}"))
        }
    };
    let t_end = trace.rows.last().map_or(0.0, |r| r.t);
    let lemma31 = lemma31_check(trace, k, cfg.analysis.slack_dissipation);
    let lemma32 = lemma32_check(trace, &oc, t_end, cfg.analysis.slack_observability);
    let horizon = cfg.analysis.horizon.unwrap_or(HORIZON_FACTOR * 4.0 * oc.c);
    let appendix = appendix_analyze(
        &trace.times(),
        &trace.e_xi(),
        &trace.damping(),
        k.c1e,
        k.c2e,
        oc.c,
        oc.c_t,
        horizon,
    )
    .map_err(|e| e.to_string());
    CertificateStatus::Issued(Box::new(Certificate {
        dissipation: *k,
        observability: oc,
        lemma31,
        lemma32,
        appendix,
    }))
}

pub fn certificate_text(status: &CertificateStatus) -> String {
    let mut s = String::new();
    let c = match status {
        CertificateStatus::Withheld(why) => {
            let _ = writeln!(s, "certificate = none\nreason = {why}");
            return s;
        }
        CertificateStatus::Issued(c) => c,
    };
    let k = &c.dissipation;
    let oc = &c.observability;
    let _ = writeln!(
        s,
        "certificate = {}",
        if c.passed() { "pass" } else { "FAIL" }
    );
    let _ = writeln!(
        s,
        "xi = {}\nc1E = {}\nc2E = {}",
        fmt_num(k.xi),
        fmt_num(k.c1e),
        fmt_num(k.c2e)
    );
    let _ = writeln!(
        s,
        "xi_interval_low = {}\nxi_interval_high = {}",
        fmt_num(k.interval.0),
        fmt_num(k.interval.1)
    );
    let _ = writeln!(
        s,
        "delta = {}\nc = {}\nc_T = {}\nkappa = {}",
        fmt_num(oc.delta),
        fmt_num(oc.c),
        fmt_num(oc.c_t),
        fmt_num(oc.kappa)
    );
    let l1 = &c.lemma31;
    let _ = writeln!(
        s,
        "dissipation_pairs = {}\ndissipation_slack = {}\ndissipation_upper_margin = {}\ndissipation_lower_margin = {}\ndissipation = {}",
        l1.pairs,
        fmt_num(l1.slack),
        fmt_num(l1.upper_margin),
        fmt_num(l1.lower_margin),
        pass(l1.holds())
    );
    let l2 = &c.lemma32;
    let _ = writeln!(
        s,
        "observability_horizon = {}\nobservability_lhs = {}\nobservability_rhs = {}\nobservability_ratio = {}\nobservability = {}",
        fmt_num(l2.horizon),
        fmt_num(l2.lhs),
        fmt_num(l2.rhs),
        fmt_num(l2.ratio),
        pass(l2.holds)
    );
    match &c.appendix {
        Ok(a) => {
            let _ = writeln!(
                s,
                "decay_horizon = {}\ndecay_c_tilde = {}\ndecay_gamma = {}\ndecay_lambda = {}\ndecay_two_sided = {}\ndecay_windows = {}\ndecay_window_ratio = {}\ndecay_bound_ratio = {}\ndecay_window_check = {}\ndecay_bound = {}\ndecay_certificate = {}",
                fmt_num(a.horizon),
                fmt_num(a.c_tilde),
                fmt_num(a.gamma),
                fmt_num(a.lambda),
                pass(a.a1_holds),
                a.a2_windows,
                fmt_num(a.a2_worst_ratio),
                fmt_num(a.bound_worst_ratio),
                pass(a.a2_holds),
                pass(a.bound_holds),
                pass(a.certified)
            );
        }
        Err(e) => {
            let _ = writeln!(s, "decay_certificate = FAIL\ndecay_error = {e}");
        }
    }
    s
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

/// Observed behavior of a run, independent of any certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub fit: Option<DecayFit>,
    /// `E_xi(t_end) / E_xi(0)`.
    pub growth: f64,
    pub label: &'static str,
}

/// Unstable when `E_xi` grows more than tenfold; otherwise decaying iff the fitted rate on
/// `[t_end/4, t_end]` is positive.
pub fn classify(trace: &EnergyTrace) -> Classification {
    let (Some(first), Some(last)) = (trace.rows.first(), trace.rows.last()) else {
        return Classification {
            fit: None,
            growth: f64::NAN,
            label: "non-decaying",
        };
    };
    let growth = if first.e_xi > 0.0 {
        last.e_xi / first.e_xi
    } else {
        f64::NAN
    };
    let fit = fit_decay(trace, (last.t / 4.0, last.t)).ok();
    let label = if last.e_xi > UNSTABLE_GROWTH * first.e_xi {
        "unstable"
    } else if fit.is_some_and(|f| f.lambda > 0.0) {
        "decaying"
    } else {
        "non-decaying"
    };
    Classification { fit, growth, label }
}

pub fn classification_text(c: &Classification) -> String {
    let mut s = String::new();
    match &c.fit {
        Some(f) => {
            let _ = writeln!(
                s,
                "lambda_hat = {}\nfit_c = {}\nr2 = {}\nfit_points = {}",
                fmt_num(f.lambda),
                fmt_num(f.c),
                fmt_num(f.r2),
                f.points
            );
        }
        None => s.push_str("lambda_hat = n/a\nr2 = n/a\n"),
    }
    let _ = writeln!(
        s,
        "growth = {}\nclassification = {}",
        fmt_num(c.growth),
        c.label
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{EnergyRow, TraceMeta};

    fn trace(f: impl Fn(f64) -> f64) -> EnergyTrace {
        let rows = (0..=40)
            .map(|i| {
                let t = i as f64 * 0.25;
                EnergyRow {
                    t,
                    e_weighted: f(t),
                    e_plain: f(t),
                    e_xi: f(t),
                    d: 0.0,
                    flux: 0.0,
                }
            })
            .collect();
        EnergyTrace {
            rows,
            meta: TraceMeta::default(),
        }
    }

    #[test]
    fn labels_follow_rate_and_growth() {
        assert_eq!(classify(&trace(|t| (-0.3 * t).exp())).label, "decaying");
        assert_eq!(classify(&trace(|_| 2.0)).label, "non-decaying");
        assert_eq!(classify(&trace(|t| (0.5 * t).exp())).label, "unstable");
        assert_eq!(classify(&trace(|t| 1.0 + 0.01 * t)).label, "non-decaying");
        let c = classify(&trace(|t| 3.0 * (-0.7 * t).exp()));
        assert!((c.fit.unwrap().lambda - 0.7).abs() < 1e-12);
    }
}
