use std::fmt::Write as _;

use crate::delay_line::DelayRing;
use crate::domain::{MaterialMass, YeeGrid};
use crate::error::{Error, Result};
use crate::feedback::FeedbackLaw;
use crate::solver::{EMState, Stepper, Weighting};

/// Energies of one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub e_weighted: f64,
    pub e_plain: f64,
    pub e_xi: f64,
    /// `sum a (|Z0|^2 + |Z1|^2)`
    pub d: f64,
}

/// Field energies of the leapfrog pair `(E^n, H^{n+1/2})`; the H part is the product with `H^{n-1/2}`.
pub fn field_energies(
    g: &YeeGrid,
    mass: &MaterialMass,
    stepper: &Stepper,
    state: &EMState,
) -> (f64, f64) {
    let h_prev = stepper.previous_h(g, mass, state);
    let weighted =
        0.5 * mass.eps_pairing(g, &state.e, &state.e) + 0.5 * mass.mu_pairing(g, &h_prev, &state.h);
    let plain = 0.5 * state.e.weighted_dot(&state.e, &g.edge_volume)
        + 0.5 * h_prev.weighted_dot(&state.h, &g.face_volume);
    (weighted, plain)
}

/// `sum a int_0^1 |Z|^2 ds` with the ring's trapezoid rule.
pub fn delay_energy(g: &YeeGrid, ring: &DelayRing) -> f64 {
    ring.s_quadrature()
        .iter()
        .zip(&g.samples)
        .map(|(q, s)| q * s.area)
        .sum()
}

pub fn damping_functional(g: &YeeGrid, ring: &DelayRing) -> f64 {
    ring.z0()
        .iter()
        .zip(ring.z1())
        .zip(&g.samples)
        .map(|((a, b), s)| s.area * (a.norm_squared() + b.norm_squared()))
        .sum()
}

#[allow(clippy::too_many_arguments)]
pub fn energies(
    g: &YeeGrid,
    mass: &MaterialMass,
    stepper: &Stepper,
    state: &EMState,
    ring: &DelayRing,
    xi: f64,
    tau: f64,
    weighting: Weighting,
) -> EnergySample {
    let (e_weighted, e_plain) = field_energies(g, mass, stepper, state);
    let field = match weighting {
        Weighting::Weighted => e_weighted,
        Weighting::Plain => e_plain,
    };
    EnergySample {
        e_weighted,
        e_plain,
        e_xi: field + xi * tau * delay_energy(g, ring),
        d: damping_functional(g, ring),
    }
}

/// Instantaneous decay rate of `E_xi` predicted from the taps:
/// `sum a [(gamma1 g(Z0) + gamma2 g(Z1)) . Z0 - xi (|Z0|^2 - |Z1|^2)]`.
pub fn boundary_rate(g: &YeeGrid, law: &FeedbackLaw, ring: &DelayRing, xi: f64) -> f64 {
    ring.z0()
        .iter()
        .zip(ring.z1())
        .zip(&g.samples)
        .map(|((z0, z1), s)| {
            s.area * (law.load(z0, z1).dot(z0) - xi * (z0.norm_squared() - z1.norm_squared()))
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub t: f64,
    pub e_weighted: f64,
    pub e_plain: f64,
    pub e_xi: f64,
    pub d: f64,
    pub flux: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceMeta {
    pub xi: f64,
    pub dt: f64,
    pub depth: usize,
    pub tau: f64,
    pub digest: String,
}

/// Recorded energy history.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyTrace {
    pub rows: Vec<EnergyRow>,
    pub meta: TraceMeta,
}

pub const CSV_HEADER: &str = "t,E_weighted,E_plain,E_xi,D,flux";

/// Seventeen significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

impl EnergyTrace {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn e_xi(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.e_xi).collect()
    }

    pub fn damping(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.d).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 140);
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                fmt_num(r.t),
                fmt_num(r.e_weighted),
                fmt_num(r.e_plain),
                fmt_num(r.e_xi),
                fmt_num(r.d),
                fmt_num(r.flux)
            );
        }
        s
    }

    /// Parses and validates an energy CSV.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header `{CSV_HEADER}`"),
                })
            }
        }
        let mut rows = Vec::new();
        for (ln, l) in lines {
            let bad = |m: &str| Error::Parse {
                line: ln + 1,
                msg: m.to_string(),
            };
            let v: Vec<f64> = l
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("non-numeric field"))?;
            if v.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(bad("non-finite value"));
            }
            rows.push(EnergyRow {
                t: v[0],
                e_weighted: v[1],
                e_plain: v[2],
                e_xi: v[3],
                d: v[4],
                flux: v[5],
            });
        }
        let t = EnergyTrace {
            rows,
            meta: TraceMeta::default(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.rows.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(Error::Config(format!(
                    "energy trace times not increasing at row {}",
                    i + 1
                )));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.e_weighted < 0.0 || r.e_plain < 0.0 || r.e_xi < 0.0 || r.d < 0.0 {
                return Err(Error::Config(format!(
                    "negative energy or damping at row {i}"
                )));
            }
        }
        Ok(())
    }
}

/// Cumulative trapezoid integral of `y` over `t`.
pub fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for i in 0..t.len() {
        if i > 0 {
            acc += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
        }
        out.push(acc);
    }
    out
}

pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    cumulative_trapezoid(t, y).last().copied().unwrap_or(0.0)
}
