use std::fmt;

use nalgebra::{Cholesky, SymmetricEigen};

use super::grid::{Vec3, YeeGrid};
use super::materials::{Mat3, TensorField};
use super::multiplier::MultiplierField;

/// Absolute tolerance on `|A_ij - A_ji|`.
pub const SYMMETRY_TOL: f64 = 1e-12;

pub const BOX_NOTE: &str =
    "domain is an axis-aligned box: edges and corners are not C2, so continuous decay theorems are not claimed verbatim";

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Worst value of the checked quantity.
    pub value: f64,
    pub location: Option<Vec3>,
}

/// Constants and pass/fail outcomes of the material and geometry assumptions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterialReport {
    pub alpha: Option<f64>,
    pub lambda_max_eps: Option<f64>,
    pub lambda_max_mu: Option<f64>,
    pub d1: Option<f64>,
    pub beta: Option<f64>,
    pub m_sup: Option<f64>,
    pub checks: Vec<CheckOutcome>,
    pub notes: Vec<String>,
}

impl MaterialReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn merge(mut self, other: MaterialReport) -> MaterialReport {
        self.alpha = self.alpha.or(other.alpha);
        self.lambda_max_eps = self.lambda_max_eps.or(other.lambda_max_eps);
        self.lambda_max_mu = self.lambda_max_mu.or(other.lambda_max_mu);
        self.d1 = self.d1.or(other.d1);
        self.beta = self.beta.or(other.beta);
        self.m_sup = self.m_sup.or(other.m_sup);
        self.checks.extend(other.checks);
        for n in other.notes {
            if !self.notes.contains(&n) {
                self.notes.push(n);
            }
        }
        self
    }
}

impl fmt::Display for MaterialReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), crate::analysis::energy::fmt_num);
        writeln!(f, "alpha = {}", opt(self.alpha))?;
        writeln!(f, "lambda_max_eps = {}", opt(self.lambda_max_eps))?;
        writeln!(f, "lambda_max_mu = {}", opt(self.lambda_max_mu))?;
        writeln!(f, "d1 = {}", opt(self.d1))?;
        writeln!(f, "beta = {}", opt(self.beta))?;
        writeln!(f, "m_sup = {}", opt(self.m_sup))?;
        for c in &self.checks {
            let loc = c.location.map_or(String::new(), |x| {
                format!(" at ({:.6}, {:.6}, {:.6})", x[0], x[1], x[2])
            });
            writeln!(
                f,
                "check {} = {} (worst {:.6e}{loc})",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.value
            )?;
        }
        for n in &self.notes {
            writeln!(f, "note = {n}")?;
        }
        writeln!(
            f,
            "overall = {}",
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}

fn asymmetry(m: &Mat3) -> f64 {
    (m - m.transpose()).abs().max()
}

fn symmetry_and_definiteness(
    g: &YeeGrid,
    t: &TensorField,
    name: &str,
    out: &mut Vec<CheckOutcome>,
) -> f64 {
    let mut worst_asym = (0.0, None);
    let mut worst_min = (f64::INFINITY, None);
    for (p, m) in g.cell_shape.iter().zip(&t.values) {
        let a = asymmetry(m);
        if a > worst_asym.0 || worst_asym.1.is_none() {
            worst_asym = (a, Some(g.cell_center(p)));
        }
        let s = (m + m.transpose()) * 0.5;
        let l = SymmetricEigen::new(s).eigenvalues.min();
        if l < worst_min.0 {
            worst_min = (l, Some(g.cell_center(p)));
        }
    }
    out.push(CheckOutcome {
        name: format!("{name}_symmetric"),
        passed: worst_asym.0 <= SYMMETRY_TOL,
        value: worst_asym.0,
        location: worst_asym.1,
    });
    out.push(CheckOutcome {
        name: format!("{name}_positive_definite"),
        passed: worst_min.0 > 0.0,
        value: worst_min.0,
        location: worst_min.1,
    });
    worst_min.0
}

/// Symmetry, uniform definiteness and the eigenvalue floor `alpha`.
pub fn check_assumption_materials(
    g: &YeeGrid,
    eps: &TensorField,
    mu: &TensorField,
) -> MaterialReport {
    let mut checks = Vec::new();
    let le = symmetry_and_definiteness(g, eps, "eps", &mut checks);
    let lm = symmetry_and_definiteness(g, mu, "mu", &mut checks);
    let alpha = le.min(lm);
    checks.push(CheckOutcome {
        name: "alpha_positive".into(),
        passed: alpha > 0.0,
        value: alpha,
        location: None,
    });
    MaterialReport {
        alpha: Some(alpha),
        lambda_max_eps: Some(eps.lambda_max),
        lambda_max_mu: Some(mu.lambda_max),
        checks,
        notes: vec![BOX_NOTE.to_string()],
        ..Default::default()
    }
}

/// Per-axis derivative of a cell tensor field: central inside, one-sided second order at the outer layers.
fn axis_derivatives(g: &YeeGrid, t: &TensorField) -> [Vec<Mat3>; 3] {
    let s = g.cell_shape;
    std::array::from_fn(|a| {
        let n = g.n[a];
        let h = g.h[a];
        s.iter()
            .map(|p| {
                let at = |k: usize| {
                    let mut q = p;
                    q[a] = k;
                    t.values[s.idx(q)]
                };
                let i = p[a];
                if i == 0 {
                    (at(1) * 4.0 - at(0) * 3.0 - at(2)) / (2.0 * h)
                } else if i == n - 1 {
                    (at(n - 1) * 3.0 - at(n - 2) * 4.0 + at(n - 3)) / (2.0 * h)
                } else {
                    (at(i + 1) - at(i - 1)) / (2.0 * h)
                }
            })
            .collect()
    })
}

/// `1 + min eig(L^-1 D L^-T)` with `A = L L^T`, i.e. the largest `d` with `A + D - d A >= 0`.
fn generalized_floor(a: &Mat3, d: &Mat3) -> Option<f64> {
    let a = (a + a.transpose()) * 0.5;
    let d = (d + d.transpose()) * 0.5;
    let l = Cholesky::new(a)?.l();
    let li = l.try_inverse()?;
    let m = li * d * li.transpose();
    let m = (m + m.transpose()) * 0.5;
    Some(1.0 + SymmetricEigen::new(m).eigenvalues.min())
}

fn directional(grads: &[Vec<Mat3>; 3], i: usize, m: &Vec3) -> Mat3 {
    grads[0][i] * m[0] + grads[1][i] * m[1] + grads[2][i] * m[2]
}

fn floor_of_field(g: &YeeGrid, t: &TensorField, mf: &MultiplierField) -> (f64, Option<Vec3>) {
    let grads = axis_derivatives(g, t);
    let s = g.cell_shape;
    let mut worst = (f64::INFINITY, None);
    let mut consider = |v: Option<f64>, x: Vec3| {
        let v = v.unwrap_or(f64::NEG_INFINITY);
        if v < worst.0 {
            worst = (v, Some(x));
        }
    };
    for (i, p) in s.iter().enumerate() {
        let dm = directional(&grads, i, &mf.at_cells[i]);
        consider(generalized_floor(&t.values[i], &dm), g.cell_center(p));
    }
    // closure of the box: linear extrapolation from the two innermost cell layers to each boundary face
    for (smp, m) in g.samples.iter().zip(&mf.at_samples) {
        let c0 = smp.cell;
        let mut c1 = c0;
        c1[smp.axis] = if c0[smp.axis] == 0 {
            1
        } else {
            c0[smp.axis] - 1
        };
        let (i0, i1) = (s.idx(c0), s.idx(c1));
        let a = t.values[i0] * 1.5 - t.values[i1] * 0.5;
        let dm = directional(&grads, i0, m) * 1.5 - directional(&grads, i1, m) * 0.5;
        if let Some(v) = generalized_floor(&a, &dm) {
            if v < worst.0 {
                worst = (v, Some(smp.position));
            }
        }
    }
    worst
}

/// The constant `d1` of `A + (m . grad) A >= d1 A` for both material fields, with `beta` and `m_sup`.
pub fn check_assumption_geometry(
    g: &YeeGrid,
    eps: &TensorField,
    mu: &TensorField,
    mf: &MultiplierField,
) -> MaterialReport {
    let (de, le) = floor_of_field(g, eps, mf);
    let (dm, lm) = floor_of_field(g, mu, mf);
    let (d1, loc) = if de <= dm { (de, le) } else { (dm, lm) };
    let checks = vec![
        CheckOutcome {
            name: "d1_positive".into(),
            passed: d1 > 0.0,
            value: d1,
            location: loc,
        },
        CheckOutcome {
            name: "beta_positive".into(),
            passed: mf.beta > 0.0,
            value: mf.beta,
            location: None,
        },
    ];
    MaterialReport {
        d1: Some(d1),
        beta: Some(mf.beta),
        m_sup: Some(mf.m_sup),
        checks,
        notes: vec![BOX_NOTE.to_string()],
        ..Default::default()
    }
}
