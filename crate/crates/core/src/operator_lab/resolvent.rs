use super::{ExtState, OperatorLab};
use crate::domain::stencil::{
    curl_e, curl_e_transpose, grad, grad_transpose, trace, trace_transpose,
};
use crate::domain::{EdgeField, FaceField, Mat3, Vec3};
use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, norm};
use crate::solver::projection::div_eps;

/// Outer tolerance on the E-equation residual, relative to `max(1, |F|)`.
pub const RESOLVENT_TOL: f64 = 1e-10;
pub const RESOLVENT_MAX_OUTER: usize = 100;
/// Accepted interior mismatch of `div(eps E)` against `div(eps F1)/b`.
pub const PENALTY_DIV_TOL: f64 = 1e-8;
pub const PENALTY_MAX_DOUBLINGS: usize = 10;
const CG_REL_TOL: f64 = 1e-14;
const CG_MAX_ITER: usize = 20_000;
const MAX_HALVINGS: usize = 12;

/// Solution of `(b + A) V = F` with its residuals.
#[derive(Debug, Clone)]
pub struct ResolventOutcome {
    pub v: ExtState,
    /// Largest of the E, H and mild-form Z residuals.
    pub residual: f64,
    pub e_residual: f64,
    pub h_residual: f64,
    /// Mismatch of `Z` against the exact one-interval transport recursion with trapezoid sources.
    pub z_mild_residual: f64,
    /// `|b Z + tau^-1 dZ/ds - F3|` with the finite-difference `d/ds`; a discretization error, not a solver one.
    pub z_strong_residual: f64,
    pub outer_iterations: usize,
    pub history: Vec<f64>,
    pub penalty: f64,
    pub div_mismatch: f64,
}

struct Problem<'a> {
    lab: &'a OperatorLab,
    b: f64,
    /// `e^{-tau b}`
    decay: f64,
    /// Data part of `Z(1)` per sample.
    z_far: Vec<Vec3>,
    penalty: f64,
    /// `F1 / b`, the reference of the divergence penalty.
    e_ref: EdgeField,
    rhs: EdgeField,
}

fn scale_by(x: &mut EdgeField, w: &[Vec<f64>; 3], f: impl Fn(f64, f64) -> f64) {
    for d in 0..3 {
        for (v, m) in x.c[d].iter_mut().zip(&w[d]) {
            *v = f(*v, *m);
        }
    }
}

impl Problem<'_> {
    fn traces(&self, e: &EdgeField) -> Vec<Vec3> {
        self.lab.tangential_trace(e)
    }

    /// Boundary load `b T^T(a h(E))` with the trace from the relation.
    fn boundary(&self, e: &EdgeField) -> EdgeField {
        let lab = self.lab;
        let w = self.traces(e);
        let ah: Vec<Vec3> = w
            .iter()
            .zip(&self.z_far)
            .zip(lab.normals())
            .zip(lab.areas())
            .map(|(((w, zf), nu), a)| {
                -lab.law.load(w, &(w * self.decay + zf)).cross(nu) * (a * self.b)
            })
            .collect();
        trace_transpose(&lab.grid, &ah)
    }

    /// Symmetric part independent of the boundary: mass, curl-curl and the divergence penalty.
    fn interior(&self, x: &EdgeField) -> EdgeField {
        let lab = self.lab;
        let g = &lab.grid;
        let mut out = x.clone();
        scale_by(&mut out, &lab.mass.edge_mass, |v, m| {
            v * m * self.b * self.b
        });
        let mut c = lab.mass.mu_inverse(g, &curl_e(g, x));
        for d in 0..3 {
            for (v, w) in c.c[d].iter_mut().zip(&g.face_volume[d]) {
                *v *= w;
            }
        }
        out.axpy(1.0, &curl_e_transpose(g, &c));
        out.axpy(self.penalty, &self.penalty_term(x));
        out
    }

    /// `A G W^-1 G^T A x` on interior nodes.
    fn penalty_term(&self, x: &EdgeField) -> EdgeField {
        let g = &self.lab.grid;
        let mut ax = x.clone();
        scale_by(&mut ax, &self.lab.mass.edge_mass, |v, m| v * m);
        let mut nodal = grad_transpose(g, &ax);
        for ((v, p), w) in nodal
            .iter_mut()
            .zip(g.node_shape.iter())
            .zip(&g.node_volume)
        {
            *v = if g.is_interior_node(p) { *v / w } else { 0.0 };
        }
        let mut out = grad(g, &nodal);
        scale_by(&mut out, &self.lab.mass.edge_mass, |v, m| v * m);
        out
    }

    /// Full nonlinear residual `B(E) - rhs`.
    fn residual(&self, e: &EdgeField) -> EdgeField {
        let mut r = self.interior(e);
        // the penalty acts on the deviation from the data's divergence
        r.axpy(-self.penalty, &self.penalty_term(&self.e_ref));
        r.axpy(1.0, &self.boundary(e));
        r.axpy(-1.0, &self.rhs);
        r
    }

    /// Residual in generator units: `R / (b A)` per edge.
    fn scaled_max(&self, r: &EdgeField) -> f64 {
        let mut s = r.clone();
        scale_by(&mut s, &self.lab.mass.edge_mass, |v, m| v / (m * self.b));
        s.max_abs()
    }

    /// Per-sample boundary Jacobians `-Q (gamma1 g'(w) + gamma2 e^{-tau b} g'(Z1)) Q` with `Q x = x cross nu`.
    fn boundary_jacobians(&self, e: &EdgeField) -> Vec<Mat3> {
        let lab = self.lab;
        let (g1, g2) = (lab.law.gamma1, lab.law.gamma2);
        self.traces(e)
            .iter()
            .zip(&self.z_far)
            .zip(lab.normals())
            .zip(lab.areas())
            .map(|(((w, zf), nu), a)| {
                let mut j = lab.law.jacobian(w) * g1;
                if g2 != 0.0 {
                    j += lab.law.jacobian(&(w * self.decay + zf)) * (g2 * self.decay);
                }
                let q = nu.cross_matrix().transpose();
                -(q * j * q) * (a * self.b)
            })
            .collect()
    }

    fn linearized(&self, jac: &[Mat3], x: &EdgeField) -> EdgeField {
        let g = &self.lab.grid;
        let mut out = self.interior(x);
        let t = trace(g, x);
        let load: Vec<Vec3> = t.iter().zip(jac).map(|(v, j)| j * v).collect();
        out.axpy(1.0, &trace_transpose(g, &load));
        out
    }

    fn preconditioner(&self) -> Vec<f64> {
        let lab = self.lab;
        let g = &lab.grid;
        let mut d = EdgeField::zeros_edges(g);
        for a in 0..3 {
            let curl: f64 = (0..3)
                .filter(|&o| o != a)
                .map(|o| 2.0 / (g.h[o] * g.h[o]))
                .sum::<f64>()
                / lab.mu_min();
            for (i, v) in d.c[a].iter_mut().enumerate() {
                *v = self.b * self.b * lab.mass.edge_mass[a][i] + curl * g.edge_volume[a][i];
            }
        }
        d.to_flat()
    }

    fn newton(&self, e: &mut EdgeField, tol: f64, history: &mut Vec<f64>) -> Result<usize> {
        let diag = self.preconditioner();
        let mut r = self.residual(e);
        let mut res = self.scaled_max(&r);
        history.push(res);
        for it in 1..=RESOLVENT_MAX_OUTER {
            if res <= tol {
                return Ok(it - 1);
            }
            let jac = self.boundary_jacobians(e);
            let rhs: Vec<f64> = r.to_flat().iter().map(|v| -v).collect();
            let mut x = vec![0.0; rhs.len()];
            let apply = |p: &[f64], out: &mut [f64]| {
                let f = self.linearized(&jac, &e.from_flat_like(p));
                out.copy_from_slice(&f.to_flat());
            };
            let cg = conjugate_gradient(
                apply,
                Some(&diag),
                &rhs,
                &mut x,
                CG_REL_TOL * norm(&rhs),
                CG_MAX_ITER,
            );
            if !cg.converged && cg.residual > 1e-8 * norm(&rhs) {
                return Err(Error::Numerical(format!(
                    "inner Krylov solve stalled at residual {:e} (outer history {history:?})",
                    cg.residual
                )));
            }
            let step = e.from_flat_like(&x);
            let mut theta = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let mut trial = e.clone();
                trial.axpy(theta, &step);
                let r_trial = self.residual(&trial);
                let res_trial = self.scaled_max(&r_trial);
                if res_trial < res || res_trial <= tol {
                    *e = trial;
                    r = r_trial;
                    res = res_trial;
                    accepted = true;
                    break;
                }
                theta *= 0.5;
            }
            history.push(res);
            if !accepted {
                return Err(Error::Numerical(format!(
                    "outer iteration stalled; residual history {history:?}"
                )));
            }
        }
        if res <= tol {
            return Ok(RESOLVENT_MAX_OUTER);
        }
        Err(Error::Numerical(format!(
            "outer iteration did not reach {tol:e} in {RESOLVENT_MAX_OUTER} iterations; residual history {history:?}"
        )))
    }
}

fn check_data(lab: &OperatorLab, f: &ExtState) -> Result<()> {
    if f.z.len() != lab.m + 1 || f.z.iter().any(|r| r.len() != lab.samples()) {
        return Err(Error::Contract(format!(
            "F3 must hold {} nodes of {} samples",
            lab.m + 1,
            lab.samples()
        )));
    }
    let finite = f.e.all_finite()
        && f.h.all_finite()
        && f.z
            .iter()
            .flatten()
            .all(|v| v.iter().all(|x| x.is_finite()));
    if !finite {
        return Err(Error::Contract("resolvent data is not finite".into()));
    }
    Ok(())
}

/// Solves `(b + A) V = F` by eliminating `H` and `Z` and iterating on the curl-curl problem for `E`.
pub fn resolvent_solve(lab: &OperatorLab, f: &ExtState, b: f64) -> Result<ResolventOutcome> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::Config(format!(
            "resolvent parameter b = {b} must be positive"
        )));
    }
    check_data(lab, f)?;
    let g = &lab.grid;
    let tau = lab.law.tau;
    let k = tau * b;
    let s = lab.s_nodes();
    let hs = 1.0 / lab.m as f64;

    // cumulative trapezoid of F3 e^{k r}
    let mut integral = vec![vec![Vec3::zeros(); lab.samples()]; lab.m + 1];
    for j in 1..=lab.m {
        let (a, c) = ((k * s[j - 1]).exp(), (k * s[j]).exp());
        for i in 0..lab.samples() {
            integral[j][i] = integral[j - 1][i] + (f.z[j - 1][i] * a + f.z[j][i] * c) * (0.5 * hs);
        }
    }
    let decay = (-k).exp();
    let z_far: Vec<Vec3> = integral[lab.m].iter().map(|v| v * (tau * decay)).collect();

    let mut rhs = f.e.clone();
    scale_by(&mut rhs, &lab.mass.edge_mass, |v, m| v * m * b);
    let mut wf2 = f.h.clone();
    for d in 0..3 {
        for (v, w) in wf2.c[d].iter_mut().zip(&g.face_volume[d]) {
            *v *= w;
        }
    }
    rhs.axpy(1.0, &curl_e_transpose(g, &wf2));
    let mut e_ref = f.e.clone();
    e_ref.scale(1.0 / b);

    let tol = RESOLVENT_TOL * f.max_abs().max(1.0);
    let div_ref = div_eps(g, &lab.mass, &e_ref);
    let mut penalty = 1.0;
    let mut history = Vec::new();
    let mut outer = 0;
    let mut e = EdgeField::zeros_edges(g);
    let mut div_mismatch = f64::INFINITY;
    for _ in 0..=PENALTY_MAX_DOUBLINGS {
        let problem = Problem {
            lab,
            b,
            decay,
            z_far: z_far.clone(),
            penalty,
            e_ref: e_ref.clone(),
            rhs: rhs.clone(),
        };
        outer += problem.newton(&mut e, tol, &mut history)?;
        div_mismatch = div_eps(g, &lab.mass, &e)
            .iter()
            .zip(&div_ref)
            .zip(g.node_shape.iter())
            .filter(|(_, p)| g.is_interior_node(*p))
            .fold(0.0, |m, ((a, r), _)| m.max((a - r).abs()));
        if div_mismatch <= PENALTY_DIV_TOL {
            break;
        }
        penalty *= 2.0;
    }
    if div_mismatch > PENALTY_DIV_TOL {
        return Err(Error::Numerical(format!(
            "divergence mismatch {div_mismatch:e} persists after {PENALTY_MAX_DOUBLINGS} penalty doublings"
        )));
    }

    // H by elimination, Z by the exponential formula
    let mut h: FaceField = f.h.clone();
    h.axpy(-1.0, &lab.mass.mu_inverse(g, &curl_e(g, &e)));
    h.scale(1.0 / b);
    let w = lab.tangential_trace(&e);
    let z: Vec<Vec<Vec3>> = (0..=lab.m)
        .map(|j| {
            let ej = (-k * s[j]).exp();
            w.iter()
                .zip(&integral[j])
                .map(|(w, i)| (w + i * tau) * ej)
                .collect()
        })
        .collect();
    let v = ExtState { e, h, z };

    let mut r = lab.generator_unchecked(&v);
    r.axpy(b, &v);
    r.axpy(-1.0, f);
    let e_residual = r.e.max_abs();
    let h_residual = r.h.max_abs();
    let z_strong_residual = r.z.iter().flatten().fold(0.0f64, |m, x| m.max(x.amax()));
    let step = (-k * hs).exp();
    let mut z_mild_residual: f64 = w
        .iter()
        .zip(&v.z[0])
        .fold(0.0, |m, (a, b)| m.max((a - b).amax()));
    for j in 1..=lab.m {
        for i in 0..lab.samples() {
            let expect =
                v.z[j - 1][i] * step + (f.z[j - 1][i] * step + f.z[j][i]) * (0.5 * hs * tau);
            z_mild_residual = z_mild_residual.max((v.z[j][i] - expect).amax());
        }
    }
    Ok(ResolventOutcome {
        residual: e_residual.max(h_residual).max(z_mild_residual),
        v,
        e_residual,
        h_residual,
        z_mild_residual,
        z_strong_residual,
        outer_iterations: outer,
        history,
        penalty,
        div_mismatch,
    })
}

/// `B E = b^2 A E + curl^T(mu^-1 curl E) + div penalty + b T^T(a h(E))` with zero delay data.
pub fn form_apply(lab: &OperatorLab, e: &EdgeField, b: f64) -> EdgeField {
    let problem = Problem {
        lab,
        b,
        decay: (-lab.law.tau * b).exp(),
        z_far: vec![Vec3::zeros(); lab.samples()],
        penalty: 1.0,
        e_ref: EdgeField::zeros_edges(&lab.grid),
        rhs: EdgeField::zeros_edges(&lab.grid),
    };
    problem.residual(e)
}
