//! Stationary study of the extended generator on `(E, H, Z)`: the shifted monotonicity pairing,
//! the resolvent, the `W_eps` norm and the discrete Green identity.
//!
//! `Z[j][s]` holds the delay profile at node `s_j = j/M` of boundary sample `s`. The boundary
//! H-trace (the role of `H x nu`) is not stored: it is read from the boundary relation
//! `h = -(gamma1 g(Z(0)) + gamma2 g(Z(1))) x nu`.

mod monotonicity;
mod resolvent;

use rand::Rng;

use crate::domain::stencil::{curl_e, curl_e_transpose, trace, trace_transpose};
use crate::domain::{
    build_grid, BoxDomain, EdgeField, FaceField, MaterialMass, TensorField, Vec3, YeeGrid,
};
use crate::error::{Error, Result};
use crate::feedback::FeedbackLaw;
use crate::solver::projection::div_eps;

pub use monotonicity::{
    monotonicity_test, monotonicity_test_family, MonotonicityReport, PairFamily, PairRow,
};
pub use resolvent::{
    form_apply, resolvent_solve, ResolventOutcome, RESOLVENT_MAX_OUTER, RESOLVENT_TOL,
};

pub const DEFAULT_S_NODES: usize = 16;
/// Smallest admissible normalized pairing.
pub const MONOTONICITY_TOL: f64 = 1e-10;
/// Tolerance of the domain constraints, relative to the state's magnitude.
pub const CONSTRUCTION_TOL: f64 = 1e-12;

/// Constants of the shifted monotonicity argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConstants {
    /// Weight of the delay part of the inner product; `< 2 gamma1 c1`.
    pub xi_op: f64,
    /// Exponent `c` of the `e^{c s}` weight.
    pub c_weight: f64,
    /// Shift `C > c/(2 tau)`.
    pub c_shift: f64,
}

/// `xi = gamma1 c1`, the smallest `c >= 0` with `2 sqrt((gamma1 c1 - xi/2) xi e^c / 2) >= gamma2 c2`,
/// and `C = c/(2 tau) + 1`.
pub fn generator_constants(
    gamma1: f64,
    gamma2: f64,
    c1: f64,
    c2: f64,
    tau: f64,
) -> Result<GeneratorConstants> {
    if !(gamma1 * c1 > 0.0) {
        return Err(Error::Config(format!(
            "gamma1 c1 = {} must be positive",
            gamma1 * c1
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::Config(format!("tau = {tau} must be positive")));
    }
    let xi_op = gamma1 * c1;
    let base = 2.0 * ((gamma1 * c1 - xi_op / 2.0) * xi_op / 2.0).sqrt();
    let c_weight = if gamma2 * c2 > 0.0 {
        (2.0 * (gamma2 * c2 / base).ln()).max(0.0)
    } else {
        0.0
    };
    Ok(GeneratorConstants {
        xi_op,
        c_weight,
        c_shift: c_weight / (2.0 * tau) + 1.0,
    })
}

/// Element of the extended phase space (or data of the same shape).
#[derive(Debug, Clone, PartialEq)]
pub struct ExtState {
    pub e: EdgeField,
    pub h: FaceField,
    /// `z[j][sample]` for `j = 0..=M`.
    pub z: Vec<Vec<Vec3>>,
}

impl ExtState {
    pub fn axpy(&mut self, a: f64, x: &ExtState) {
        self.e.axpy(a, &x.e);
        self.h.axpy(a, &x.h);
        for (zr, xr) in self.z.iter_mut().zip(&x.z) {
            for (z, v) in zr.iter_mut().zip(xr) {
                *z += v * a;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.z
            .iter()
            .flatten()
            .fold(self.e.max_abs().max(self.h.max_abs()), |m, v| {
                m.max(v.amax())
            })
    }
}

/// Grid, diagonal material masses, feedback law and the s-grid of the stationary study.
#[derive(Debug, Clone)]
pub struct OperatorLab {
    pub grid: YeeGrid,
    pub mass: MaterialMass,
    pub law: FeedbackLaw,
    /// Number of s-intervals `M`.
    pub m: usize,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
    mu_min: f64,
}

/// Random vector in `[-scale, scale]^3` with the normal component removed.
fn random_tangential(rng: &mut impl Rng, nu: &Vec3, scale: f64) -> Vec3 {
    let v = Vec3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ) * scale;
    v - nu * v.dot(nu)
}

fn random_staggered(rng: &mut impl Rng, like: &EdgeField) -> EdgeField {
    let mut f = like.zeros_like();
    for d in 0..3 {
        for v in f.c[d].iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    f
}

impl OperatorLab {
    /// Requires diagonal tensors so that the mass matrices are exactly symmetric.
    pub fn new(
        grid: YeeGrid,
        eps: &TensorField,
        mu: &TensorField,
        law: FeedbackLaw,
        m: usize,
    ) -> Result<Self> {
        if m < 3 {
            return Err(Error::Config(format!(
                "the s-grid needs at least 3 intervals (got {m})"
            )));
        }
        if !(eps.diagonal && mu.diagonal) {
            return Err(Error::Config(
                "the operator study supports diagonal material tensors only".into(),
            ));
        }
        let mass = MaterialMass::new(&grid, eps, mu);
        let normals = grid.samples.iter().map(|s| s.normal).collect();
        let areas = grid.samples.iter().map(|s| s.area).collect();
        Ok(OperatorLab {
            mass,
            law,
            m,
            normals,
            areas,
            mu_min: mu.lambda_min,
            grid,
        })
    }

    /// Unit cube with identity materials.
    pub fn unit_cube(n: usize, law: FeedbackLaw, m: usize) -> Result<Self> {
        let grid = build_grid(&BoxDomain::unit_cube(n))?;
        let id = TensorField::identity(&grid);
        Self::new(grid, &id, &id, law, m)
    }

    pub fn samples(&self) -> usize {
        self.normals.len()
    }

    pub fn s_nodes(&self) -> Vec<f64> {
        (0..=self.m).map(|j| j as f64 / self.m as f64).collect()
    }

    /// Trapezoid weights on the s-grid.
    pub fn s_weights(&self) -> Vec<f64> {
        let h = 1.0 / self.m as f64;
        (0..=self.m)
            .map(|j| if j == 0 || j == self.m { 0.5 * h } else { h })
            .collect()
    }

    pub fn zeros(&self) -> ExtState {
        ExtState {
            e: EdgeField::zeros_edges(&self.grid),
            h: FaceField::zeros_faces(&self.grid),
            z: vec![vec![Vec3::zeros(); self.samples()]; self.m + 1],
        }
    }

    /// `E x nu` at every sample.
    pub fn tangential_trace(&self, e: &EdgeField) -> Vec<Vec3> {
        trace(&self.grid, e)
            .iter()
            .zip(&self.normals)
            .map(|(t, nu)| t.cross(nu))
            .collect()
    }

    /// `H x nu` required by the boundary relation.
    pub fn boundary_h(&self, z0: &[Vec3], z1: &[Vec3]) -> Vec<Vec3> {
        z0.iter()
            .zip(z1)
            .zip(&self.normals)
            .map(|((a, b), nu)| -self.law.load(a, b).cross(nu))
            .collect()
    }

    /// Checks tangential `Z` and `Z(0) = E x nu`.
    pub fn check_domain(&self, v: &ExtState) -> Result<()> {
        if v.z.len() != self.m + 1 || v.z.iter().any(|r| r.len() != self.samples()) {
            return Err(Error::Contract(format!(
                "Z must hold {} nodes of {} samples",
                self.m + 1,
                self.samples()
            )));
        }
        let tol = CONSTRUCTION_TOL * v.max_abs().max(1.0);
        for (j, row) in v.z.iter().enumerate() {
            for (s, (z, nu)) in row.iter().zip(&self.normals).enumerate() {
                if z.dot(nu).abs() > tol {
                    return Err(Error::Contract(format!(
                        "Z is not tangential at node {j}, sample {s}"
                    )));
                }
            }
        }
        for (s, (w, z)) in self.tangential_trace(&v.e).iter().zip(&v.z[0]).enumerate() {
            if (w - z).amax() > tol {
                return Err(Error::Contract(format!(
                    "Z(0) differs from E x nu at sample {s} by {:e}",
                    (w - z).amax()
                )));
            }
        }
        Ok(())
    }

    /// Discrete `d/ds`: forward three-point at the first two nodes, backward three-point elsewhere.
    pub fn ds(&self, z: &[Vec<Vec3>]) -> Vec<Vec<Vec3>> {
        let m = self.m;
        let inv = m as f64 / 2.0;
        (0..=m)
            .map(|j| {
                (0..self.samples())
                    .map(|s| {
                        if j < 2 {
                            (z[j + 1][s] * 4.0 - z[j][s] * 3.0 - z[j + 2][s]) * inv
                        } else {
                            (z[j][s] * 3.0 - z[j - 1][s] * 4.0 + z[j - 2][s]) * inv
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Edge field `(K H - T^T(a h)) / w_e`: the curl of `H` closed by the boundary trace `h`.
    pub fn curl_h(&self, h: &FaceField, h_trace: &[Vec3]) -> EdgeField {
        let g = &self.grid;
        let mut wh = h.clone();
        for d in 0..3 {
            for (v, w) in wh.c[d].iter_mut().zip(&g.face_volume[d]) {
                *v *= w;
            }
        }
        let mut r = curl_e_transpose(g, &wh);
        let ah: Vec<Vec3> = h_trace
            .iter()
            .zip(&self.areas)
            .map(|(v, a)| v * *a)
            .collect();
        r.axpy(-1.0, &trace_transpose(g, &ah));
        for d in 0..3 {
            for (v, w) in r.c[d].iter_mut().zip(&g.edge_volume[d]) {
                *v /= w;
            }
        }
        r
    }

    /// `(-eps^-1 curl_h H, mu^-1 curl E, tau^-1 dZ/ds)` with the trace read from the relation.
    pub fn apply_generator(&self, v: &ExtState) -> Result<ExtState> {
        self.check_domain(v)?;
        Ok(self.generator_unchecked(v))
    }

    fn generator_unchecked(&self, v: &ExtState) -> ExtState {
        let g = &self.grid;
        let h_trace = self.boundary_h(&v.z[0], &v.z[self.m]);
        let mut e = self.mass.eps_inverse(g, &self.curl_h(&v.h, &h_trace));
        e.scale(-1.0);
        let h = self.mass.mu_inverse(g, &curl_e(g, &v.e));
        let inv_tau = 1.0 / self.law.tau;
        let z = self
            .ds(&v.z)
            .into_iter()
            .map(|r| r.into_iter().map(|x| x * inv_tau).collect())
            .collect();
        ExtState { e, h, z }
    }

    /// `sum eps E.E' w_e + sum mu H.H' w_f + xi tau sum a sum_j q_j e^{c s_j} Z_j.Z'_j`.
    pub fn inner(&self, k: &GeneratorConstants, a: &ExtState, b: &ExtState) -> f64 {
        let g = &self.grid;
        let field = self.mass.eps_pairing(g, &a.e, &b.e) + self.mass.mu_pairing(g, &a.h, &b.h);
        let q = self.s_weights();
        let s = self.s_nodes();
        let mut delay = 0.0;
        for j in 0..=self.m {
            let wj = q[j] * (k.c_weight * s[j]).exp();
            let row: f64 = a.z[j]
                .iter()
                .zip(&b.z[j])
                .zip(&self.areas)
                .map(|((x, y), ar)| ar * x.dot(y))
                .sum();
            delay += wj * row;
        }
        field + k.xi_op * self.law.tau * delay
    }

    /// Random domain element: free fields, `Z(0) = E x nu`, random far end and smooth interior modes.
    pub fn random_element(&self, rng: &mut impl Rng) -> ExtState {
        let e = random_staggered(rng, &EdgeField::zeros_edges(&self.grid));
        let h = random_staggered(rng, &FaceField::zeros_faces(&self.grid));
        let w0 = self.tangential_trace(&e);
        let z = self.smooth_profile(rng, &w0);
        ExtState { e, h, z }
    }

    /// Random element whose tangential trace vanishes and whose history is `sum_k r_k sin(k pi s)`.
    /// Both endpoints of the history are zero, so only the interior transport term remains.
    pub fn random_trace_free_element(&self, rng: &mut impl Rng) -> ExtState {
        let mut e = random_staggered(rng, &EdgeField::zeros_edges(&self.grid));
        for smp in &self.grid.samples {
            for &(axis, ids) in &smp.edges {
                for id in ids {
                    e.c[axis][id] = 0.0;
                }
            }
        }
        let h = random_staggered(rng, &FaceField::zeros_faces(&self.grid));
        let s = self.s_nodes();
        let mut z = vec![vec![Vec3::zeros(); self.samples()]; self.m + 1];
        for (i, nu) in self.normals.iter().enumerate() {
            let modes: Vec<Vec3> = (1..=3)
                .map(|k| random_tangential(rng, nu, 1.0 / k as f64))
                .collect();
            for (j, sj) in s.iter().enumerate() {
                z[j][i] = modes
                    .iter()
                    .enumerate()
                    .map(|(k, r)| r * ((k + 1) as f64 * std::f64::consts::PI * sj).sin())
                    .sum();
            }
        }
        ExtState { e, h, z }
    }

    /// `(1-s) w0 + s w1 + sum_k r_k sin(k pi s)` with random tangential `w1` and `r_k`.
    fn smooth_profile(&self, rng: &mut impl Rng, w0: &[Vec3]) -> Vec<Vec<Vec3>> {
        let s = self.s_nodes();
        let mut z = vec![vec![Vec3::zeros(); self.samples()]; self.m + 1];
        for (i, nu) in self.normals.iter().enumerate() {
            let w1 = random_tangential(rng, nu, 1.0);
            let modes: Vec<Vec3> = (1..=3)
                .map(|k| random_tangential(rng, nu, 1.0 / k as f64))
                .collect();
            for (j, sj) in s.iter().enumerate() {
                let mut v = w0[i] * (1.0 - sj) + w1 * *sj;
                for (k, r) in modes.iter().enumerate() {
                    v += r * ((k + 1) as f64 * std::f64::consts::PI * sj).sin();
                }
                z[j][i] = v;
            }
        }
        z
    }

    /// Random resolvent data: divergence-free `F1 = eps^-1 K Phi / w_e`, `F2 = mu^-1 curl Psi`, smooth `F3`.
    pub fn random_data(&self, rng: &mut impl Rng) -> ExtState {
        let g = &self.grid;
        let phi = random_staggered(rng, &FaceField::zeros_faces(g));
        let psi = random_staggered(rng, &EdgeField::zeros_edges(g));
        let no_trace = vec![Vec3::zeros(); self.samples()];
        let e = self.mass.eps_inverse(g, &self.curl_h(&phi, &no_trace));
        let h = self.mass.mu_inverse(g, &curl_e(g, &psi));
        let start: Vec<Vec3> = self
            .normals
            .iter()
            .map(|nu| random_tangential(rng, nu, 1.0))
            .collect();
        let z = self.smooth_profile(rng, &start);
        ExtState { e, h, z }
    }

    /// Squared `W_eps` norm: `sum |E|^2 + |curl E|^2 + |div(eps E)|^2` (interior nodes) `+ sum_boundary |E x nu|^2`.
    pub fn wepsilon_norm_sq(&self, e: &EdgeField) -> f64 {
        let g = &self.grid;
        let l2 = e.weighted_dot(e, &g.edge_volume);
        let c = curl_e(g, e);
        let curl = c.weighted_dot(&c, &g.face_volume);
        let div: f64 = div_eps(g, &self.mass, e)
            .iter()
            .zip(g.node_shape.iter())
            .zip(&g.node_volume)
            .filter(|((_, p), _)| g.is_interior_node(*p))
            .map(|((d, _), w)| w * d * d)
            .sum();
        let bdry: f64 = self
            .tangential_trace(e)
            .iter()
            .zip(&self.areas)
            .map(|(w, a)| a * w.norm_squared())
            .sum();
        l2 + curl + div + bdry
    }

    /// `|sum w_f curl E . H - sum w_e E . curl_h H - sum a h . E_t|`, relative to the sum of the magnitudes.
    pub fn green_residual(&self, e: &EdgeField, h: &FaceField, h_trace: &[Vec3]) -> f64 {
        let g = &self.grid;
        let a = curl_e(g, e).weighted_dot(h, &g.face_volume);
        let b = self.curl_h(h, h_trace).weighted_dot(e, &g.edge_volume);
        let c: f64 = trace(g, e)
            .iter()
            .zip(h_trace)
            .zip(&self.areas)
            .map(|((t, v), ar)| ar * v.dot(t))
            .sum();
        let scale = a.abs() + b.abs() + c.abs();
        if scale == 0.0 {
            0.0
        } else {
            (a - b - c).abs() / scale
        }
    }

    /// Random tangential boundary trace.
    pub fn random_trace(&self, rng: &mut impl Rng) -> Vec<Vec3> {
        self.normals
            .iter()
            .map(|nu| random_tangential(rng, nu, 1.0))
            .collect()
    }

    /// Random edge and face fields.
    pub fn random_fields(&self, rng: &mut impl Rng) -> (EdgeField, FaceField) {
        (
            random_staggered(rng, &EdgeField::zeros_edges(&self.grid)),
            random_staggered(rng, &FaceField::zeros_faces(&self.grid)),
        )
    }

    pub(crate) fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub(crate) fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub(crate) fn mu_min(&self) -> f64 {
        self.mu_min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lab(n: usize) -> OperatorLab {
        OperatorLab::unit_cube(
            n,
            FeedbackLaw::linear(1.0, 1.0, 0.5, 0.25).unwrap(),
            DEFAULT_S_NODES,
        )
        .unwrap()
    }

    #[test]
    fn constants_examples() {
        let k = generator_constants(1.0, 0.5, 1.0, 1.0, 0.25).unwrap();
        assert_eq!((k.xi_op, k.c_weight, k.c_shift), (1.0, 0.0, 1.0));
        let k = generator_constants(1.0, 2.0, 1.0, 1.0, 0.25).unwrap();
        assert!((k.c_weight - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((k.c_shift - (4.0 * 2f64.ln() + 1.0)).abs() < 1e-14);
        assert_eq!(
            generator_constants(1.0, 0.0, 1.0, 1.0, 0.25)
                .unwrap()
                .c_weight,
            0.0
        );
        assert!(generator_constants(0.0, 0.0, 1.0, 1.0, 0.25).is_err());
    }

    #[test]
    fn generator_of_zero_is_zero() {
        let l = lab(4);
        let img = l.apply_generator(&l.zeros()).unwrap();
        assert_eq!(img.max_abs(), 0.0);
    }

    #[test]
    fn constant_field_has_no_interior_curl() {
        let l = lab(4);
        let mut v = l.zeros();
        for x in v.e.c[0].iter_mut() {
            *x = 1.0;
        }
        let w = l.tangential_trace(&v.e);
        for row in v.z.iter_mut() {
            row.copy_from_slice(&w);
        }
        let img = l.apply_generator(&v).unwrap();
        assert_eq!(img.h.max_abs(), 0.0);
        assert!(img.z.iter().flatten().all(|z| z.amax() < 1e-12));
    }

    #[test]
    fn manufactured_curl_on_a_face() {
        let l = lab(8);
        let g = &l.grid;
        let mut v = l.zeros();
        // E = (0, x^2, 0): curl E = (0, 0, 2x); the face stencil differentiates exactly on the lattice
        for (i, p) in g.edge_shape[1].iter().enumerate() {
            let x = g.edge_position(1, p)[0];
            v.e.c[1][i] = x * x;
        }
        v.z = vec![l.tangential_trace(&v.e); l.m + 1];
        let img = l.apply_generator(&v).unwrap();
        let p = [3, 4, 2];
        let i = g.face_shape[2].idx(p);
        let x = g.face_position(2, p)[0];
        let h = g.h[0];
        let hand = ((x + h / 2.0).powi(2) - (x - h / 2.0).powi(2)) / h;
        assert!((img.h.c[2][i] - hand).abs() < 1e-12);
    }

    #[test]
    fn domain_violation_is_a_contract_error() {
        let l = lab(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut v = l.random_element(&mut rng);
        let nu = l.normals[0];
        let along = if nu[0] != 0.0 {
            Vec3::new(0.0, 1e-3, 0.0)
        } else {
            Vec3::new(1e-3, 0.0, 0.0)
        };
        v.z[0][0] += along;
        assert!(matches!(l.apply_generator(&v), Err(Error::Contract(_))));
    }

    #[test]
    fn wepsilon_examples() {
        let l = lab(8);
        assert_eq!(l.wepsilon_norm_sq(&EdgeField::zeros_edges(&l.grid)), 0.0);
        let mut e = EdgeField::zeros_edges(&l.grid);
        for x in e.c[0].iter_mut() {
            *x = 1.0;
        }
        assert!((l.wepsilon_norm_sq(&e) - 5.0).abs() < 1e-12);
        let g = &l.grid;
        let psi: Vec<f64> = g
            .node_shape
            .iter()
            .map(|p| {
                let x = g.node_position(p);
                (x[0] * 2.0).sin() * x[1].cos() + x[2] * x[2]
            })
            .collect();
        let grad = crate::domain::stencil::grad(g, &psi);
        let c = curl_e(g, &grad);
        assert!(c.weighted_dot(&c, &g.face_volume) <= 1e-10);
    }

    #[test]
    fn green_identity_on_random_fields() {
        let l = lab(6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (e, h) = l.random_fields(&mut rng);
            let t = l.random_trace(&mut rng);
            assert!(l.green_residual(&e, &h, &t) <= 1e-12);
        }
    }
}
