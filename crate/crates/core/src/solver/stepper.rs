use crate::delay_line::DelayRing;
use crate::domain::stencil::{curl_e, curl_e_transpose, trace, trace_transpose};
use crate::domain::{EdgeField, FaceField, MaterialMass, Vec3, YeeGrid};
use crate::error::{Error, Result};
use crate::feedback::{implicit_boundary_update, FeedbackLaw};

use super::EMState;

/// How the boundary relation is placed in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// Relation imposed at the time-centered trace `(w^n + w^{n+1})/2`.
    Implicit,
    /// Relation evaluated at the previous trace `w^n`.
    ExplicitLag,
}

/// Relative tolerance of the per-sample solves, scaled by the step's trace magnitude.
const LOCAL_REL_TOL: f64 = 1e-14;
/// Relative tolerance of the sweep over coupled samples, scaled by the load magnitude.
const COUPLING_REL_TOL: f64 = 1e-13;
const COUPLING_MAX_SWEEPS: usize = 500;

/// Leapfrog stepper; keeps the last boundary load as a warm start.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub dt: f64,
    pub closure: Closure,
    /// Per sample and axis: trace response to a unit load, divided by `dt`.
    metrics: Vec<Vec3>,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
    h_trace: Vec<Vec3>,
    /// `sum a (gamma1 g + gamma2 g) . w_mid` of the last step.
    pub last_work: f64,
    pub last_sweeps: usize,
}

/// `w = E_t x nu` for every sample.
pub fn tangential_trace(g: &YeeGrid, e: &EdgeField) -> Vec<Vec3> {
    trace(g, e)
        .iter()
        .zip(&g.samples)
        .map(|(t, s)| t.cross(&s.normal))
        .collect()
}

/// `K H / w_e = C^T (w_f H) / w_e`: the edge-sited weighted curl of a face field.
pub fn curl_h_interior(g: &YeeGrid, h: &FaceField) -> EdgeField {
    let mut wh = h.clone();
    for d in 0..3 {
        for (v, w) in wh.c[d].iter_mut().zip(&g.face_volume[d]) {
            *v *= w;
        }
    }
    let mut r = curl_e_transpose(g, &wh);
    for d in 0..3 {
        for (v, w) in r.c[d].iter_mut().zip(&g.edge_volume[d]) {
            *v /= w;
        }
    }
    r
}

impl Stepper {
    pub fn new(g: &YeeGrid, mass: &MaterialMass, dt: f64, closure: Closure) -> Self {
        let metrics = g
            .samples
            .iter()
            .map(|s| {
                let mut m = Vec3::zeros();
                for &(t, [a, b]) in &s.edges {
                    m[t] = 0.25 * s.area * (mass.edge_load_gain[t][a] + mass.edge_load_gain[t][b]);
                }
                m
            })
            .collect();
        Stepper {
            dt,
            closure,
            metrics,
            normals: g.samples.iter().map(|s| s.normal).collect(),
            areas: g.samples.iter().map(|s| s.area).collect(),
            h_trace: vec![Vec3::zeros(); g.samples.len()],
            last_work: 0.0,
            last_sweeps: 0,
        }
    }

    /// `H^{1/2} = H^0 - dt/2 mu^-1 curl E^0`.
    pub fn bootstrap(
        &self,
        g: &YeeGrid,
        mass: &MaterialMass,
        e0: &EdgeField,
        h0: &FaceField,
    ) -> FaceField {
        let mut h = h0.clone();
        h.axpy(-0.5 * self.dt, &mass.mu_inverse(g, &curl_e(g, e0)));
        h
    }

    /// `H^{n-1/2}` recovered from the state.
    pub fn previous_h(&self, g: &YeeGrid, mass: &MaterialMass, state: &EMState) -> FaceField {
        let mut h = state.h.clone();
        h.axpy(self.dt, &mass.mu_inverse(g, &curl_e(g, &state.e)));
        h
    }

    /// Edge increment `gain o T^T(a h)` of a boundary H-trace.
    fn boundary_load(&self, g: &YeeGrid, mass: &MaterialMass, h: &[Vec3]) -> EdgeField {
        let ah: Vec<Vec3> = h.iter().zip(&self.areas).map(|(v, a)| v * *a).collect();
        let mut l = trace_transpose(g, &ah);
        for d in 0..3 {
            for (v, k) in l.c[d].iter_mut().zip(&mass.edge_load_gain[d]) {
                *v *= k;
            }
        }
        l
    }

    pub fn step(
        &mut self,
        g: &YeeGrid,
        mass: &MaterialMass,
        law: &FeedbackLaw,
        state: &mut EMState,
        ring: &mut DelayRing,
    ) -> Result<()> {
        let dt = self.dt;
        let mut e_new = state.e.clone();
        e_new.axpy(dt, &mass.eps_inverse(g, &curl_h_interior(g, &state.h)));

        let w_old = tangential_trace(g, &state.e);
        let n = ring.depth();
        let z_bar: Vec<Vec3> = ring
            .slot(n - 1)
            .iter()
            .zip(ring.slot(n))
            .map(|(a, b)| (a + b) * 0.5)
            .collect();

        self.last_work = 0.0;
        self.last_sweeps = 0;
        if !law.is_pmc() {
            let h = match self.closure {
                Closure::ExplicitLag => w_old
                    .iter()
                    .zip(&z_bar)
                    .zip(&self.normals)
                    .map(|((w, z), nu)| -law.load(w, z).cross(nu))
                    .collect(),
                Closure::Implicit => {
                    let (h, sweeps) = self.coupled_solve(g, mass, law, &e_new, &w_old, &z_bar)?;
                    self.last_sweeps = sweeps;
                    h
                }
            };
            e_new.axpy(-dt, &self.boundary_load(g, mass, &h));
            let w_new = tangential_trace(g, &e_new);
            for s in 0..h.len() {
                let w_mid = (w_old[s] + w_new[s]) * 0.5;
                // h = -f x nu, so f . w = (nu x h) . w
                self.last_work += self.areas[s] * self.normals[s].cross(&h[s]).dot(&w_mid);
            }
            self.h_trace = h;
        }

        let mut h_next = state.h.clone();
        h_next.axpy(-dt, &mass.mu_inverse(g, &curl_e(g, &e_new)));
        state.e = e_new;
        state.h = h_next;
        state.step += 1;
        state.time = state.step as f64 * dt;
        if !state.all_finite() {
            return Err(Error::Numerical(format!(
                "non-finite field at step {} (t = {:.6e})",
                state.step, state.time
            )));
        }
        ring.advance(&tangential_trace(g, &state.e))?;
        Ok(())
    }

    /// Jacobi sweeps over samples until the boundary loads of neighbouring samples agree.
    fn coupled_solve(
        &self,
        g: &YeeGrid,
        mass: &MaterialMass,
        law: &FeedbackLaw,
        predictor: &EdgeField,
        w_old: &[Vec3],
        z_bar: &[Vec3],
    ) -> Result<(Vec<Vec3>, usize)> {
        let dt = self.dt;
        let base = trace(g, predictor);
        let scale = base
            .iter()
            .chain(w_old)
            .chain(z_bar)
            .fold(0.0f64, |m, v| m.max(v.amax()));
        if scale == 0.0 {
            return Ok((vec![Vec3::zeros(); w_old.len()], 0));
        }
        let local_tol = (LOCAL_REL_TOL * scale).max(f64::MIN_POSITIVE);
        let mut h = self.h_trace.clone();
        for sweep in 1..=COUPLING_MAX_SWEEPS {
            let load = self.boundary_load(g, mass, &h);
            let shift = trace(g, &load);
            let mut next = Vec::with_capacity(h.len());
            let mut delta: f64 = 0.0;
            let mut hmax: f64 = 0.0;
            for s in 0..h.len() {
                let nu = &self.normals[s];
                let sigma = self.metrics[s] * dt;
                let own = base[s] - shift[s] * dt + sigma.component_mul(&h[s]);
                let w_pred = own.cross(nu);
                let sol = implicit_boundary_update(
                    law,
                    &w_pred,
                    &w_old[s],
                    &z_bar[s],
                    nu,
                    dt,
                    &self.metrics[s],
                    local_tol,
                )
                .map_err(|e| Error::Numerical(format!("boundary sample {s}: {e}")))?;
                let hn = -law.load(&sol.w_mid, &z_bar[s]).cross(nu);
                delta = delta.max((hn - h[s]).amax());
                hmax = hmax.max(hn.amax());
                next.push(hn);
            }
            h = next;
            if delta <= COUPLING_REL_TOL * hmax || hmax == 0.0 {
                return Ok((h, sweep));
            }
        }
        Err(Error::Numerical(format!(
            "coupled boundary closure did not settle in {COUPLING_MAX_SWEEPS} sweeps"
        )))
    }
}
