use crate::domain::stencil::{grad, grad_transpose};
use crate::domain::{EdgeField, MaterialMass, YeeGrid};
use crate::error::{Error, Result};
use crate::linalg::conjugate_gradient;

/// Absolute bound on the interior nodal `div(eps E)` after projection.
pub const PROJECTION_TOL: f64 = 1e-10;

/// Nodal `div(eps E)`; boundary nodes carry the flux jump to the exterior.
pub fn div_eps(g: &YeeGrid, mass: &MaterialMass, e: &EdgeField) -> Vec<f64> {
    let mut flux = e.clone();
    for d in 0..3 {
        for (v, m) in flux.c[d].iter_mut().zip(&mass.edge_mass[d]) {
            *v *= m;
        }
    }
    grad_transpose(g, &flux)
        .iter()
        .zip(&g.node_volume)
        .map(|(v, w)| -v / w)
        .collect()
}

/// Largest `|div(eps E)|` over interior nodes.
pub fn interior_div_max(g: &YeeGrid, mass: &MaterialMass, e: &EdgeField) -> f64 {
    let div = div_eps(g, mass, e);
    g.node_shape
        .iter()
        .zip(&div)
        .filter(|(p, _)| g.is_interior_node(*p))
        .fold(0.0, |m, (_, v)| m.max(v.abs()))
}

/// Removes the discrete gradient part so that `div(eps E0) = 0` at interior nodes (`phi = 0` on the boundary).
pub fn project_div_free(g: &YeeGrid, mass: &MaterialMass, e_raw: &EdgeField) -> Result<EdgeField> {
    let ns = g.node_shape;
    let interior: Vec<usize> = ns
        .iter()
        .enumerate()
        .filter(|(_, p)| g.is_interior_node(*p))
        .map(|(i, _)| i)
        .collect();
    let expand = |x: &[f64]| {
        let mut phi = vec![0.0; ns.len()];
        for (k, &i) in interior.iter().enumerate() {
            phi[i] = x[k];
        }
        phi
    };
    let weighted_div = |e: &EdgeField| -> Vec<f64> {
        let mut flux = e.clone();
        for d in 0..3 {
            for (v, m) in flux.c[d].iter_mut().zip(&mass.edge_mass[d]) {
                *v *= m;
            }
        }
        let full = grad_transpose(g, &flux);
        interior.iter().map(|&i| full[i]).collect()
    };
    let apply = |x: &[f64], y: &mut [f64]| {
        let ge = grad(g, &expand(x));
        y.copy_from_slice(&weighted_div(&ge));
    };
    let rhs = weighted_div(e_raw);
    // diagonal of G^T A G
    let diag: Vec<f64> = interior
        .iter()
        .map(|&i| {
            let p = ns.coords(i);
            let mut s = 0.0;
            for d in 0..3 {
                let es = g.edge_shape[d];
                let mut lo = p;
                if p[d] > 0 {
                    lo[d] -= 1;
                    s += mass.edge_mass[d][es.idx(lo)] / (g.h[d] * g.h[d]);
                }
                if p[d] < g.n[d] {
                    s += mass.edge_mass[d][es.idx(p)] / (g.h[d] * g.h[d]);
                }
            }
            s
        })
        .collect();
    let rhs_norm = crate::linalg::norm(&rhs);
    if rhs_norm == 0.0 {
        return Ok(e_raw.clone());
    }
    let mut x = vec![0.0; interior.len()];
    let out = conjugate_gradient(
        apply,
        Some(&diag),
        &rhs,
        &mut x,
        1e-15 * rhs_norm,
        20 * interior.len() + 100,
    );
    let mut e0 = e_raw.clone();
    e0.axpy(-1.0, &grad(g, &expand(&x)));
    let div = interior_div_max(g, mass, &e0);
    if !out.converged && div > PROJECTION_TOL {
        return Err(Error::Numerical(format!(
            "divergence projection stalled after {} iterations (residual {:e}, max div {div:e})",
            out.iterations, out.residual
        )));
    }
    Ok(e0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, BoxDomain, MaterialPreset, TensorField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(preset: MaterialPreset) -> (YeeGrid, MaterialMass) {
        let g = build_grid(&BoxDomain::unit_cube(8)).unwrap();
        let eps = TensorField::from_preset(&g, &preset);
        let mm = MaterialMass::new(&g, &eps, &TensorField::identity(&g));
        (g, mm)
    }

    #[test]
    fn random_field_becomes_div_free_with_ramp() {
        let (g, mm) = setup(MaterialPreset::Ramp {
            base: [1.0; 3],
            slope: 1.0,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut e = EdgeField::zeros_edges(&g);
        e.c.iter_mut()
            .flatten()
            .for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let e0 = project_div_free(&g, &mm, &e).unwrap();
        assert!(interior_div_max(&g, &mm, &e0) <= PROJECTION_TOL);
        // idempotent
        let e1 = project_div_free(&g, &mm, &e0).unwrap();
        let mut d = e1.clone();
        d.axpy(-1.0, &e0);
        assert!(d.max_abs() <= 1e-10);
    }

    #[test]
    fn interior_gradients_are_removed() {
        let (g, mm) = setup(MaterialPreset::Isotropic(1.0));
        let psi: Vec<f64> = g
            .node_shape
            .iter()
            .map(|p| {
                if g.is_interior_node(p) {
                    let x = g.node_position(p);
                    (x[0] * 3.0).sin() * (x[1] + x[2]).cos()
                } else {
                    0.0
                }
            })
            .collect();
        let e0 = project_div_free(&g, &mm, &grad(&g, &psi)).unwrap();
        assert!(e0.max_abs() <= 1e-9, "{}", e0.max_abs());
    }
}
