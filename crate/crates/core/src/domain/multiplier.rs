use super::grid::{Vec3, YeeGrid};
use crate::error::{Error, Result};

/// `m(x) = x - x0` sampled on the boundary and at cell centers.
#[derive(Debug, Clone)]
pub struct MultiplierField {
    pub center: Vec3,
    pub at_samples: Vec<Vec3>,
    pub at_cells: Vec<Vec3>,
    /// `min m . nu` over the boundary samples.
    pub beta: f64,
    /// `max |m|` over the closed box (attained at a corner).
    pub m_sup: f64,
}

pub fn multiplier_field(g: &YeeGrid, x0: [f64; 3]) -> Result<MultiplierField> {
    let l = g.domain.lengths;
    for a in 0..3 {
        if !(x0[a] > 0.0 && x0[a] < l[a]) {
            return Err(Error::Geometry(format!(
                "star center {x0:?} is not strictly inside the box; m . nu would vanish on a face"
            )));
        }
    }
    let center = Vec3::from(x0);
    let at_samples: Vec<Vec3> = g.samples.iter().map(|s| s.position - center).collect();
    let at_cells = g
        .cell_shape
        .iter()
        .map(|p| g.cell_center(p) - center)
        .collect();
    let beta = g
        .samples
        .iter()
        .zip(&at_samples)
        .map(|(s, m)| m.dot(&s.normal))
        .fold(f64::INFINITY, f64::min);
    let mut m_sup: f64 = 0.0;
    for c in 0..8 {
        let corner = Vec3::from_fn(|a, _| if (c >> a) & 1 == 1 { l[a] } else { 0.0 });
        m_sup = m_sup.max((corner - center).norm());
    }
    if beta <= 0.0 {
        return Err(Error::Geometry(format!("beta = {beta} is not positive")));
    }
    Ok(MultiplierField {
        center,
        at_samples,
        at_cells,
        beta,
        m_sup,
    })
}
