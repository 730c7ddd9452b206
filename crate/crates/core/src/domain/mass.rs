use super::grid::{Shape, Vec3, YeeGrid};
use super::materials::{Mat3, TensorField};
use super::stencil::StaggeredField;

/// Material tensors averaged onto edges (eps) and faces (mu), with the derived diagonal masses.
#[derive(Debug, Clone)]
pub struct MaterialMass {
    /// `eps_dd` at each `d`-edge.
    pub eps_diag: [Vec<f64>; 3],
    /// `mu_dd` at each face normal to `d`.
    pub mu_diag: [Vec<f64>; 3],
    /// Edge mass `eps_dd * edge_volume`.
    pub edge_mass: [Vec<f64>; 3],
    /// Face mass `mu_dd * face_volume`.
    pub face_mass: [Vec<f64>; 3],
    /// Gain of a boundary load on an edge: `(eps^-1)_dd / edge_volume`.
    pub edge_load_gain: [Vec<f64>; 3],
    eps_full: Option<SiteTensors>,
    mu_full: Option<SiteTensors>,
}

#[derive(Debug, Clone)]
struct SiteTensors {
    tensor: [Vec<Mat3>; 3],
    inverse: [Vec<Mat3>; 3],
}

fn average_cells(
    g: &YeeGrid,
    t: &TensorField,
    shape: Shape,
    cells_of: impl Fn([usize; 3]) -> Vec<[usize; 3]>,
) -> Vec<Mat3> {
    shape
        .iter()
        .map(|p| {
            let cells = cells_of(p);
            let mut m = Mat3::zeros();
            for c in &cells {
                m += t.values[g.cell_shape.idx(*c)];
            }
            m / cells.len() as f64
        })
        .collect()
}

fn edge_cells(g: &YeeGrid, d: usize, p: [usize; 3]) -> Vec<[usize; 3]> {
    let (a, b) = ((d + 1) % 3, (d + 2) % 3);
    let mut out = Vec::with_capacity(4);
    for ia in [p[a].wrapping_sub(1), p[a]] {
        for ib in [p[b].wrapping_sub(1), p[b]] {
            if ia < g.n[a] && ib < g.n[b] {
                let mut c = p;
                c[a] = ia;
                c[b] = ib;
                out.push(c);
            }
        }
    }
    out
}

fn face_cells(g: &YeeGrid, d: usize, p: [usize; 3]) -> Vec<[usize; 3]> {
    [p[d].wrapping_sub(1), p[d]]
        .into_iter()
        .filter(|&i| i < g.n[d])
        .map(|i| {
            let mut c = p;
            c[d] = i;
            c
        })
        .collect()
}

/// Neighbours of site `p` of family `d` in family `q`, for staggering offsets `lo` (along `d`) and `hi` (along `q`).
fn neighbours(
    shape: Shape,
    p: [usize; 3],
    d: usize,
    q: usize,
    along_d: [isize; 2],
    along_q: [isize; 2],
) -> impl Iterator<Item = usize> {
    let mut out = [None; 4];
    let mut k = 0;
    for od in along_d {
        for oq in along_q {
            let mut off = [0isize; 3];
            off[d] = od;
            off[q] = oq;
            out[k] = shape.offset(p, off);
            k += 1;
        }
    }
    out.into_iter().flatten()
}

impl MaterialMass {
    pub fn new(g: &YeeGrid, eps: &TensorField, mu: &TensorField) -> Self {
        let eps_sites: [Vec<Mat3>; 3] = std::array::from_fn(|d| {
            average_cells(g, eps, g.edge_shape[d], |p| edge_cells(g, d, p))
        });
        let mu_sites: [Vec<Mat3>; 3] =
            std::array::from_fn(|d| average_cells(g, mu, g.face_shape[d], |p| face_cells(g, d, p)));
        let eps_diag: [Vec<f64>; 3] =
            std::array::from_fn(|d| eps_sites[d].iter().map(|m| m[(d, d)]).collect());
        let mu_diag: [Vec<f64>; 3] =
            std::array::from_fn(|d| mu_sites[d].iter().map(|m| m[(d, d)]).collect());
        let edge_mass = std::array::from_fn(|d| {
            eps_diag[d]
                .iter()
                .zip(&g.edge_volume[d])
                .map(|(e, w)| e * w)
                .collect()
        });
        let face_mass = std::array::from_fn(|d| {
            mu_diag[d]
                .iter()
                .zip(&g.face_volume[d])
                .map(|(e, w)| e * w)
                .collect()
        });
        let invert = |s: &[Vec<Mat3>; 3]| -> [Vec<Mat3>; 3] {
            std::array::from_fn(|d| {
                s[d].iter()
                    .map(|m| {
                        m.try_inverse()
                            .unwrap_or_else(|| Mat3::from_element(f64::NAN))
                    })
                    .collect()
            })
        };
        let eps_full = (!eps.diagonal).then(|| SiteTensors {
            inverse: invert(&eps_sites),
            tensor: eps_sites,
        });
        let mu_full = (!mu.diagonal).then(|| SiteTensors {
            inverse: invert(&mu_sites),
            tensor: mu_sites,
        });
        let edge_load_gain = std::array::from_fn(|d| match &eps_full {
            None => (0..g.edge_shape[d].len())
                .map(|i| 1.0 / (eps_diag[d][i] * g.edge_volume[d][i]))
                .collect(),
            Some(f) => (0..g.edge_shape[d].len())
                .map(|i| f.inverse[d][i][(d, d)] / g.edge_volume[d][i])
                .collect(),
        });
        MaterialMass {
            eps_diag,
            mu_diag,
            edge_mass,
            face_mass,
            edge_load_gain,
            eps_full,
            mu_full,
        }
    }

    pub fn eps_is_diagonal(&self) -> bool {
        self.eps_full.is_none()
    }

    pub fn mu_is_diagonal(&self) -> bool {
        self.mu_full.is_none()
    }

    /// Edge field collocated at edge `p` of family `d`.
    pub fn collocate_edges(g: &YeeGrid, e: &StaggeredField, d: usize, p: [usize; 3]) -> Vec3 {
        let mut v = Vec3::zeros();
        v[d] = e.c[d][g.edge_shape[d].idx(p)];
        for q in (0..3).filter(|&q| q != d) {
            let (mut s, mut k) = (0.0, 0);
            for i in neighbours(g.edge_shape[q], p, d, q, [0, 1], [-1, 0]) {
                s += e.c[q][i];
                k += 1;
            }
            v[q] = s / k as f64;
        }
        v
    }

    /// Face field collocated at face `p` normal to `d`.
    pub fn collocate_faces(g: &YeeGrid, f: &StaggeredField, d: usize, p: [usize; 3]) -> Vec3 {
        let mut v = Vec3::zeros();
        v[d] = f.c[d][g.face_shape[d].idx(p)];
        for q in (0..3).filter(|&q| q != d) {
            let (mut s, mut k) = (0.0, 0);
            for i in neighbours(g.face_shape[q], p, d, q, [-1, 0], [0, 1]) {
                s += f.c[q][i];
                k += 1;
            }
            v[q] = s / k as f64;
        }
        v
    }

    /// `eps^-1 r` for an edge-sited field `r`.
    pub fn eps_inverse(&self, g: &YeeGrid, r: &StaggeredField) -> StaggeredField {
        match &self.eps_full {
            None => StaggeredField {
                c: std::array::from_fn(|d| {
                    r.c[d]
                        .iter()
                        .zip(&self.eps_diag[d])
                        .map(|(v, e)| v / e)
                        .collect()
                }),
            },
            Some(t) => StaggeredField {
                c: std::array::from_fn(|d| {
                    g.edge_shape[d]
                        .iter()
                        .enumerate()
                        .map(|(i, p)| (t.inverse[d][i] * Self::collocate_edges(g, r, d, p))[d])
                        .collect()
                }),
            },
        }
    }

    /// `mu^-1 r` for a face-sited field `r`.
    pub fn mu_inverse(&self, g: &YeeGrid, r: &StaggeredField) -> StaggeredField {
        match &self.mu_full {
            None => StaggeredField {
                c: std::array::from_fn(|d| {
                    r.c[d]
                        .iter()
                        .zip(&self.mu_diag[d])
                        .map(|(v, m)| v / m)
                        .collect()
                }),
            },
            Some(t) => StaggeredField {
                c: std::array::from_fn(|d| {
                    g.face_shape[d]
                        .iter()
                        .enumerate()
                        .map(|(i, p)| (t.inverse[d][i] * Self::collocate_faces(g, r, d, p))[d])
                        .collect()
                }),
            },
        }
    }

    /// `eps e` at edge sites.
    pub fn eps_apply(&self, g: &YeeGrid, e: &StaggeredField) -> StaggeredField {
        match &self.eps_full {
            None => StaggeredField {
                c: std::array::from_fn(|d| {
                    e.c[d]
                        .iter()
                        .zip(&self.eps_diag[d])
                        .map(|(v, m)| v * m)
                        .collect()
                }),
            },
            Some(t) => StaggeredField {
                c: std::array::from_fn(|d| {
                    g.edge_shape[d]
                        .iter()
                        .enumerate()
                        .map(|(i, p)| (t.tensor[d][i] * Self::collocate_edges(g, e, d, p))[d])
                        .collect()
                }),
            },
        }
    }

    /// `mu h` at face sites.
    pub fn mu_apply(&self, g: &YeeGrid, h: &StaggeredField) -> StaggeredField {
        match &self.mu_full {
            None => StaggeredField {
                c: std::array::from_fn(|d| {
                    h.c[d]
                        .iter()
                        .zip(&self.mu_diag[d])
                        .map(|(v, m)| v * m)
                        .collect()
                }),
            },
            Some(t) => StaggeredField {
                c: std::array::from_fn(|d| {
                    g.face_shape[d]
                        .iter()
                        .enumerate()
                        .map(|(i, p)| (t.tensor[d][i] * Self::collocate_faces(g, h, d, p))[d])
                        .collect()
                }),
            },
        }
    }

    /// `sum w_e a_e (eps b)_e`.
    pub fn eps_pairing(&self, g: &YeeGrid, a: &StaggeredField, b: &StaggeredField) -> f64 {
        a.weighted_dot(&self.eps_apply(g, b), &g.edge_volume)
    }

    /// `sum w_f a_f (mu b)_f`.
    pub fn mu_pairing(&self, g: &YeeGrid, a: &StaggeredField, b: &StaggeredField) -> f64 {
        a.weighted_dot(&self.mu_apply(g, b), &g.face_volume)
    }
}
