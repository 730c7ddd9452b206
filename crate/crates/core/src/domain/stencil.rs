use super::grid::{Vec3, YeeGrid};

/// Three component arrays, one per staggered family (edges or faces).
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredField {
    pub c: [Vec<f64>; 3],
}

/// E-type field: component `d` lives on the `d`-directed edges.
pub type EdgeField = StaggeredField;
/// H-type field: component `d` lives on the faces normal to axis `d`.
pub type FaceField = StaggeredField;

impl StaggeredField {
    pub fn zeros_edges(g: &YeeGrid) -> Self {
        StaggeredField {
            c: std::array::from_fn(|d| vec![0.0; g.edge_shape[d].len()]),
        }
    }

    pub fn zeros_faces(g: &YeeGrid) -> Self {
        StaggeredField {
            c: std::array::from_fn(|d| vec![0.0; g.face_shape[d].len()]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        StaggeredField {
            c: std::array::from_fn(|d| vec![0.0; self.c[d].len()]),
        }
    }

    pub fn len(&self) -> usize {
        self.c.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axpy(&mut self, a: f64, x: &StaggeredField) {
        for d in 0..3 {
            for (y, &xv) in self.c[d].iter_mut().zip(&x.c[d]) {
                *y += a * xv;
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.c.iter_mut().flatten().for_each(|v| *v *= a);
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.c.iter().flatten().all(|v| v.is_finite())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.c.concat()
    }

    /// Inverse of `to_flat` using the family lengths of `self`.
    pub fn from_flat_like(&self, flat: &[f64]) -> StaggeredField {
        let (a, b) = (self.c[0].len(), self.c[0].len() + self.c[1].len());
        StaggeredField {
            c: [flat[..a].to_vec(), flat[a..b].to_vec(), flat[b..].to_vec()],
        }
    }

    /// `sum_i w_i x_i y_i` with per-site weights shaped like `self`.
    pub fn weighted_dot(&self, other: &StaggeredField, w: &[Vec<f64>; 3]) -> f64 {
        let mut s = 0.0;
        for d in 0..3 {
            for i in 0..self.c[d].len() {
                s += w[d][i] * self.c[d][i] * other.c[d][i];
            }
        }
        s
    }
}

/// Face-sited curl of an edge field.
pub fn curl_e(g: &YeeGrid, e: &EdgeField) -> FaceField {
    let mut out = FaceField::zeros_faces(g);
    for d in 0..3 {
        let d1 = (d + 1) % 3;
        let d2 = (d + 2) % 3;
        let (s1, s2) = (g.edge_shape[d1], g.edge_shape[d2]);
        let mut u1 = [0usize; 3];
        u1[d1] = 1;
        let mut u2 = [0usize; 3];
        u2[d2] = 1;
        for (i, p) in g.face_shape[d].iter().enumerate() {
            let a = s2.idx(p);
            let b = s2.idx([p[0] + u1[0], p[1] + u1[1], p[2] + u1[2]]);
            let c = s1.idx(p);
            let e2 = s1.idx([p[0] + u2[0], p[1] + u2[1], p[2] + u2[2]]);
            out.c[d][i] =
                (e.c[d2][b] - e.c[d2][a]) / g.h[d1] - (e.c[d1][e2] - e.c[d1][c]) / g.h[d2];
        }
    }
    out
}

/// Transpose of `curl_e` (no weights).
pub fn curl_e_transpose(g: &YeeGrid, f: &FaceField) -> EdgeField {
    let mut out = EdgeField::zeros_edges(g);
    for d in 0..3 {
        let d1 = (d + 1) % 3;
        let d2 = (d + 2) % 3;
        let (s1, s2) = (g.edge_shape[d1], g.edge_shape[d2]);
        let mut u1 = [0usize; 3];
        u1[d1] = 1;
        let mut u2 = [0usize; 3];
        u2[d2] = 1;
        for (i, p) in g.face_shape[d].iter().enumerate() {
            let v = f.c[d][i];
            if v == 0.0 {
                continue;
            }
            let a = s2.idx(p);
            let b = s2.idx([p[0] + u1[0], p[1] + u1[1], p[2] + u1[2]]);
            let c = s1.idx(p);
            let e2 = s1.idx([p[0] + u2[0], p[1] + u2[1], p[2] + u2[2]]);
            out.c[d2][b] += v / g.h[d1];
            out.c[d2][a] -= v / g.h[d1];
            out.c[d1][e2] -= v / g.h[d2];
            out.c[d1][c] += v / g.h[d2];
        }
    }
    out
}

/// Edge-sited gradient of a node field.
pub fn grad(g: &YeeGrid, phi: &[f64]) -> EdgeField {
    let mut out = EdgeField::zeros_edges(g);
    let ns = g.node_shape;
    for d in 0..3 {
        for (i, p) in g.edge_shape[d].iter().enumerate() {
            let mut q = p;
            q[d] += 1;
            out.c[d][i] = (phi[ns.idx(q)] - phi[ns.idx(p)]) / g.h[d];
        }
    }
    out
}

/// Transpose of `grad` (no weights).
pub fn grad_transpose(g: &YeeGrid, e: &EdgeField) -> Vec<f64> {
    let ns = g.node_shape;
    let mut out = vec![0.0; ns.len()];
    for d in 0..3 {
        for (i, p) in g.edge_shape[d].iter().enumerate() {
            let v = e.c[d][i] / g.h[d];
            let mut q = p;
            q[d] += 1;
            out[ns.idx(q)] += v;
            out[ns.idx(p)] -= v;
        }
    }
    out
}

/// Tangential E at each boundary sample: average of the two bounding edges per direction.
pub fn trace(g: &YeeGrid, e: &EdgeField) -> Vec<Vec3> {
    g.samples
        .iter()
        .map(|s| {
            let mut v = Vec3::zeros();
            for &(t, [a, b]) in &s.edges {
                v[t] = 0.5 * (e.c[t][a] + e.c[t][b]);
            }
            v
        })
        .collect()
}

/// Transpose of `trace`.
pub fn trace_transpose(g: &YeeGrid, v: &[Vec3]) -> EdgeField {
    let mut out = EdgeField::zeros_edges(g);
    for (s, val) in g.samples.iter().zip(v) {
        for &(t, [a, b]) in &s.edges {
            out.c[t][a] += 0.5 * val[t];
            out.c[t][b] += 0.5 * val[t];
        }
    }
    out
}
