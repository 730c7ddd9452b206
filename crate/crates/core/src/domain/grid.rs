use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Axis-aligned box `[0, Lx] x [0, Ly] x [0, Lz]` with a cell resolution and a star center.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub lengths: [f64; 3],
    pub cells: [usize; 3],
    pub center: [f64; 3],
}

impl BoxDomain {
    pub fn new(lengths: [f64; 3], cells: [usize; 3], center: [f64; 3]) -> Result<Self> {
        let d = BoxDomain {
            lengths,
            cells,
            center,
        };
        d.validate()?;
        Ok(d)
    }

    /// Unit cube with `n` cells per axis, star center at the cube center.
    pub fn unit_cube(n: usize) -> Self {
        BoxDomain {
            lengths: [1.0; 3],
            cells: [n; 3],
            center: [0.5; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if !(self.lengths[a].is_finite() && self.lengths[a] > 0.0) {
                return Err(Error::Config(format!(
                    "box length along axis {a} must be positive"
                )));
            }
            if self.cells[a] < 4 {
                return Err(Error::Config(format!(
                    "resolution along axis {a} is {}; at least 4 cells are required",
                    self.cells[a]
                )));
            }
        }
        Ok(())
    }

    pub fn surface_area(&self) -> f64 {
        let [lx, ly, lz] = self.lengths;
        2.0 * (lx * ly + ly * lz + lz * lx)
    }
}

/// Row-major (first index fastest) flattening of a 3-d index box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub dims: [usize; 3],
}

impl Shape {
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, p: [usize; 3]) -> usize {
        p[0] + self.dims[0] * (p[1] + self.dims[1] * p[2])
    }

    /// Index of `p + offset`, or `None` when it leaves the shape.
    #[inline]
    pub fn offset(&self, p: [usize; 3], off: [isize; 3]) -> Option<usize> {
        let mut q = [0usize; 3];
        for a in 0..3 {
            let v = p[a] as isize + off[a];
            if v < 0 || v >= self.dims[a] as isize {
                return None;
            }
            q[a] = v as usize;
        }
        Some(self.idx(q))
    }

    #[inline]
    pub fn coords(&self, mut i: usize) -> [usize; 3] {
        let x = i % self.dims[0];
        i /= self.dims[0];
        let y = i % self.dims[1];
        [x, y, i / self.dims[1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [a, b, c] = self.dims;
        (0..c).flat_map(move |k| (0..b).flat_map(move |j| (0..a).map(move |i| [i, j, k])))
    }
}

/// One surface quadrature point: the center of a boundary cell face.
#[derive(Debug, Clone)]
pub struct BoundarySample {
    pub position: Vec3,
    pub normal: Vec3,
    /// Axis of the outward normal.
    pub axis: usize,
    pub area: f64,
    /// Index of the boundary cell owning this face.
    pub cell: [usize; 3],
    /// For each tangential axis `t`: the family `t` and the two parallel edges bounding the face.
    pub edges: [(usize, [usize; 2]); 2],
}

/// Staggered lattice: E on cell edges, H on cell faces, divergence on nodes.
#[derive(Debug, Clone)]
pub struct YeeGrid {
    pub domain: BoxDomain,
    pub n: [usize; 3],
    pub h: [f64; 3],
    pub edge_shape: [Shape; 3],
    pub face_shape: [Shape; 3],
    pub node_shape: Shape,
    pub cell_shape: Shape,
    /// Dual volume attached to each edge (box-clipped).
    pub edge_volume: [Vec<f64>; 3],
    /// Dual volume attached to each face (halved on the boundary).
    pub face_volume: [Vec<f64>; 3],
    pub node_volume: Vec<f64>,
    pub samples: Vec<BoundarySample>,
}

#[inline]
fn clip(i: usize, n: usize) -> f64 {
    if i == 0 || i == n {
        0.5
    } else {
        1.0
    }
}

pub fn build_grid(domain: &BoxDomain) -> Result<YeeGrid> {
    domain.validate()?;
    let n = domain.cells;
    let h = [
        domain.lengths[0] / n[0] as f64,
        domain.lengths[1] / n[1] as f64,
        domain.lengths[2] / n[2] as f64,
    ];
    let edge_shape: [Shape; 3] = std::array::from_fn(|d| Shape {
        dims: std::array::from_fn(|a| if a == d { n[a] } else { n[a] + 1 }),
    });
    let face_shape: [Shape; 3] = std::array::from_fn(|d| Shape {
        dims: std::array::from_fn(|a| if a == d { n[a] + 1 } else { n[a] }),
    });
    let node_shape = Shape {
        dims: [n[0] + 1, n[1] + 1, n[2] + 1],
    };
    let cell_shape = Shape { dims: n };
    let cell_vol = h[0] * h[1] * h[2];

    let edge_volume = std::array::from_fn(|d| {
        edge_shape[d]
            .iter()
            .map(|p| {
                let mut v = cell_vol;
                for a in 0..3 {
                    if a != d {
                        v *= clip(p[a], n[a]);
                    }
                }
                v
            })
            .collect()
    });
    let face_volume = std::array::from_fn(|d| {
        face_shape[d]
            .iter()
            .map(|p| cell_vol * clip(p[d], n[d]))
            .collect()
    });
    let node_volume = node_shape
        .iter()
        .map(|p| cell_vol * (0..3).map(|a| clip(p[a], n[a])).product::<f64>())
        .collect();

    let mut samples = Vec::with_capacity(2 * (n[0] * n[1] + n[1] * n[2] + n[2] * n[0]));
    for axis in 0..3 {
        let t0 = (axis + 1) % 3;
        let t1 = (axis + 2) % 3;
        for side in [0usize, 1] {
            let plane = side * n[axis];
            let sign = if side == 0 { -1.0 } else { 1.0 };
            for b in 0..n[t1] {
                for a in 0..n[t0] {
                    let mut pos = Vec3::zeros();
                    pos[axis] = plane as f64 * h[axis];
                    pos[t0] = (a as f64 + 0.5) * h[t0];
                    pos[t1] = (b as f64 + 0.5) * h[t1];
                    let mut normal = Vec3::zeros();
                    normal[axis] = sign;
                    let mut cell = [0usize; 3];
                    cell[axis] = plane;
                    cell[t0] = a;
                    cell[t1] = b;
                    // edges along t0 sit at t1 = b and b+1; edges along t1 at t0 = a and a+1
                    let mut owner = cell;
                    owner[axis] = if side == 0 { 0 } else { n[axis] - 1 };
                    let mut p = cell;
                    let e0a = edge_shape[t0].idx(p);
                    p[t1] += 1;
                    let e0b = edge_shape[t0].idx(p);
                    let mut q = cell;
                    let e1a = edge_shape[t1].idx(q);
                    q[t0] += 1;
                    let e1b = edge_shape[t1].idx(q);
                    samples.push(BoundarySample {
                        position: pos,
                        normal,
                        axis,
                        area: h[t0] * h[t1],
                        cell: owner,
                        edges: [(t0, [e0a, e0b]), (t1, [e1a, e1b])],
                    });
                }
            }
        }
    }

    Ok(YeeGrid {
        domain: domain.clone(),
        n,
        h,
        edge_shape,
        face_shape,
        node_shape,
        cell_shape,
        edge_volume,
        face_volume,
        node_volume,
        samples,
    })
}

impl YeeGrid {
    pub fn edge_count(&self) -> usize {
        self.edge_shape.iter().map(Shape::len).sum()
    }

    pub fn face_count(&self) -> usize {
        self.face_shape.iter().map(Shape::len).sum()
    }

    pub fn boundary_area(&self) -> f64 {
        self.samples.iter().map(|s| s.area).sum()
    }

    /// Midpoint of edge `p` of family `d`.
    pub fn edge_position(&self, d: usize, p: [usize; 3]) -> Vec3 {
        Vec3::from_fn(|a, _| {
            let off = if a == d { 0.5 } else { 0.0 };
            (p[a] as f64 + off) * self.h[a]
        })
    }

    /// Center of face `p` normal to axis `d`.
    pub fn face_position(&self, d: usize, p: [usize; 3]) -> Vec3 {
        Vec3::from_fn(|a, _| {
            let off = if a == d { 0.0 } else { 0.5 };
            (p[a] as f64 + off) * self.h[a]
        })
    }

    pub fn node_position(&self, p: [usize; 3]) -> Vec3 {
        Vec3::from_fn(|a, _| p[a] as f64 * self.h[a])
    }

    pub fn cell_center(&self, p: [usize; 3]) -> Vec3 {
        Vec3::from_fn(|a, _| (p[a] as f64 + 0.5) * self.h[a])
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    pub fn is_interior_node(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| p[a] > 0 && p[a] < self.n[a])
    }
}
