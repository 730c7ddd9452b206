use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen};

use super::grid::{Vec3, YeeGrid};
use crate::error::{Error, Result};

pub type Mat3 = Matrix3<f64>;

/// Shipped material tensor presets, evaluated at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub enum MaterialPreset {
    /// `s * I`
    Isotropic(f64),
    /// `diag(d0, d1, d2)`
    Diagonal([f64; 3]),
    /// `diag(d0 + slope * x1, d1, d2)`
    Ramp { base: [f64; 3], slope: f64 },
    /// `exp(k * x1) * I`
    Exponential(f64),
    /// Constant symmetric tensor from `e11 e22 e33 e12 e13 e23`.
    Full([f64; 6]),
}

impl MaterialPreset {
    pub fn eval(&self, x: &Vec3) -> Mat3 {
        match *self {
            MaterialPreset::Isotropic(s) => Mat3::identity() * s,
            MaterialPreset::Diagonal(d) => Mat3::from_diagonal(&Vec3::from(d)),
            MaterialPreset::Ramp { base, slope } => {
                Mat3::from_diagonal(&Vec3::new(base[0] + slope * x[0], base[1], base[2]))
            }
            MaterialPreset::Exponential(k) => Mat3::identity() * (k * x[0]).exp(),
            MaterialPreset::Full(u) => upper_to_matrix(&u),
        }
    }
}

pub(crate) fn upper_to_matrix(u: &[f64; 6]) -> Mat3 {
    Mat3::new(u[0], u[3], u[4], u[3], u[1], u[5], u[4], u[5], u[2])
}

/// Per-cell 3x3 material tensor with spectral summaries of its symmetric part.
#[derive(Debug, Clone)]
pub struct TensorField {
    pub values: Vec<Mat3>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub diagonal: bool,
}

pub(crate) fn sym_eigen_range(m: &Mat3) -> (f64, f64) {
    let s = (m + m.transpose()) * 0.5;
    let ev = SymmetricEigen::new(s).eigenvalues;
    (ev.min(), ev.max())
}

impl TensorField {
    /// Wraps raw per-cell matrices; symmetry and definiteness are reported by the assumption checks.
    pub fn from_cells(values: Vec<Mat3>) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut diagonal = true;
        for m in &values {
            let (a, b) = sym_eigen_range(m);
            lo = lo.min(a);
            hi = hi.max(b);
            for i in 0..3 {
                for j in 0..3 {
                    if i != j && m[(i, j)] != 0.0 {
                        diagonal = false;
                    }
                }
            }
        }
        TensorField {
            values,
            lambda_min: lo,
            lambda_max: hi,
            diagonal,
        }
    }

    pub fn from_preset(g: &YeeGrid, preset: &MaterialPreset) -> Self {
        Self::from_cells(
            g.cell_shape
                .iter()
                .map(|p| preset.eval(&g.cell_center(p)))
                .collect(),
        )
    }

    pub fn identity(g: &YeeGrid) -> Self {
        Self::from_preset(g, &MaterialPreset::Isotropic(1.0))
    }

    /// Reads `i j k e11 e22 e33 [e12 e13 e23]` lines; every cell must appear exactly once.
    pub fn from_file(g: &YeeGrid, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(g, &text)
    }

    pub fn parse(g: &YeeGrid, text: &str) -> Result<Self> {
        let shape = g.cell_shape;
        let mut cells: Vec<Option<Mat3>> = vec![None; shape.len()];
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse {
                line: ln + 1,
                msg: msg.to_string(),
            };
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != 6 && tok.len() != 9 {
                return Err(bad("expected `i j k e11 e22 e33 [e12 e13 e23]`"));
            }
            let mut p = [0usize; 3];
            for a in 0..3 {
                p[a] = tok[a]
                    .parse()
                    .map_err(|_| bad("cell index is not an integer"))?;
                if p[a] >= shape.dims[a] {
                    return Err(bad("cell index out of range"));
                }
            }
            let mut u = [0.0; 6];
            for (slot, t) in u.iter_mut().zip(&tok[3..]) {
                let v: f64 = t.parse().map_err(|_| bad("tensor entry is not a number"))?;
                if !v.is_finite() {
                    return Err(bad("tensor entry is not finite"));
                }
                *slot = v;
            }
            let i = shape.idx(p);
            if cells[i].is_some() {
                return Err(bad("cell listed twice"));
            }
            cells[i] = Some(upper_to_matrix(&u));
        }
        let values = cells
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| {
                    Error::Config(format!("material file misses cell {:?}", shape.coords(i)))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_cells(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::grid::{build_grid, BoxDomain};

    #[test]
    fn ramp_summaries() {
        let g = build_grid(&BoxDomain::unit_cube(8)).unwrap();
        let t = TensorField::from_preset(
            &g,
            &MaterialPreset::Ramp {
                base: [1.0; 3],
                slope: 1.0,
            },
        );
        assert!(t.diagonal);
        assert!((t.lambda_min - 1.0).abs() < 1e-14);
        assert!((t.lambda_max - (1.0 + 15.0 / 16.0)).abs() < 1e-14);
    }

    #[test]
    fn file_round_trip_and_errors() {
        let g = build_grid(&BoxDomain::unit_cube(4)).unwrap();
        let mut text = String::from("# header\n");
        for p in g.cell_shape.iter() {
            text.push_str(
                &format!("{} {} {} 2 3 4 0.5\n", p[0], p[1], p[2]).replace(" 0.5\n", "\n"),
            );
        }
        let t = TensorField::parse(&g, &text).unwrap();
        assert_eq!(t.values[5], Mat3::from_diagonal(&Vec3::new(2.0, 3.0, 4.0)));
        let short: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(TensorField::parse(&g, &short).is_err());
        let dup = format!("{text}0 0 0 1 1 1\n");
        assert!(matches!(
            TensorField::parse(&g, &dup),
            Err(Error::Parse { .. })
        ));
    }
}
