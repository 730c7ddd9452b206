use std::path::{Path, PathBuf};

use crate::domain::{EdgeField, FaceField, Vec3, YeeGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Off,
    /// `E = amplitude * polarization * exp(-|x - center|^2 / width^2)`, `H = 0`.
    Gaussian {
        center: [f64; 3],
        width: f64,
        amplitude: f64,
        polarization: [f64; 3],
        project: bool,
    },
    /// Lines `E|H family i j k value`; unlisted dofs are zero.
    File {
        path: PathBuf,
        project: bool,
    },
}

impl InitialCondition {
    pub fn gaussian_default() -> Self {
        InitialCondition::Gaussian {
            center: [0.5, 0.5, 0.5],
            width: 0.15,
            amplitude: 1.0,
            polarization: [0.0, 0.0, 1.0],
            project: true,
        }
    }

    pub fn project(&self) -> bool {
        match self {
            InitialCondition::Off => false,
            InitialCondition::Gaussian { project, .. } | InitialCondition::File { project, .. } => {
                *project
            }
        }
    }

    /// Raw `(E0, H0)` before projection.
    pub fn fields(&self, g: &YeeGrid) -> Result<(EdgeField, FaceField)> {
        let mut e = EdgeField::zeros_edges(g);
        let h = FaceField::zeros_faces(g);
        match self {
            InitialCondition::Off => Ok((e, h)),
            InitialCondition::Gaussian {
                center,
                width,
                amplitude,
                polarization,
                ..
            } => {
                if !(*width > 0.0) {
                    return Err(Error::Config("pulse width must be positive".into()));
                }
                let c = Vec3::from(*center);
                for d in 0..3 {
                    if polarization[d] == 0.0 {
                        continue;
                    }
                    for (i, p) in g.edge_shape[d].iter().enumerate() {
                        let r2 = (g.edge_position(d, p) - c).norm_squared();
                        e.c[d][i] = amplitude * polarization[d] * (-r2 / (width * width)).exp();
                    }
                }
                Ok((e, h))
            }
            InitialCondition::File { path, .. } => read_fields(g, path),
        }
    }
}

fn read_fields(g: &YeeGrid, path: &Path) -> Result<(EdgeField, FaceField)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fields(g, &text)
}

pub fn parse_fields(g: &YeeGrid, text: &str) -> Result<(EdgeField, FaceField)> {
    let mut e = EdgeField::zeros_edges(g);
    let mut h = FaceField::zeros_faces(g);
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| Error::Parse {
            line: ln + 1,
            msg: m.to_string(),
        };
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 6 {
            return Err(bad("expected `E|H family i j k value`"));
        }
        let fam: usize = t[1].parse().map_err(|_| bad("bad family"))?;
        if fam > 2 {
            return Err(bad("family must be 0, 1 or 2"));
        }
        let mut p = [0usize; 3];
        for a in 0..3 {
            p[a] = t[2 + a].parse().map_err(|_| bad("bad index"))?;
        }
        let v: f64 = t[5].parse().map_err(|_| bad("bad value"))?;
        if !v.is_finite() {
            return Err(bad("value is not finite"));
        }
        let (shape, target) = match t[0] {
            "E" => (g.edge_shape[fam], &mut e.c[fam]),
            "H" => (g.face_shape[fam], &mut h.c[fam]),
            _ => return Err(bad("first column must be E or H")),
        };
        if (0..3).any(|a| p[a] >= shape.dims[a]) {
            return Err(bad("index out of range"));
        }
        target[shape.idx(p)] = v;
    }
    Ok((e, h))
}
