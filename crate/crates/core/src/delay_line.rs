//! Per-sample FIFO realizing the delayed trace `Z(s) = E(t - tau s) x nu` on the slots `s_j = j/N`.

use std::fmt::Write as _;
use std::path::Path;

use crate::domain::{Vec3, YeeGrid};
use crate::error::{Error, Result};
use crate::feedback::TANGENTIAL_TOL;

/// Initial history `Z(0, s)` for `s` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum HistorySpec {
    Zero,
    /// Same per-sample tangential value in every slot.
    Constant(Vec<Vec3>),
    /// Every slot holds the initial trace `E0 x nu`.
    Replay,
    /// Explicit slot values, indexed `[slot][sample]`.
    Slots(Vec<Vec<Vec3>>),
}

impl HistorySpec {
    /// Reads a boundary trace dump (`step,sample_id,s_index,vx,vy,vz`); later rows override earlier ones.
    pub fn from_trace_file(path: &Path, n: usize, samples: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_trace(&text, n, samples)
    }

    pub fn parse_trace(text: &str, n: usize, samples: usize) -> Result<Self> {
        let mut slots: Vec<Vec<Option<Vec3>>> = vec![vec![None; samples]; n + 1];
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("step") {
                continue;
            }
            let bad = |m: &str| Error::Parse {
                line: ln + 1,
                msg: m.to_string(),
            };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 6 {
                return Err(bad("expected step,sample_id,s_index,vx,vy,vz"));
            }
            let s: usize = f[1].parse().map_err(|_| bad("bad sample_id"))?;
            let j: usize = f[2].parse().map_err(|_| bad("bad s_index"))?;
            if s >= samples || j > n {
                return Err(bad("sample_id or s_index out of range"));
            }
            let mut v = Vec3::zeros();
            for k in 0..3 {
                v[k] = f[3 + k].parse().map_err(|_| bad("bad vector component"))?;
            }
            slots[j][s] = Some(v);
        }
        let slots = slots
            .into_iter()
            .enumerate()
            .map(|(j, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(s, v)| {
                        v.ok_or_else(|| {
                            Error::Config(format!("history file misses sample {s} slot {j}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HistorySpec::Slots(slots))
    }
}

#[derive(Debug, Clone)]
pub struct DelayRing {
    n: usize,
    normals: Vec<Vec3>,
    /// Physical storage; logical slot `j` lives at `(head + j) % (n + 1)`.
    store: Vec<Vec<Vec3>>,
    head: usize,
}

fn check_tangential(v: &[Vec3], normals: &[Vec3], slot: usize) -> Result<()> {
    for (s, (w, nu)) in v.iter().zip(normals).enumerate() {
        let d = w.dot(nu);
        if d.abs() > TANGENTIAL_TOL || !d.is_finite() {
            return Err(Error::Contract(format!(
                "history value at sample {s}, slot {slot} is not tangential (w . nu = {d:e})"
            )));
        }
    }
    Ok(())
}

/// Builds the ring; `initial_trace` is used by the replay preset.
pub fn init_history(
    phi0: &HistorySpec,
    n: usize,
    g: &YeeGrid,
    initial_trace: &[Vec3],
) -> Result<DelayRing> {
    if n < 1 {
        return Err(Error::Config("delay ring depth must be at least 1".into()));
    }
    let normals: Vec<Vec3> = g.samples.iter().map(|s| s.normal).collect();
    let m = normals.len();
    let store = match phi0 {
        HistorySpec::Zero => vec![vec![Vec3::zeros(); m]; n + 1],
        HistorySpec::Constant(w) => {
            if w.len() != m {
                return Err(Error::Config(format!(
                    "constant history has {} samples, grid has {m}",
                    w.len()
                )));
            }
            vec![w.clone(); n + 1]
        }
        HistorySpec::Replay => {
            if initial_trace.len() != m {
                return Err(Error::Config(
                    "replay history needs the initial boundary trace".into(),
                ));
            }
            vec![initial_trace.to_vec(); n + 1]
        }
        HistorySpec::Slots(s) => {
            if s.len() != n + 1 || s.iter().any(|r| r.len() != m) {
                return Err(Error::Config(format!(
                    "history needs {} slots of {m} samples",
                    n + 1
                )));
            }
            s.clone()
        }
    };
    for (j, row) in store.iter().enumerate() {
        check_tangential(row, &normals, j)?;
    }
    Ok(DelayRing {
        n,
        normals,
        store,
        head: 0,
    })
}

impl DelayRing {
    pub fn depth(&self) -> usize {
        self.n
    }

    pub fn samples(&self) -> usize {
        self.normals.len()
    }

    /// Logical slot `j`, i.e. `Z(s_j)`.
    pub fn slot(&self, j: usize) -> &[Vec3] {
        &self.store[(self.head + j) % (self.n + 1)]
    }

    pub(crate) fn slot_mut(&mut self, j: usize) -> &mut Vec<Vec3> {
        let k = (self.head + j) % (self.n + 1);
        &mut self.store[k]
    }

    /// `Z(s = 0)`
    pub fn z0(&self) -> &[Vec3] {
        self.slot(0)
    }

    /// `Z(s = 1)`
    pub fn z1(&self) -> &[Vec3] {
        self.slot(self.n)
    }

    /// Shifts every slot one step toward `s = 1` and stores `new_trace` in slot 0; returns `(Z0, Z1)`.
    pub fn advance(&mut self, new_trace: &[Vec3]) -> Result<(&[Vec3], &[Vec3])> {
        if new_trace.len() != self.samples() {
            return Err(Error::Contract(
                "trace length does not match the ring".into(),
            ));
        }
        check_tangential(new_trace, &self.normals, 0)?;
        self.head = (self.head + self.n) % (self.n + 1);
        self.store[self.head].copy_from_slice(new_trace);
        Ok((self.slot(0), self.slot(self.n)))
    }

    /// Trapezoid rule for `int_0^1 |Z(s)|^2 ds` at every sample.
    pub fn s_quadrature(&self) -> Vec<f64> {
        let n = self.n;
        let mut q = vec![0.0; self.samples()];
        for j in 0..=n {
            let w = if j == 0 || j == n { 0.5 } else { 1.0 } / n as f64;
            for (acc, z) in q.iter_mut().zip(self.slot(j)) {
                *acc += w * z.norm_squared();
            }
        }
        q
    }

    /// Logical copy `[slot][sample]`.
    pub fn snapshot(&self) -> Vec<Vec<Vec3>> {
        (0..=self.n).map(|j| self.slot(j).to_vec()).collect()
    }

    /// Appends `step,sample_id,s_index,vx,vy,vz` rows for every slot.
    pub fn dump_rows(&self, step: usize, out: &mut String) {
        for j in 0..=self.n {
            for (s, v) in self.slot(j).iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{step},{s},{j},{:.16e},{:.16e},{:.16e}",
                    v[0], v[1], v[2]
                );
            }
        }
    }
}

/// Largest residual of the discrete transport equation and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportResidual {
    pub max: f64,
    /// `(snapshot index, sample, slot)` of the maximum.
    pub location: Option<(usize, usize, usize)>,
}

/// Residual of `tau (Z^{n+1}_j - Z^n_j)/dt + N (Z^n_j - Z^n_{j-1})` over consecutive snapshots, with `tau/dt = N`.
pub fn transport_residual(snapshots: &[Vec<Vec<Vec3>>]) -> TransportResidual {
    let mut out = TransportResidual {
        max: 0.0,
        location: None,
    };
    for (k, pair) in snapshots.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let n = (a.len() - 1) as f64;
        for j in 1..a.len() {
            for s in 0..a[j].len() {
                let r = (b[j][s] - a[j][s]) * n + (a[j][s] - a[j - 1][s]) * n;
                let m = r.amax();
                if m > out.max {
                    out = TransportResidual {
                        max: m,
                        location: Some((k, s, j)),
                    };
                }
            }
        }
    }
    out
}
