//! Leapfrog time stepping with the delayed boundary closure, time step control and initial data.

pub mod cfl;
pub mod initial;
pub mod projection;
pub mod run;
pub mod stepper;

use std::path::PathBuf;

use crate::delay_line::HistorySpec;
use crate::domain::{BoxDomain, EdgeField, FaceField, MaterialPreset};
use crate::feedback::FeedbackLaw;

pub use cfl::{compute_dt, TimeStep};
pub use initial::InitialCondition;
pub use projection::{div_eps, interior_div_max, project_div_free};
pub use run::{run, RunOutput, Simulation};
pub use stepper::{Closure, Stepper};

/// Fields of the leapfrog scheme: `E` at level `n`, `H` at level `n + 1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EMState {
    pub e: EdgeField,
    pub h: FaceField,
    pub step: usize,
    pub time: f64,
}

impl EMState {
    pub fn all_finite(&self) -> bool {
        self.e.all_finite() && self.h.all_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaterialSpec {
    Preset(MaterialPreset),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum HistoryChoice {
    Spec(HistorySpec),
    /// Boundary trace dump with the `step,sample_id,s_index,vx,vy,vz` layout.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Material-weighted field energy.
    Weighted,
    /// Unweighted `1/2 (|E|^2 + |H|^2)`.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiMode {
    /// Midpoint of the admissible interval; refused when the interval is empty.
    Auto,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunLength {
    /// Largest number of whole steps not exceeding `t_end`.
    Time(f64),
    Steps(usize),
}

/// Everything needed to reproduce one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub domain: BoxDomain,
    pub eps: MaterialSpec,
    pub mu: MaterialSpec,
    pub law: FeedbackLaw,
    pub history: HistoryChoice,
    pub initial: InitialCondition,
    pub length: RunLength,
    pub cfl_safety: f64,
    /// Permits `cfl_safety > 1` (instability experiments).
    pub cfl_override: bool,
    pub record_every: usize,
    pub weighting: Weighting,
    pub xi: XiMode,
    pub closure: Closure,
    /// Runs even when an assumption check fails.
    pub unsafe_run: bool,
    /// Dump the delay ring every this many steps.
    pub dump_every: Option<usize>,
}

impl Scenario {
    /// Unit cube with identity materials, a centered pulse and zero history.
    pub fn unit_cube(n: usize, law: FeedbackLaw) -> Self {
        Scenario {
            domain: BoxDomain::unit_cube(n),
            eps: MaterialSpec::Preset(MaterialPreset::Isotropic(1.0)),
            mu: MaterialSpec::Preset(MaterialPreset::Isotropic(1.0)),
            law,
            history: HistoryChoice::Spec(HistorySpec::Zero),
            initial: InitialCondition::gaussian_default(),
            length: RunLength::Steps(100),
            cfl_safety: 0.95,
            cfl_override: false,
            record_every: 1,
            weighting: Weighting::Weighted,
            xi: XiMode::Auto,
            closure: Closure::Implicit,
            unsafe_run: false,
            dump_every: None,
        }
    }
}
