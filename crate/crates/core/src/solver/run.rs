use crate::analysis::energy::{
    boundary_rate, energies, EnergyRow, EnergySample, EnergyTrace, TraceMeta,
};
use crate::analysis::{xi_default, DissipationConstants};
use crate::delay_line::{init_history, DelayRing, HistorySpec};
use crate::domain::{
    build_grid, check_assumption_geometry, check_assumption_materials, multiplier_field,
    MaterialMass, MaterialReport, MultiplierField, TensorField, YeeGrid,
};
use crate::error::{Error, Result};
use crate::feedback::FeedbackLaw;

use super::cfl::{compute_dt, TimeStep};
use super::projection::project_div_free;
use super::stepper::{tangential_trace, Stepper};
use super::{EMState, HistoryChoice, MaterialSpec, RunLength, Scenario, XiMode};

/// A prepared simulation that can be stepped and sampled.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub scenario: Scenario,
    pub grid: YeeGrid,
    pub eps: TensorField,
    pub mu: TensorField,
    pub mass: MaterialMass,
    pub report: MaterialReport,
    pub multiplier: Option<MultiplierField>,
    pub timestep: TimeStep,
    /// Weight of the delay energy.
    pub xi: f64,
    /// `None` when `xi` is not admissible; no decay certificate applies then.
    pub dissipation: Option<DissipationConstants>,
    pub stepper: Stepper,
    pub state: EMState,
    pub ring: DelayRing,
    pub total_steps: usize,
}

/// Recorded trajectory of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: EnergyTrace,
    pub state: EMState,
    pub ring: DelayRing,
    /// Time of every step level, starting at 0.
    pub step_times: Vec<f64>,
    /// Tap-based boundary rate of `E_xi` at every step level.
    pub step_rate: Vec<f64>,
    /// Ring dumps in the `step,sample_id,s_index,vx,vy,vz` layout.
    pub dumps: Option<String>,
    pub xi: f64,
    pub dissipation: Option<DissipationConstants>,
    pub report: MaterialReport,
    pub timestep: TimeStep,
}

pub(crate) fn tensor(g: &YeeGrid, spec: &MaterialSpec) -> Result<TensorField> {
    match spec {
        MaterialSpec::Preset(p) => Ok(TensorField::from_preset(g, p)),
        MaterialSpec::File(path) => TensorField::from_file(g, path),
    }
}

/// FNV-1a over the scenario's debug form; stable across runs of the same build.
fn digest(s: &Scenario) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in format!("{s:?}").bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Admissible-xi resolution; PMC runs carry no delay energy.
pub fn resolve_xi(law: &FeedbackLaw, mode: XiMode) -> Result<(f64, Option<DissipationConstants>)> {
    let k = law.constants();
    match mode {
        XiMode::Auto if law.is_pmc() => Ok((0.0, None)),
        XiMode::Auto => {
            let d = xi_default(law.gamma1, law.gamma2, k.c1, k.c2)?;
            Ok((d.xi, Some(d)))
        }
        XiMode::Explicit(xi) => {
            if !(xi.is_finite() && xi >= 0.0) {
                return Err(Error::Config(format!(
                    "xi = {xi} must be finite and non-negative"
                )));
            }
            Ok((
                xi,
                DissipationConstants::with_xi(law.gamma1, law.gamma2, k.c1, k.c2, xi),
            ))
        }
    }
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let sc = scenario.clone();
        if !(sc.cfl_safety.is_finite() && sc.cfl_safety > 0.0)
            || (sc.cfl_safety > 1.0 && !sc.cfl_override)
        {
            return Err(Error::Config(format!(
                "cfl_safety = {} must lie in (0, 1] unless the override is set",
                sc.cfl_safety
            )));
        }
        if sc.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if let RunLength::Time(t) = sc.length {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Config(format!(
                    "t_end = {t} must be finite and non-negative"
                )));
            }
        }
        let grid = build_grid(&sc.domain)?;
        let eps = tensor(&grid, &sc.eps)?;
        let mu = tensor(&grid, &sc.mu)?;
        let mut report = check_assumption_materials(&grid, &eps, &mu);
        let multiplier = match multiplier_field(&grid, sc.domain.center) {
            Ok(m) => Some(m),
            Err(e) if sc.unsafe_run => {
                report.notes.push(e.to_string());
                None
            }
            Err(e) => return Err(e),
        };
        if let Some(m) = &multiplier {
            if report.passed() {
                report = report.merge(check_assumption_geometry(&grid, &eps, &mu, m));
            }
        }
        if !report.passed() && !sc.unsafe_run {
            let list: Vec<String> = report
                .failures()
                .map(|c| format!("{} = {:e}", c.name, c.value))
                .collect();
            return Err(Error::Assumption(format!(
                "assumption checks failed: {}",
                list.join(", ")
            )));
        }
        let (xi, dissipation) = resolve_xi(&sc.law, sc.xi)?;
        let timestep = compute_dt(&grid, &eps, &mu, sc.cfl_safety, sc.law.tau)?;
        let mass = MaterialMass::new(&grid, &eps, &mu);

        let (e_raw, h0) = sc.initial.fields(&grid)?;
        let e0 = if sc.initial.project() {
            project_div_free(&grid, &mass, &e_raw)?
        } else {
            e_raw
        };
        let stepper = Stepper::new(&grid, &mass, timestep.dt, sc.closure);
        let h_half = stepper.bootstrap(&grid, &mass, &e0, &h0);
        let w0 = tangential_trace(&grid, &e0);
        let spec = match &sc.history {
            HistoryChoice::Spec(s) => s.clone(),
            HistoryChoice::File(p) => {
                HistorySpec::from_trace_file(p, timestep.depth, grid.samples.len())?
            }
        };
        let mut ring = init_history(&spec, timestep.depth, &grid, &w0)?;
        // The newest slot is the current trace by definition of the delay line.
        ring.slot_mut(0).copy_from_slice(&w0);

        let total_steps = match sc.length {
            RunLength::Steps(n) => n,
            RunLength::Time(t) => (t / timestep.dt * (1.0 + 1e-12)).floor() as usize,
        };
        Ok(Simulation {
            scenario: sc,
            grid,
            eps,
            mu,
            mass,
            report,
            multiplier,
            timestep,
            xi,
            dissipation,
            stepper,
            state: EMState {
                e: e0,
                h: h_half,
                step: 0,
                time: 0.0,
            },
            ring,
            total_steps,
        })
    }

    pub fn law(&self) -> &FeedbackLaw {
        &self.scenario.law
    }

    pub fn step(&mut self) -> Result<()> {
        let Simulation {
            grid,
            mass,
            scenario,
            stepper,
            state,
            ring,
            ..
        } = self;
        stepper.step(grid, mass, &scenario.law, state, ring)
    }

    pub fn energies(&self) -> EnergySample {
        energies(
            &self.grid,
            &self.mass,
            &self.stepper,
            &self.state,
            &self.ring,
            self.xi,
            self.scenario.law.tau,
            self.scenario.weighting,
        )
    }

    /// Tap-based rate `-dE_xi/dt` at the current level.
    pub fn boundary_rate(&self) -> f64 {
        if self.scenario.law.is_pmc() {
            return 0.0;
        }
        boundary_rate(&self.grid, &self.scenario.law, &self.ring, self.xi)
    }

    pub fn energy_row(&self) -> EnergyRow {
        let s = self.energies();
        EnergyRow {
            t: self.state.time,
            e_weighted: s.e_weighted,
            e_plain: s.e_plain,
            e_xi: s.e_xi,
            d: s.d,
            flux: self.boundary_rate(),
        }
    }

    pub fn meta(&self) -> TraceMeta {
        TraceMeta {
            xi: self.xi,
            dt: self.timestep.dt,
            depth: self.timestep.depth,
            tau: self.scenario.law.tau,
            digest: digest(&self.scenario),
        }
    }

    /// Steps to the end of the run, recording every `record_every` steps and at the final step.
    pub fn run(mut self) -> Result<RunOutput> {
        let every = self.scenario.record_every;
        let dump_every = self.scenario.dump_every;
        let mut rows = vec![self.energy_row()];
        let mut step_times = vec![0.0];
        let mut step_rate = vec![rows[0].flux];
        let mut dumps = dump_every.map(|_| {
            let mut s = String::from("step,sample_id,s_index,vx,vy,vz\n");
            self.ring.dump_rows(0, &mut s);
            s
        });
        for k in 1..=self.total_steps {
            self.step()
                .map_err(|e| annotate(e, k, k as f64 * self.timestep.dt))?;
            let rate = self.boundary_rate();
            step_times.push(self.state.time);
            step_rate.push(rate);
            if k % every == 0 || k == self.total_steps {
                rows.push(self.energy_row());
            }
            if let (Some(d), Some(out)) = (dump_every, dumps.as_mut()) {
                if d > 0 && k % d == 0 {
                    self.ring.dump_rows(k, out);
                }
            }
        }
        let meta = self.meta();
        Ok(RunOutput {
            trace: EnergyTrace { rows, meta },
            state: self.state,
            ring: self.ring,
            step_times,
            step_rate,
            dumps,
            xi: self.xi,
            dissipation: self.dissipation,
            report: self.report,
            timestep: self.timestep,
        })
    }
}

fn annotate(e: Error, step: usize, t: f64) -> Error {
    match e {
        Error::Numerical(m) if !m.contains("step") => {
            Error::Numerical(format!("{m} (step {step}, t = {t:.6e})"))
        }
        other => other,
    }
}

pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    Simulation::new(scenario)?.run()
}
