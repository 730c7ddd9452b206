//! Command-line front end: configuration, subcommand dispatch, sweeps and output files.
//!
//! Exit codes: 0 success, 2 configuration, 3 assumption violated, 4 numerical failure,
//! 5 assertion or certificate failure under `--assert`.

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::energy::fmt_num;
use crate::analysis::EnergyTrace;
use crate::domain::{
    build_grid, check_assumption_geometry, check_assumption_materials, MaterialReport,
    MultiplierField, TensorField, YeeGrid,
};
use crate::error::{Error, Result};
use crate::operator_lab::{
    generator_constants, monotonicity_test_family, resolvent_solve, GeneratorConstants,
    OperatorLab, PairFamily,
};
use crate::solver::run::{resolve_xi, tensor};
use crate::solver::{Simulation, XiMode};

pub use config::{Config, RawConfig};
pub use report::{certify, classify, CertificateStatus, Classification};

/// Residual a resolvent solve must reach under `--assert`.
pub const RESOLVENT_ASSERT_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "delayed-maxwell",
    version,
    about = "Maxwell simulations with delayed nonlinear boundary feedback"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report material, geometry and feedback assumptions.
    Check { config: PathBuf },
    /// Simulate, write the energy trace and issue a decay certificate when the hypotheses hold.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit 5 unless a certificate is issued and passes.
        #[arg(long)]
        assert: bool,
    },
    /// Run one simulation per value of a numeric configuration key.
    Sweep {
        config: PathBuf,
        /// Key path such as `feedback.gamma2`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        values: Vec<f64>,
        /// Concurrent scenarios; 1 runs serially.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit 5 if any issued certificate fails.
        #[arg(long)]
        assert: bool,
    },
    /// Certify an existing energy CSV against the constants implied by a configuration.
    Analyze {
        config: PathBuf,
        #[arg(long)]
        energy: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        assert: bool,
    },
    /// Sample the shifted monotonicity pairing of the extended generator.
    Operator {
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Intervals of the delay variable grid.
        #[arg(long, default_value_t = 16)]
        m: usize,
        #[arg(long, value_enum, default_value_t = Family::Generic)]
        family: Family,
        /// Drop the shift (negative control).
        #[arg(long)]
        unshifted: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        assert: bool,
    },
    /// Solve `(b + A) V = F` for random data `F`.
    Resolvent {
        config: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        b: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        assert: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Generic,
    TraceFree,
}

/// Parses arguments, dispatches, prints errors to stderr and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match std::panic::catch_unwind(|| dispatch(&cli)) {
        Ok(Ok(text)) => {
            print!("{text}");
            0
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal numerical failure");
            4
        }
    }
}

/// Runs one command; returns the text destined for stdout.
pub fn dispatch(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Check { config } => check(&Config::load(config)?),
        Command::Run {
            config,
            out,
            assert,
        } => {
            let cfg = Config::load(config)?;
            let dir = out_dir(&cfg, out);
            let (summary, status, _) = run_to(&cfg, &dir)?;
            if *assert {
                require_certificate(&status)?;
            }
            Ok(summary)
        }
        Command::Sweep {
            config,
            param,
            values,
            jobs,
            out,
            assert,
        } => {
            let text = std::fs::read_to_string(config).map_err(|e| Error::io(config, e))?;
            let raw = RawConfig::parse(&text)?;
            let base = config.parent().unwrap_or(Path::new(""));
            let cfg = Config::from_raw(&raw, base)?;
            sweep(
                &raw,
                base,
                param,
                values,
                *jobs,
                &out_dir(&cfg, out),
                *assert,
            )
        }
        Command::Analyze {
            config,
            energy,
            out,
            assert,
        } => {
            let cfg = Config::load(config)?;
            let text = std::fs::read_to_string(energy).map_err(|e| Error::io(energy, e))?;
            let trace = EnergyTrace::from_csv(&text)?;
            analyze(&cfg, &trace, out.as_deref(), *assert)
        }
        Command::Operator {
            config,
            pairs,
            seed,
            m,
            family,
            unshifted,
            out,
            assert,
        } => {
            let cfg = Config::load(config)?;
            let family = match family {
                Family::Generic => PairFamily::Generic,
                Family::TraceFree => PairFamily::TraceFree,
            };
            operator(
                &cfg,
                *pairs,
                *seed,
                *m,
                family,
                *unshifted,
                &out_dir(&cfg, out),
                *assert,
            )
        }
        Command::Resolvent {
            config,
            b,
            seed,
            m,
            out,
            assert,
        } => {
            let cfg = Config::load(config)?;
            resolvent(&cfg, *b, *seed, *m, &out_dir(&cfg, out), *assert)
        }
    }
}

fn out_dir(cfg: &Config, out: &Option<PathBuf>) -> PathBuf {
    out.clone()
        .unwrap_or_else(|| cfg.resolve_path(&cfg.output_dir))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn require_certificate(status: &CertificateStatus) -> Result<()> {
    match status {
        CertificateStatus::Issued(c) if c.passed() => Ok(()),
        CertificateStatus::Issued(_) => Err(Error::Certificate("decay certificate failed".into())),
        CertificateStatus::Withheld(why) => {
            Err(Error::Certificate(format!("no decay certificate: {why}")))
        }
    }
}

/// Grid, tensors and assumption report; geometry failures become failed checks.
struct Setup {
    grid: YeeGrid,
    eps: TensorField,
    mu: TensorField,
    report: MaterialReport,
    multiplier: Option<MultiplierField>,
}

fn setup(cfg: &Config) -> Result<Setup> {
    let domain = cfg.box_domain()?;
    let grid = build_grid(&domain)?;
    let eps = tensor(&grid, &cfg.eps_spec())?;
    let mu = tensor(&grid, &cfg.mu_spec())?;
    let mut report = check_assumption_materials(&grid, &eps, &mu);
    let multiplier = match crate::domain::multiplier_field(&grid, domain.center) {
        Ok(m) => Some(m),
        Err(e) => {
            report.checks.push(crate::domain::CheckOutcome {
                name: "star_center".into(),
                passed: false,
                value: f64::NAN,
                location: None,
            });
            report.notes.push(e.to_string());
            None
        }
    };
    if let (Some(m), true) = (&multiplier, report.passed()) {
        report = report.merge(check_assumption_geometry(&grid, &eps, &mu, m));
    }
    Ok(Setup {
        grid,
        eps,
        mu,
        report,
        multiplier,
    })
}

fn check(cfg: &Config) -> Result<String> {
    let s = setup(cfg)?;
    let law = cfg.law()?;
    let k = law.constants();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "edges = {}\nfaces = {}\nboundary_samples = {}",
        s.grid.edge_count(),
        s.grid.face_count(),
        s.grid.samples.len()
    );
    out.push_str(&s.report.to_string());
    let _ = writeln!(
        out,
        "c1 = {}\nc2 = {}\ngamma1 = {}\ngamma2 = {}",
        fmt_num(k.c1),
        fmt_num(k.c2),
        fmt_num(law.gamma1),
        fmt_num(law.gamma2)
    );
    let xi = resolve_xi(&law, cfg.analysis.xi);
    match &xi {
        Ok((_, Some(d))) => {
            let _ = writeln!(
                out,
                "xi = {}\nxi_interval_low = {}\nxi_interval_high = {}\nc1E = {}\nc2E = {}",
                fmt_num(d.xi),
                fmt_num(d.interval.0),
                fmt_num(d.interval.1),
                fmt_num(d.c1e),
                fmt_num(d.c2e)
            );
        }
        Ok((x, None)) if law.is_pmc() => {
            let _ = writeln!(out, "xi = {}\nxi_status = no feedback", fmt_num(*x));
        }
        Ok((x, None)) => {
            let _ = writeln!(
                out,
                "xi = {}\nxi_status = outside the admissible interval; no decay certificate",
                fmt_num(*x)
            );
        }
        Err(e) => {
            let _ = writeln!(out, "xi_status = {e}");
        }
    }
    if !s.report.passed() {
        print!("{out}");
        let list: Vec<String> = s.report.failures().map(|c| c.name.clone()).collect();
        return Err(Error::Assumption(format!(
            "assumption checks failed: {}",
            list.join(", ")
        )));
    }
    if let Err(e) = xi {
        print!("{out}");
        return Err(e);
    }
    Ok(out)
}

/// Simulates `cfg`, writes outputs into `dir`, returns the summary text and certificate status.
fn run_to(cfg: &Config, dir: &Path) -> Result<(String, CertificateStatus, Classification)> {
    let sim = Simulation::new(&cfg.scenario()?)?;
    let law = sim.law().clone();
    let multiplier = sim.multiplier.clone();
    let output = sim.run()?;
    write(dir, "resolved.cfg", &cfg.echo())?;
    write(dir, "energy.csv", &output.trace.to_csv())?;
    if let Some(d) = &output.dumps {
        write(dir, "boundary_trace.csv", d)?;
    }
    let status = certify(
        cfg,
        &output.trace,
        &law,
        &output.report,
        multiplier.as_ref(),
        output.dissipation.as_ref(),
    );
    let class = classify(&output.trace);
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "steps = {}\nrecords = {}\ndt = {}\ndt_raw = {}\ndelay_depth = {}\nxi = {}\nE_xi_start = {}\nE_xi_end = {}",
        output.state.step,
        output.trace.rows.len(),
        fmt_num(output.timestep.dt),
        fmt_num(output.timestep.dt_raw),
        output.timestep.depth,
        fmt_num(output.xi),
        fmt_num(output.trace.rows.first().map_or(0.0, |r| r.e_xi)),
        fmt_num(output.trace.rows.last().map_or(0.0, |r| r.e_xi)),
    );
    summary.push_str(&report::classification_text(&class));
    summary.push_str(&report::certificate_text(&status));
    write(dir, "summary.txt", &summary)?;
    Ok((summary, status, class))
}

struct SweepRow {
    value: f64,
    class: Classification,
    certificate: &'static str,
}

fn sweep(
    raw: &RawConfig,
    base: &Path,
    param: &str,
    values: &[f64],
    jobs: usize,
    dir: &Path,
    assert: bool,
) -> Result<String> {
    if jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let configs = values
        .iter()
        .map(|&v| {
            let mut r = raw.clone();
            r.set_numeric(param, v)?;
            let mut cfg = Config::from_raw(&r, base)?;
            // Runs beyond the decay hypothesis still execute, at the interval-midpoint formula, without a certificate.
            let law = cfg.law()?;
            let k = law.constants();
            if cfg.analysis.xi == XiMode::Auto
                && !law.is_pmc()
                && law.gamma1 * k.c1 <= law.gamma2 * k.c2
            {
                cfg.analysis.xi = XiMode::Explicit(law.gamma1 * k.c1 / 2.0);
            }
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let rows: Vec<Result<SweepRow>> = pool.install(|| {
        configs
            .par_iter()
            .zip(values.par_iter())
            .enumerate()
            .map(|(i, (cfg, &value))| {
                let sub = dir.join(format!("run_{i:03}"));
                match run_to(cfg, &sub) {
                    Ok((_, status, class)) => {
                        let certificate = match &status {
                            CertificateStatus::Issued(c) if c.passed() => "pass",
                            CertificateStatus::Issued(_) => "FAIL",
                            CertificateStatus::Withheld(_) => "none",
                        };
                        Ok(SweepRow {
                            value,
                            class,
                            certificate,
                        })
                    }
                    // A blow-up is an observation, not a sweep failure.
                    Err(Error::Numerical(msg)) => {
                        write(&sub, "resolved.cfg", &cfg.echo())?;
                        write(
                            &sub,
                            "summary.txt",
                            &format!("classification = unstable\nfailure = {msg}\n"),
                        )?;
                        let class = Classification {
                            fit: None,
                            growth: f64::INFINITY,
                            label: "unstable",
                        };
                        Ok(SweepRow {
                            value,
                            class,
                            certificate: "none",
                        })
                    }
                    Err(e) => Err(e),
                }
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("value,lambda_hat,r2,classification\n");
    let mut text = String::new();
    for r in &rows {
        let (l, r2) = r
            .class
            .fit
            .map_or((f64::NAN, f64::NAN), |f| (f.lambda, f.r2));
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_num(r.value),
            fmt_num(l),
            fmt_num(r2),
            r.class.label
        );
        let _ = writeln!(
            text,
            "{param} = {}: {} (certificate {})",
            fmt_num(r.value),
            r.class.label,
            r.certificate
        );
    }
    write(dir, "sweep_summary.csv", &csv)?;
    if assert && rows.iter().any(|r| r.certificate == "FAIL") {
        print!("{text}");
        return Err(Error::Certificate(
            "a sweep member failed its decay certificate".into(),
        ));
    }
    Ok(text)
}

fn analyze(cfg: &Config, trace: &EnergyTrace, out: Option<&Path>, assert: bool) -> Result<String> {
    let s = setup(cfg)?;
    if !s.report.passed() && !cfg.run.unsafe_run {
        let list: Vec<String> = s.report.failures().map(|c| c.name.clone()).collect();
        return Err(Error::Assumption(format!(
            "assumption checks failed: {}",
            list.join(", ")
        )));
    }
    let law = cfg.law()?;
    let (_, dissipation) = resolve_xi(&law, cfg.analysis.xi)?;
    let status = certify(
        cfg,
        trace,
        &law,
        &s.report,
        s.multiplier.as_ref(),
        dissipation.as_ref(),
    );
    let mut text = report::classification_text(&classify(trace));
    text.push_str(&report::certificate_text(&status));
    if let Some(dir) = out {
        write(dir, "certificate.txt", &text)?;
    }
    if assert {
        print!("{text}");
        require_certificate(&status)?;
        return Ok(String::new());
    }
    Ok(text)
}

fn lab(cfg: &Config, m: usize) -> Result<OperatorLab> {
    let s = setup(cfg)?;
    let law = cfg.law()?;
    if law.is_pmc() {
        return Err(Error::Config("the operator study needs gamma1 > 0".into()));
    }
    OperatorLab::new(s.grid, &s.eps, &s.mu, law, m)
}

#[allow(clippy::too_many_arguments)]
fn operator(
    cfg: &Config,
    pairs: usize,
    seed: u64,
    m: usize,
    family: PairFamily,
    unshifted: bool,
    dir: &Path,
    assert: bool,
) -> Result<String> {
    let lab = lab(cfg, m)?;
    let law = &lab.law;
    let c = law.constants();
    let mut k: GeneratorConstants =
        generator_constants(law.gamma1, law.gamma2, c.c1, c.c2, law.tau)?;
    if unshifted {
        k.c_shift = 0.0;
    }
    let rep = monotonicity_test_family(&lab, pairs, seed, &k, family);
    write(dir, "monotonicity.csv", &rep.to_csv())?;
    let summary = rep.summary();
    write(dir, "monotonicity.txt", &summary)?;
    if assert && !rep.passed {
        print!("{summary}");
        return Err(Error::Certificate(format!(
            "{} negative pairings",
            rep.negatives
        )));
    }
    Ok(summary)
}

fn resolvent(
    cfg: &Config,
    b: f64,
    seed: u64,
    m: usize,
    dir: &Path,
    assert: bool,
) -> Result<String> {
    let lab = lab(cfg, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = lab.random_data(&mut rng);
    let o = resolvent_solve(&lab, &f, b)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "b = {}\nseed = {seed}\nresidual = {}\ne_residual = {}\nh_residual = {}\nz_mild_residual = {}\nz_strong_residual = {}\nouter_iterations = {}\npenalty = {}\ndiv_mismatch = {}",
        fmt_num(b),
        fmt_num(o.residual),
        fmt_num(o.e_residual),
        fmt_num(o.h_residual),
        fmt_num(o.z_mild_residual),
        fmt_num(o.z_strong_residual),
        o.outer_iterations,
        fmt_num(o.penalty),
        fmt_num(o.div_mismatch)
    );
    let hist: Vec<String> = o.history.iter().map(|v| fmt_num(*v)).collect();
    let _ = writeln!(s, "history = {}", hist.join(" "));
    write(dir, "resolvent.txt", &s)?;
    if assert && !(o.residual <= RESOLVENT_ASSERT_TOL) {
        print!("{s}");
        return Err(Error::Certificate(format!(
            "resolvent residual {:e} exceeds {RESOLVENT_ASSERT_TOL:e}",
            o.residual
        )));
    }
    Ok(s)
}
