//! End-to-end acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.
//! Run with `cargo test --test acceptance -- --nocapture --test-threads=1`.

use std::sync::OnceLock;
use std::time::Instant;

use delayed_maxwell::analysis::{
    appendix_analyze, decay_rate, fit_decay, lemma31_check, lemma32_check, observability_constants,
};
use delayed_maxwell::domain::MaterialPreset;
use delayed_maxwell::error::Error;
use delayed_maxwell::feedback::FeedbackLaw;
use delayed_maxwell::operator_lab::{
    generator_constants, monotonicity_test, monotonicity_test_family, resolvent_solve,
    GeneratorConstants, OperatorLab, PairFamily, RESOLVENT_MAX_OUTER,
};
use delayed_maxwell::solver::{
    interior_div_max, run, InitialCondition, MaterialSpec, RunLength, RunOutput, Scenario,
    Simulation, XiMode,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, pass: bool, detail: String) {
    println!(
        "criterion {n}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn pulse(width: f64) -> InitialCondition {
    InitialCondition::Gaussian {
        center: [0.5, 0.5, 0.5],
        width,
        amplitude: 1.0,
        polarization: [0.0, 0.0, 1.0],
        project: true,
    }
}

fn pmc_scenario() -> Scenario {
    let mut sc = Scenario::unit_cube(16, FeedbackLaw::pmc(0.25).unwrap());
    sc.cfl_safety = 0.5;
    sc.length = RunLength::Steps(1000);
    sc
}

/// Linear feedback, gamma1 = 1, gamma2 = 0.5, xi = 0.5, 2000 steps on 16^3.
fn dissipative_run() -> &'static RunOutput {
    static RUN: OnceLock<RunOutput> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut sc = Scenario::unit_cube(16, FeedbackLaw::linear(1.0, 1.0, 0.5, 0.25).unwrap());
        sc.initial = pulse(0.2);
        sc.xi = XiMode::Explicit(0.5);
        sc.length = RunLength::Steps(2000);
        run(&sc).expect("dissipative run")
    })
}

#[test]
fn criterion_01_pmc_conservation() {
    let start = Instant::now();
    let out = run(&pmc_scenario()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let e0 = out.trace.rows[0].e_weighted;
    let drift = out
        .trace
        .rows
        .iter()
        .map(|r| (r.e_weighted - e0).abs() / e0)
        .fold(0.0, f64::max);
    let pass = drift <= 1e-4 && secs <= 10.0;
    report(
        1,
        pass,
        format!("relative drift {drift:.3e} <= 1e-4, runtime {secs:.2} s <= 10 s"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_divergence_conservation() {
    let start = Instant::now();
    let mut sc = pmc_scenario();
    sc.eps = MaterialSpec::Preset(MaterialPreset::Ramp {
        base: [1.0, 1.0, 1.0],
        slope: 1.0,
    });
    sc.initial = InitialCondition::Gaussian {
        center: [0.45, 0.5, 0.55],
        width: 0.15,
        amplitude: 1.0,
        polarization: [1.0, 0.5, 0.25],
        project: false,
    };
    let mut sim = Simulation::new(&sc).unwrap();
    let div0 = delayed_maxwell::solver::div_eps(&sim.grid, &sim.mass, &sim.state.e);
    let interior: Vec<bool> = sim
        .grid
        .node_shape
        .iter()
        .map(|p| sim.grid.is_interior_node(p))
        .collect();
    let hmin = sim.grid.h.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        sim.step().unwrap();
        let div = delayed_maxwell::solver::div_eps(&sim.grid, &sim.mass, &sim.state.e);
        let scale = sim.state.e.max_abs() * sim.eps.lambda_max / hmin;
        let d = div
            .iter()
            .zip(&div0)
            .zip(&interior)
            .filter(|(_, i)| **i)
            .map(|((a, b), _)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(d / scale);
    }
    let secs = start.elapsed().as_secs_f64();
    let initial_div = interior_div_max(&sim.grid, &sim.mass, &sim.state.e);
    let pass = worst <= 1e-12 && secs <= 10.0;
    report(
        2,
        pass,
        format!("interior div drift {worst:.3e} <= 1e-12 relative (unprojected div {initial_div:.3e}), runtime {secs:.2} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_dissipativity() {
    let out = dissipative_run();
    let tol = 1e-12;
    let worst = out
        .trace
        .rows
        .windows(2)
        .map(|w| w[1].e_xi - w[0].e_xi)
        .fold(f64::NEG_INFINITY, f64::max);
    let pass = worst <= tol;
    report(
        3,
        pass,
        format!("largest record-to-record increase of E_xi {worst:.3e} <= {tol:e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_two_sided_bound() {
    let out = dissipative_run();
    let k = out.dissipation.expect("xi admissible");
    assert_eq!((k.c1e, k.c2e), (0.25, 1.75));
    let rep = lemma31_check(&out.trace, &k, 1.05);
    let pass = rep.holds() && rep.pairs >= 10_000;
    report(
        4,
        pass,
        format!(
            "{} pairs, upper margin {:.3e}, lower margin {:.3e} at slack 1.05",
            rep.pairs, rep.upper_margin, rep.lower_margin
        ),
    );
    assert!(pass);
}

fn observability(out: &RunOutput) -> delayed_maxwell::analysis::ObservabilityConstants {
    let sc = Scenario::unit_cube(16, FeedbackLaw::linear(1.0, 1.0, 0.5, 0.25).unwrap());
    let sim = Simulation::new(&sc).unwrap();
    observability_constants(
        &out.report,
        sim.multiplier.as_ref().unwrap(),
        &out.dissipation.unwrap(),
        &sc.law,
        sc.law.tau,
        sc.weighting,
    )
    .unwrap()
}

#[test]
fn criterion_05_observability() {
    let out = dissipative_run();
    let oc = observability(out);
    let t_end = out.trace.rows.last().unwrap().t;
    let rep = lemma32_check(&out.trace, &oc, t_end, 1.10);
    report(
        5,
        rep.holds,
        format!(
            "T = {t_end:.4}, LHS/RHS = {:.4} with c = {:.4}, c_T = {:.4}, slack 1.10",
            rep.ratio, oc.c, oc.c_t
        ),
    );
    assert!(rep.holds);
}

#[test]
fn criterion_06_decay_reproduction() {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut lambdas = Vec::new();
    for gamma2 in [0.0, 0.25, 0.5] {
        // slope 0.1 mismatches the boundary impedance, so energy leaves over many reflections
        let mut sc = Scenario::unit_cube(16, FeedbackLaw::linear(0.1, 1.0, gamma2, 0.25).unwrap());
        sc.initial = pulse(0.2);
        sc.length = RunLength::Time(16.0);
        sc.record_every = 4;
        let out = run(&sc).unwrap();
        let t_end = out.trace.rows.last().unwrap().t;
        let fit = fit_decay(&out.trace, (t_end / 4.0, t_end)).unwrap();
        pass &= fit.lambda > 0.0 && fit.r2 >= 0.99;
        lambdas.push(fit.lambda);
        lines.push(format!(
            "gamma2 = {gamma2}: lambda = {:.4}, R2 = {:.4}",
            fit.lambda, fit.r2
        ));
    }
    let trend = lambdas.windows(2).all(|w| w[1] <= w[0]);
    report(
        6,
        pass,
        format!(
            "{}; lambda non-increasing in gamma2: {trend}",
            lines.join("; ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_certificate_pipeline() {
    let out = dissipative_run();
    let k = out.dissipation.unwrap();
    let oc = observability(out);
    let horizon = 1.25 * 4.0 * oc.c;
    let cert = appendix_analyze(
        &out.trace.times(),
        &out.trace.e_xi(),
        &out.trace.damping(),
        k.c1e,
        k.c2e,
        oc.c,
        oc.c_t,
        horizon,
    )
    .unwrap();
    let c_tilde = (oc.c_t + oc.c * k.c2e) / k.c1e;
    let gamma = c_tilde / (c_tilde + horizon / 2.0);
    let lambda = -gamma.ln() / horizon;
    let arith = (cert.gamma - gamma).abs() <= 1e-12 && (cert.lambda - lambda).abs() <= 1e-12;
    let (_, g_syn, l_syn) = decay_rate(0.0, 1.0, 1.0, 0.0, 4.0);
    let synthetic = (g_syn - 1.0 / 3.0).abs() <= 1e-15 && (l_syn - 3f64.ln() / 4.0).abs() <= 1e-15;
    let pass = cert.certified && arith && synthetic;
    report(
        7,
        pass,
        format!(
            "A1 {} A2 {} ({} windows, worst ratio {:.3}) envelope {}; gamma = {:.6}, lambda = {:.6e}; synthetic gamma = {g_syn}, lambda = {l_syn}",
            cert.a1_holds, cert.a2_holds, cert.a2_windows, cert.a2_worst_ratio, cert.bound_holds, cert.gamma, cert.lambda
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_shifted_monotonicity() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    let linear: fn(f64) -> FeedbackLaw = |g2| FeedbackLaw::linear(1.0, 1.0, g2, 0.25).unwrap();
    let saturating: fn(f64) -> FeedbackLaw =
        |g2| FeedbackLaw::saturating(1.0, 1.0, 1.0, g2, 0.25).unwrap();
    let laws = [("linear", linear), ("saturating", saturating)];
    for (name, make) in laws {
        for gamma2 in [0.5, 2.0] {
            let law = make(gamma2);
            let c = law.constants();
            let k = generator_constants(law.gamma1, law.gamma2, c.c1, c.c2, law.tau).unwrap();
            let lab = OperatorLab::unit_cube(8, law, 16).unwrap();
            let rep = monotonicity_test(&lab, 1000, 7, &k);
            let tf = monotonicity_test_family(&lab, 1000, 7, &k, PairFamily::TraceFree);
            pass &= rep.passed
                && rep.min_normalized >= -1e-10
                && tf.passed
                && tf.min_normalized >= -1e-10;
            lines.push(format!(
                "{name} gamma2 = {gamma2}: min {:.3e} (trace-free min {:.3e})",
                rep.min_normalized, tf.min_normalized
            ));
        }
    }
    let law = FeedbackLaw::linear(1.0, 1.0, 2.0, 0.25).unwrap();
    let k = generator_constants(1.0, 2.0, 1.0, 1.0, 0.25).unwrap();
    let unshifted = GeneratorConstants { c_shift: 0.0, ..k };
    let lab = OperatorLab::unit_cube(8, law, 16).unwrap();
    let neg = monotonicity_test_family(&lab, 1000, 7, &unshifted, PairFamily::TraceFree);
    let control = k.c_weight > 0.0 && neg.negatives > 0;
    let secs = start.elapsed().as_secs_f64();
    pass &= control && secs <= 60.0;
    report(
        8,
        pass,
        format!(
            "{}; unshifted control (trace-free pairs): {} negative pairings, min {:.3e}; runtime {secs:.1} s",
            lines.join("; "),
            neg.negatives,
            neg.min_normalized
        ),
    );
    assert!(pass);
}

/// Independent re-evaluation of `Z(s_j) = e^{-tau b s_j} (E x nu + tau int_0^{s_j} F3 e^{tau b r} dr)`.
fn z_oracle(
    lab: &OperatorLab,
    e: &delayed_maxwell::domain::EdgeField,
    f3: &[Vec<delayed_maxwell::domain::Vec3>],
    b: f64,
) -> Vec<Vec<delayed_maxwell::domain::Vec3>> {
    let tau = lab.law.tau;
    let m = lab.m;
    let mut out = Vec::new();
    for j in 0..=m {
        let sj = j as f64 / m as f64;
        let row = lab
            .grid
            .samples
            .iter()
            .enumerate()
            .map(|(i, smp)| {
                let mut t = delayed_maxwell::domain::Vec3::zeros();
                for &(axis, [a, c]) in &smp.edges {
                    t[axis] = 0.5 * (e.c[axis][a] + e.c[axis][c]);
                }
                let w = t.cross(&smp.normal);
                let mut acc = delayed_maxwell::domain::Vec3::zeros();
                for q in 0..j {
                    let (r0, r1) = (q as f64 / m as f64, (q + 1) as f64 / m as f64);
                    acc += (f3[q][i] * (tau * b * r0).exp() + f3[q + 1][i] * (tau * b * r1).exp())
                        * (0.5 / m as f64);
                }
                (w + acc * tau) * (-tau * b * sj).exp()
            })
            .collect();
        out.push(row);
    }
    out
}

#[test]
fn criterion_09_resolvent() {
    let b = 2.0;
    let lab =
        OperatorLab::unit_cube(8, FeedbackLaw::linear(1.0, 1.0, 0.5, 0.25).unwrap(), 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let f = lab.random_data(&mut rng);
    let lin = resolvent_solve(&lab, &f, b).unwrap();
    let oracle = z_oracle(&lab, &lin.v.e, &f.z, b);
    let z_err = lin
        .v
        .z
        .iter()
        .flatten()
        .zip(oracle.iter().flatten())
        .map(|(a, o)| (a - o).amax())
        .fold(0.0, f64::max);
    let sat_lab = OperatorLab::unit_cube(
        8,
        FeedbackLaw::saturating(1.0, 1.0, 1.0, 0.5, 0.25).unwrap(),
        16,
    )
    .unwrap();
    let sat = resolvent_solve(&sat_lab, &f, b);
    let (sat_ok, sat_detail) = match &sat {
        Ok(o) => (
            o.outer_iterations <= RESOLVENT_MAX_OUTER && o.residual <= 1e-8,
            format!(
                "saturating: {} outer iterations, residual {:.3e}",
                o.outer_iterations, o.residual
            ),
        ),
        Err(e) => (false, format!("saturating failed: {e}")),
    };
    let pass = lin.residual <= 1e-8 && z_err <= 1e-12 && sat_ok;
    report(
        9,
        pass,
        format!(
            "linear residual {:.3e}, Z formula mismatch {z_err:.3e}, finite-difference Z mismatch {:.3e}; {sat_detail}",
            lin.residual, lin.z_strong_residual
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_green_identity() {
    let lab =
        OperatorLab::unit_cube(8, FeedbackLaw::linear(1.0, 1.0, 0.5, 0.25).unwrap(), 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (e, h) = lab.random_fields(&mut rng);
        let trace = lab.random_trace(&mut rng);
        worst = worst.max(lab.green_residual(&e, &h, &trace));
    }
    let pass = worst <= 1e-10;
    report(
        11,
        pass,
        format!("worst relative residual over 100 pairs {worst:.3e} <= 1e-10"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_hypothesis_gate() {
    let dir = tempfile::TempDir::new().unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    // Command-line gate on shipped laws at and beyond the boundary gamma1 c1 = gamma2 c2.
    let cases = [
        (
            "linear_equal",
            "kind = linear\na = 1\ngamma1 = 1\ngamma2 = 1",
        ),
        (
            "linear_strong_delay",
            "kind = linear\na = 1\ngamma1 = 0.5\ngamma2 = 1",
        ),
        (
            "saturating",
            "kind = saturating\na = 1\nb = 1\ngamma1 = 1\ngamma2 = 1",
        ),
    ];
    for (name, feedback) in cases {
        let base = format!("[domain]\nnx = 8\nny = 8\nnz = 8\n[feedback]\n{feedback}\ntau = 0.25\n[run]\nt_end = 1\n");
        let auto = dir.path().join(format!("{name}_auto.cfg"));
        std::fs::write(&auto, &base).unwrap();
        let o = std::process::Command::new(env!("CARGO_BIN_EXE_delayed-maxwell"))
            .args([
                "run",
                auto.to_str().unwrap(),
                "--out",
                dir.path().join(name).to_str().unwrap(),
            ])
            .output()
            .unwrap();
        let err = String::from_utf8_lossy(&o.stderr);
        let refused = o.status.code() == Some(3) && err.contains("gamma1 c1 > gamma2 c2");
        let explicit = dir.path().join(format!("{name}_explicit.cfg"));
        std::fs::write(&explicit, format!("{base}[analysis]\nxi = 0.4\n")).unwrap();
        let o = std::process::Command::new(env!("CARGO_BIN_EXE_delayed-maxwell"))
            .args([
                "run",
                explicit.to_str().unwrap(),
                "--out",
                dir.path().join(name).to_str().unwrap(),
            ])
            .output()
            .unwrap();
        let out = String::from_utf8_lossy(&o.stdout);
        let withheld = o.status.code() == Some(0) && out.contains("certificate = none");
        pass &= refused && withheld;
        lines.push(format!(
            "{name}: auto exit 3 {refused}, explicit runs without certificate {withheld}"
        ));
    }
    // Library gate over random violating parameters.
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut gated = 0;
    for _ in 0..40 {
        let a: f64 = rng.gen_range(0.2..3.0);
        let b: f64 = rng.gen_range(0.0..2.0);
        let gamma1: f64 = rng.gen_range(0.1..2.0);
        let saturating = rng.gen_bool(0.5);
        let c2 = if saturating { a + b } else { a };
        // gamma2 c2 >= gamma1 c1 with c1 = a.
        let gamma2 = gamma1 * a / c2 * rng.gen_range(1.0..3.0);
        let law = if saturating {
            FeedbackLaw::saturating(a, b, gamma1, gamma2, 0.25).unwrap()
        } else {
            FeedbackLaw::linear(a, gamma1, gamma2, 0.25).unwrap()
        };
        let mut sc = Scenario::unit_cube(6, law);
        sc.length = RunLength::Steps(4);
        let refused = matches!(Simulation::new(&sc), Err(Error::Assumption(m)) if m.contains("gamma1 c1 > gamma2 c2"));
        sc.xi = XiMode::Explicit(gamma1 * a / 2.0);
        let withheld = run(&sc).is_ok_and(|o| o.dissipation.is_none());
        if refused && withheld {
            gated += 1;
        }
    }
    pass &= gated == 40;
    report(
        10,
        pass,
        format!(
            "{}; random violating laws gated {gated}/40",
            lines.join("; ")
        ),
    );
    assert!(pass);
}
