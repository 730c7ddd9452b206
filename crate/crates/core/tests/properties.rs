//! Property tests for the invariants the solver and the analysis rely on.

use delayed_maxwell::analysis::{energies, fit_decay};
use delayed_maxwell::cli::Config;
use delayed_maxwell::delay_line::init_history;
use delayed_maxwell::delay_line::HistorySpec;
use delayed_maxwell::domain::{build_grid, BoxDomain, TensorField, Vec3};
use delayed_maxwell::feedback::{ensure_tangential, FeedbackLaw};
use delayed_maxwell::operator_lab::{form_apply, resolvent_solve, OperatorLab};
use delayed_maxwell::solver::{
    compute_dt, run, InitialCondition, RunLength, Scenario, Simulation, Weighting, XiMode,
};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pulse(amplitude: f64) -> InitialCondition {
    InitialCondition::Gaussian {
        center: [0.5, 0.5, 0.5],
        width: 0.25,
        amplitude,
        polarization: [0.0, 0.0, 1.0],
        project: true,
    }
}

fn law_strategy() -> impl Strategy<Value = FeedbackLaw> {
    (0.5f64..2.0, 0.0f64..0.9, any::<bool>(), 0.0f64..1.0).prop_map(|(g1, frac, saturating, b)| {
        // gamma2 c2 < gamma1 c1 keeps the decay hypothesis; for the saturating law c1 = a, c2 = a + b.
        if saturating {
            FeedbackLaw::saturating(1.0, b, g1, frac * g1 / (1.0 + b), 0.25).unwrap()
        } else {
            FeedbackLaw::linear(1.0, g1, frac * g1, 0.25).unwrap()
        }
    })
}

fn vec3() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-3.0f64..3.0).prop_map(|a| Vec3::new(a[0], a[1], a[2]))
}

fn flat_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn weighted_energy_is_equivalent_to_the_unit_weight_energy(xi in 0.05f64..5.0, law in law_strategy()) {
        let mut sc = Scenario::unit_cube(8, law);
        sc.initial = pulse(1.0);
        sc.xi = XiMode::Explicit(xi);
        let mut sim = Simulation::new(&sc).unwrap();
        for step in 0..40 {
            sim.step().unwrap();
            if step % 8 != 7 {
                continue;
            }
            let tau = sim.scenario.law.tau;
            let at = |x: f64| energies(&sim.grid, &sim.mass, &sim.stepper, &sim.state, &sim.ring, x, tau, Weighting::Weighted).e_xi;
            let (ex, e1) = (at(xi), at(1.0));
            let tol = 1e-14 * e1;
            prop_assert!(xi.min(1.0) * e1 <= ex + tol);
            prop_assert!(ex <= xi.max(1.0) * e1 + tol);
        }
    }

    #[test]
    fn weighted_energy_never_increases_under_the_decay_hypothesis(law in law_strategy()) {
        let mut sc = Scenario::unit_cube(8, law);
        sc.initial = pulse(1.0);
        sc.length = RunLength::Steps(120);
        let out = run(&sc).unwrap();
        for w in out.trace.rows.windows(2) {
            prop_assert!(w[1].e_xi - w[0].e_xi <= 1e-12 * out.trace.rows[0].e_xi, "{} -> {}", w[0].e_xi, w[1].e_xi);
        }
    }

    #[test]
    fn fitted_rate_is_amplitude_invariant_for_linear_feedback(amplitude in 0.01f64..100.0) {
        let mut sc = Scenario::unit_cube(8, FeedbackLaw::linear(1.0, 1.0, 0.5, 0.25).unwrap());
        sc.length = RunLength::Time(4.0);
        sc.record_every = 4;
        sc.initial = pulse(1.0);
        let reference = run(&sc).unwrap().trace;
        sc.initial = pulse(amplitude);
        let scaled = run(&sc).unwrap().trace;
        let window = (1.0, 4.0);
        let a = fit_decay(&reference, window).unwrap().lambda;
        let b = fit_decay(&scaled, window).unwrap().lambda;
        prop_assert!((a - b).abs() <= 0.02 * a.abs(), "{a} vs {b}");
    }

    #[test]
    fn green_identity_holds_on_rectangular_boxes(
        lengths in prop::array::uniform3(0.5f64..2.0),
        cells in prop::array::uniform3(4usize..9),
        seed in any::<u64>(),
    ) {
        let grid = build_grid(&BoxDomain::new(lengths, cells, [0.0; 3]).unwrap()).unwrap();
        let eps = TensorField::identity(&grid);
        let mu = TensorField::identity(&grid);
        let lab = OperatorLab::new(grid, &eps, &mu, FeedbackLaw::linear(1.0, 1.0, 0.5, 0.25).unwrap(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (e, h) = lab.random_fields(&mut rng);
        let trace = lab.random_trace(&mut rng);
        prop_assert!(lab.green_residual(&e, &h, &trace) <= 1e-12);
    }

    #[test]
    fn boundary_form_is_strongly_monotone(law in law_strategy(), b in 0.5f64..4.0, seed in any::<u64>()) {
        let c = law.constants();
        let law_constants = (law.gamma1 * c.c1, law.gamma2 * c.c2);
        let lab = OperatorLab::unit_cube(5, law, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::INFINITY;
        for _ in 0..20 {
            let (e1, _) = lab.random_fields(&mut rng);
            let (e2, _) = lab.random_fields(&mut rng);
            let mut d = e1.clone();
            d.axpy(-1.0, &e2);
            let mut db = form_apply(&lab, &e1, b);
            db.axpy(-1.0, &form_apply(&lab, &e2, b));
            let ratio = flat_dot(&db.to_flat(), &d.to_flat()) / lab.wepsilon_norm_sq(&d);
            worst = worst.min(ratio);
        }
        // Each part of the norm is controlled by its own coefficient: b^2 for the mass, 1 for curl and
        // divergence, b (gamma1 c1 - gamma2 c2) for the trace.
        let k = law_constants;
        let floor = (b * b).min(1.0).min(b * (k.0 - k.1));
        prop_assert!(worst > 0.0 && worst >= floor * (1.0 - 1e-10), "c* = {worst}, floor = {floor}");
    }

    #[test]
    fn feedback_is_monotone_and_lipschitz(law in law_strategy(), v in vec3(), w in vec3()) {
        let k = law.constants();
        let d = v - w;
        let dg = law.eval_g(&v) - law.eval_g(&w);
        let n2 = d.norm_squared();
        prop_assert!(dg.dot(&d) >= k.c1 * n2 * (1.0 - 1e-12) - 1e-15);
        prop_assert!(dg.norm() <= k.c2 * n2.sqrt() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn tangential_projection_is_tangential(v in vec3(), axis in 0usize..3, sign in prop::bool::ANY) {
        let mut nu = Vec3::zeros();
        nu[axis] = if sign { 1.0 } else { -1.0 };
        let t = v.cross(&nu);
        prop_assert!(ensure_tangential(&t, &nu, "trace").is_ok());
        // nu x (E x nu) recovers the tangential part of E.
        let tangential = v - nu * v.dot(&nu);
        prop_assert!((nu.cross(&t) - tangential).norm() <= 1e-14 * (1.0 + v.norm()));
    }

    #[test]
    fn ring_delivers_the_trace_pushed_n_steps_earlier(n in 1usize..12, pushes in 1usize..40, seed in any::<u64>()) {
        let grid = build_grid(&BoxDomain::unit_cube(4)).unwrap();
        let mut ring = init_history(&HistorySpec::Zero, n, &grid, &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pushed: Vec<Vec<Vec3>> = Vec::new();
        for _ in 0..pushes {
            let row: Vec<Vec3> = grid
                .samples
                .iter()
                .map(|s| {
                    let v = Vec3::new(rand::Rng::gen_range(&mut rng, -1.0..1.0), rand::Rng::gen_range(&mut rng, -1.0..1.0), rand::Rng::gen_range(&mut rng, -1.0..1.0));
                    v.cross(&s.normal)
                })
                .collect();
            ring.advance(&row).unwrap();
            pushed.push(row);
            let k = pushed.len();
            prop_assert_eq!(ring.z0(), &pushed[k - 1][..]);
            if k > n {
                prop_assert_eq!(ring.z1(), &pushed[k - 1 - n][..]);
            } else {
                prop_assert!(ring.z1().iter().all(|v| *v == Vec3::zeros()));
            }
            for (v, s) in ring.z1().iter().zip(&grid.samples) {
                prop_assert!(v.dot(&s.normal).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn configuration_echo_round_trips(
        gamma1 in 1e-3f64..1e3,
        gamma2 in 0.0f64..1e3,
        tau in 1e-3f64..10.0,
        t_end in 1e-2f64..1e3,
        width in 1e-3f64..1.0,
    ) {
        let text = format!(
            "[domain]\nnx = 8\nny = 8\nnz = 8\n[feedback]\ngamma1 = {gamma1:e}\ngamma2 = {gamma2:e}\ntau = {tau:e}\n[initial]\npreset = gaussian\nwidth = {width:e}\n[run]\nt_end = {t_end:e}\n"
        );
        let dir = std::env::temp_dir();
        let first = Config::parse(&text, &dir).unwrap();
        let echo = first.echo();
        let second = Config::parse(&echo, &dir).unwrap();
        prop_assert_eq!(&echo, &second.echo());
        prop_assert_eq!(first.feedback.gamma1.to_bits(), second.feedback.gamma1.to_bits());
        prop_assert_eq!(first.run.t_end.to_bits(), second.run.t_end.to_bits());
    }
}

#[test]
fn resolvent_solution_satisfies_the_field_equations() {
    let law = FeedbackLaw::saturating(1.0, 1.0, 1.0, 0.5, 0.25).unwrap();
    let lab = OperatorLab::unit_cube(5, law, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = lab.random_data(&mut rng);
    let b = 2.0;
    let out = resolvent_solve(&lab, &f, b).unwrap();
    // b V + A V = F on the field components, where A is the generator.
    let mut lhs = lab.apply_generator(&out.v).unwrap();
    lhs.axpy(b, &out.v);
    let mut de = lhs.e.clone();
    de.axpy(-1.0, &f.e);
    let mut dh = lhs.h.clone();
    dh.axpy(-1.0, &f.h);
    let scale = f.e.max_abs().max(f.h.max_abs());
    assert!(
        de.max_abs() <= 1e-7 * scale,
        "E mismatch {}",
        de.max_abs() / scale
    );
    assert!(
        dh.max_abs() <= 1e-7 * scale,
        "H mismatch {}",
        dh.max_abs() / scale
    );
}

#[test]
fn runs_are_bitwise_deterministic() {
    let mut sc = Scenario::unit_cube(
        8,
        FeedbackLaw::saturating(1.0, 0.5, 1.0, 0.5, 0.25).unwrap(),
    );
    sc.initial = pulse(1.0);
    sc.length = RunLength::Steps(150);
    let a = run(&sc).unwrap();
    let b = run(&sc).unwrap();
    assert_eq!(a.trace.to_csv(), b.trace.to_csv());
    assert_eq!(a.state.e.to_flat(), b.state.e.to_flat());
}

#[test]
fn exceeding_the_cfl_limit_diverges() {
    let grid = build_grid(&BoxDomain::unit_cube(8)).unwrap();
    let id = TensorField::identity(&grid);
    let dt_raw = compute_dt(&grid, &id, &id, 1.0, 1.0).unwrap().dt_raw;
    let blow_up = |safety: f64| -> bool {
        // tau is a whole number of target steps so dt = safety * dt_raw exactly.
        let mut sc = Scenario::unit_cube(8, FeedbackLaw::pmc(10.0 * safety * dt_raw).unwrap());
        sc.initial = pulse(1.0);
        sc.cfl_safety = safety;
        sc.cfl_override = true;
        let mut sim = Simulation::new(&sc).unwrap();
        assert!((sim.timestep.dt - safety * dt_raw).abs() <= 1e-12 * dt_raw);
        let e0 = sim.energies().e_weighted;
        for _ in 0..2000 {
            let e = sim.step().map(|()| sim.energies().e_weighted);
            if e.map_or(true, |e| e.is_nan() || e > 10.0 * e0) {
                return true;
            }
        }
        false
    };
    assert!(blow_up(1.05));
    assert!(!blow_up(0.95));
}

/// Largest nodewise gap between the reconstructed delay profile and the closed form for `F3 = sin(pi s) v`.
fn z_reconstruction_error(m: usize) -> f64 {
    let law = FeedbackLaw::linear(1.0, 1.0, 0.5, 0.25).unwrap();
    let lab = OperatorLab::unit_cube(5, law, m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut f = lab.random_data(&mut rng);
    let dirs: Vec<Vec3> = lab
        .grid
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| Vec3::new(1.0 + i as f64 * 0.01, -0.5, 0.25).cross(&s.normal))
        .collect();
    let s = lab.s_nodes();
    for (j, row) in f.z.iter_mut().enumerate() {
        for (z, v) in row.iter_mut().zip(&dirs) {
            *z = v * (std::f64::consts::PI * s[j]).sin();
        }
    }
    let b = 2.0;
    let tau = lab.law.tau;
    let out = resolvent_solve(&lab, &f, b).unwrap();
    let w = lab.tangential_trace(&out.v.e);
    let k = tau * b;
    let pi = std::f64::consts::PI;
    let mut worst: f64 = 0.0;
    for (j, &sj) in s.iter().enumerate() {
        // tau * int_0^s e^{-k (s - r)} sin(pi r) dr in closed form
        let integral = tau * (k * (pi * sj).sin() - pi * (pi * sj).cos() + pi * (-k * sj).exp()) / (k * k + pi * pi);
        for i in 0..lab.samples() {
            let exact = w[i] * (-k * sj).exp() + dirs[i] * integral;
            worst = worst.max((out.v.z[j][i] - exact).norm());
        }
    }
    worst
}

#[test]
fn delay_profile_reconstruction_converges_in_the_s_grid() {
    let coarse = z_reconstruction_error(8);
    let fine = z_reconstruction_error(16);
    assert!(fine > 0.0 && coarse / fine >= 2.0, "coarse {coarse:e}, fine {fine:e}");
}
