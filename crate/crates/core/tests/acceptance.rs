//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `--nocapture` to see them live). Tolerances are pinned in the
//! assertions.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use saaoc::problems::{make_oscillator, make_vaccination, OscillatorConfig, VaccinationConfig};
use saaoc::study::StudyOutput;
use saaoc::theory::{covering_bound_log2, entropy_integral_bound, radius, rate_bound, RateKind, TheoryConstants};
use saaoc::{
    eval_objective_sample, gradient_sample, integrate_forward, prox_psi_alpha, run_study,
    sample_iid, solve, Control, ControlGrid, EnsembleProblem, ParamBox, ProblemDef,
    RegularizerSpec, SolverOptions, StepMode, StudyConfig,
};

fn pass(criterion: &str, detail: String) {
    println!("acceptance {criterion}: PASS ({detail})");
}

/// The full-scale oscillator study shared by the two rate criteria:
/// N ∈ {4, …, 256}, 50 replications, fixed seed, default solver.
fn oscillator_study() -> &'static StudyOutput {
    static STUDY: OnceLock<StudyOutput> = OnceLock::new();
    STUDY.get_or_init(|| {
        let mut cfg = StudyConfig::oscillator();
        cfg.seed = 1;
        run_study(&cfg, None).expect("oscillator study")
    })
}

#[test]
fn criterion_01_value_rate_reproduction() {
    let study = oscillator_study();
    let slope = study.value_fit.slope;
    assert!(
        (-0.65..=-0.35).contains(&slope),
        "value slope {slope} outside [-0.65, -0.35]"
    );
    assert!(study.records.iter().all(|r| r.status.is_ok()), "some study cells failed");
    let first = study.summary.first().unwrap();
    let last = study.summary.last().unwrap();
    assert!(last.mean_value_err < first.mean_value_err, "no decay from N=4 to N=256");
    pass("01 value-rate", format!("slope {slope:.4}"));
}

#[test]
fn criterion_02_criticality_rate_reproduction() {
    let study = oscillator_study();
    let slope = study.crit_fit.slope;
    assert!(
        (-0.65..=-0.35).contains(&slope),
        "criticality slope {slope} outside [-0.65, -0.35]"
    );
    pass("02 criticality-rate", format!("slope {slope:.4}"));
}

#[test]
fn criterion_03_gradient_matches_finite_differences() {
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut check = |def: &ProblemDef, grid: ControlGrid, lo: f64, hi: f64, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = sample_iid(def.param_box(), 10, seed).unwrap();
        for xi in samples.iter_points() {
            let mut u = Control::zeros(grid);
            for v in u.values_mut() {
                *v = lo + (hi - lo) * rng.random::<f64>();
            }
            let grad = gradient_sample(def, &u, xi).unwrap();
            let dt = grid.dt();
            let mut fd_vals = Vec::with_capacity(u.values().len());
            for idx in 0..u.values().len() {
                let mut up = u.clone();
                up.values_mut()[idx] += h;
                let mut dn = u.clone();
                dn.values_mut()[idx] -= h;
                let fp = eval_objective_sample(def, &up, xi).unwrap();
                let fm = eval_objective_sample(def, &dn, xi).unwrap();
                fd_vals.push((fp - fm) / (2.0 * h) / dt);
            }
            let fd = Control::from_values(grid, fd_vals).unwrap();
            let rel = grad.distance(&fd) / grad.weighted_norm().max(1e-12);
            worst = worst.max(rel);
            assert!(rel <= 1e-5, "relative gradient error {rel}");
        }
    };

    let (osc, _) = make_oscillator(&OscillatorConfig::default()).unwrap();
    check(&osc, ControlGrid::new(1.0, 50, 2).unwrap(), -0.8, 0.8, 101);
    let (vax, _) = make_vaccination(&VaccinationConfig::default()).unwrap();
    check(&vax, ControlGrid::new(20.0, 50, 1).unwrap(), 0.05, 0.85, 202);
    pass("03 gradient-fd", format!("worst relative error {worst:.2e}"));
}

#[test]
fn criterion_04_prox_brute_force_and_nonexpansiveness() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let grid = ControlGrid::new(1.0, 1, 1).unwrap();

    // 1000 random (v, γ, β, box) instances against grid minimization of
    // ½(x−v)² + γβ|x| + I_[lo,hi], grid step 5e-5.
    let mut worst_gap = 0.0f64;
    for _ in 0..1000 {
        let a = -2.0 + 4.0 * rng.random::<f64>();
        let b = -2.0 + 4.0 * rng.random::<f64>();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let gamma = 0.05 + 2.0 * rng.random::<f64>();
        let beta = 1.5 * rng.random::<f64>();
        let v = -3.0 + 6.0 * rng.random::<f64>();
        let spec = RegularizerSpec::new(1.0, beta, vec![lo], vec![hi]).unwrap();
        let vc = Control::from_values(grid, vec![v]).unwrap();
        let got = prox_psi_alpha(&vc, gamma, &spec).values()[0];

        let step = 5e-5;
        let count = ((hi - lo) / step).ceil() as usize;
        let objective = |x: f64| 0.5 * (x - v) * (x - v) + gamma * beta * x.abs();
        let mut best_x = lo;
        let mut best_val = objective(lo);
        for i in 1..=count {
            let x = (lo + i as f64 * step).min(hi);
            let val = objective(x);
            if val < best_val {
                best_val = val;
                best_x = x;
            }
        }
        let gap = (got - best_x).abs();
        worst_gap = worst_gap.max(gap);
        assert!(gap <= 1e-4, "prox {got} vs brute force {best_x} (gap {gap})");
    }

    // Nonexpansiveness on 100 random pairs in a fixed spec.
    let spec = RegularizerSpec::new(1.0, 0.4, vec![-1.2], vec![0.9]).unwrap();
    let wide = ControlGrid::new(2.0, 8, 1).unwrap();
    for _ in 0..100 {
        let mut a = Control::zeros(wide);
        let mut b = Control::zeros(wide);
        for v in a.values_mut() {
            *v = -3.0 + 6.0 * rng.random::<f64>();
        }
        for v in b.values_mut() {
            *v = -3.0 + 6.0 * rng.random::<f64>();
        }
        let pa = prox_psi_alpha(&a, 0.7, &spec);
        let pb = prox_psi_alpha(&b, 0.7, &spec);
        assert!(pa.distance(&pb) <= a.distance(&b) + 1e-12, "prox expanded a pair");
    }
    pass("04 prox", format!("worst brute-force gap {worst_gap:.2e}"));
}

/// Dense Gaussian elimination, the independent oracle for criterion 5.
#[allow(clippy::needless_range_loop)]
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

#[test]
fn criterion_05_solver_matches_dense_oracle() {
    // ẋ = u, x(0) = 0, F = x(1)², α = 2, β = 0, box [−3, 3], q = 50. The
    // discretized problem is a strictly convex quadratic; its stationarity
    // system (2Δt²·11ᵀ + αΔt·I)u = 0 is solved densely as the oracle.
    let alpha = 2.0;
    let q = 50;
    let problem = ProblemDef::builder(1, 1, ParamBox::new(vec![-1.0], vec![1.0]).unwrap())
        .control_matrix(|_, _, out| out[0] = 1.0)
        .terminal_cost(|x, _| x[0] * x[0], |x, _, out| out[0] = 2.0 * x[0])
        .build();
    let spec = RegularizerSpec::uniform_box(alpha, 0.0, 1, -3.0, 3.0).unwrap();
    let samples = sample_iid(problem.param_box(), 1, 0).unwrap();
    let ep = EnsembleProblem::new(problem, spec, samples).unwrap();
    let grid = ControlGrid::new(1.0, q, 1).unwrap();

    let dt = grid.dt();
    let mut h = vec![vec![2.0 * dt * dt; q]; q];
    for (k, row) in h.iter_mut().enumerate() {
        row[k] += alpha * dt;
    }
    let oracle = Control::from_values(grid, solve_dense(h, vec![0.0; q])).unwrap();

    let mut u0 = Control::zeros(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for v in u0.values_mut() {
        *v = -1.0 + 2.0 * rng.random::<f64>();
    }
    let report = solve(&ep, &u0, &SolverOptions::default()).unwrap();
    assert!(report.converged);
    let gap = report.control.distance(&oracle);
    assert!(gap <= 1e-7, "solver vs dense oracle gap {gap}");
    let crit_at_oracle = ep.criticality(&oracle).unwrap();
    assert!(crit_at_oracle <= 1e-7, "criticality at oracle solution {crit_at_oracle}");
    pass("05 solver-oracle", format!("gap {gap:.2e}, criticality {crit_at_oracle:.2e}"));
}

#[test]
fn criterion_06_step_length_invariance() {
    // Oscillator SAA instance, N = 16, fixed seed; two fixed feasible step
    // lengths must land on the same control to within 10·tol.
    let (def, reg) = make_oscillator(&OscillatorConfig::default()).unwrap();
    let samples = sample_iid(def.param_box(), 16, 616).unwrap();
    let ep = EnsembleProblem::new(def, reg, samples).unwrap();
    let grid = ControlGrid::new(1.0, 50, 2).unwrap();
    let tol = 1e-8;
    let solve_with = |gamma: f64| {
        let opts = SolverOptions { tol, step_mode: StepMode::Fixed { gamma }, ..SolverOptions::default() };
        solve(&ep, &Control::zeros(grid), &opts).unwrap()
    };
    let a = solve_with(0.05);
    let b = solve_with(0.2);
    assert!(a.converged && b.converged);
    let gap = a.control.distance(&b.control);
    assert!(gap <= 10.0 * tol, "gamma-dependence {gap} exceeds {}", 10.0 * tol);
    pass("06 gamma-invariance", format!("gap {gap:.2e}"));
}

#[test]
fn criterion_07_rk4_order() {
    // ẋ = sin x, x(0) = 1: closed form x(t) = 2·atan(eᵗ·tan(x₀/2)).
    let problem = ProblemDef::builder(1, 1, ParamBox::new(vec![0.0], vec![1.0]).unwrap())
        .drift(|x, _, out| out[0] = x[0].sin())
        .drift_jacobian_vjp(|x, _, p, out| out[0] = x[0].cos() * p[0])
        .initial_state(|_, out| out[0] = 1.0)
        .build();
    let exact = 2.0 * (1f64.exp() * 0.5f64.tan()).atan();
    let terminal = |steps: usize| {
        let grid = ControlGrid::new(1.0, steps, 1).unwrap();
        integrate_forward(&problem, &Control::zeros(grid), &[0.5]).unwrap().terminal_state()[0]
    };
    let ratio = (terminal(16) - exact).abs() / (terminal(32) - exact).abs();
    assert!((12.0..=20.0).contains(&ratio), "error ratio {ratio} outside [12, 20]");
    pass("07 rk4-order", format!("halving ratio {ratio:.2}"));
}

#[test]
fn criterion_08_study_is_thread_count_invariant() {
    // Reduced-scale study, identical config; records CSV must be bitwise
    // identical regardless of the thread count.
    let mut cfg = StudyConfig::oscillator();
    cfg.seed = 88;
    cfg.intervals = 16;
    cfg.n_grid = vec![4, 8, 16];
    cfg.replications = 3;
    cfg.n_ref = 64;

    let run_into = |dir: &std::path::Path| {
        run_study(&cfg, Some(dir)).expect("reduced study");
        std::fs::read(dir.join("records.csv")).expect("records.csv")
    };

    #[cfg(feature = "parallel")]
    let (bytes_a, bytes_b) = {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let max = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2);
        let a = saaoc::with_thread_pool(1, || run_into(d1.path()));
        let b = saaoc::with_thread_pool(max, || run_into(d2.path()));
        (a, b)
    };
    #[cfg(not(feature = "parallel"))]
    let (bytes_a, bytes_b) = {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        (run_into(d1.path()), run_into(d2.path()))
    };

    assert_eq!(bytes_a, bytes_b, "records.csv differs across thread counts");
    pass("08 determinism", format!("{} identical bytes", bytes_a.len()));
}

#[test]
fn criterion_09_theory_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    // Re-derivations with a different algebraic association, 1e-12 relative.
    for _ in 0..20 {
        let tc = TheoryConstants {
            lip_dynamics: 1.0 + rng.random::<f64>(),
            lip_cost: 1.0 + rng.random::<f64>(),
            initial_state_bound: 1.0 + rng.random::<f64>(),
            control_sup_bound: 1.0 + rng.random::<f64>(),
            control_dim: 1 + (rng.random::<f64>() * 4.0) as usize,
            alpha: 0.5 + rng.random::<f64>(),
            covering_rho: 0.5 + rng.random::<f64>(),
            lip_gradient: 1.0 + rng.random::<f64>(),
            deviation_value: rng.random::<f64>(),
            deviation_gradient: rng.random::<f64>(),
        };
        let (r0, r) = radius(&tc);
        let r0_alt = tc.lip_dynamics * tc.lip_dynamics.exp() * (1.0 + tc.lip_cost);
        let r_alt = r0_alt
            * (1.0
                + 6.0
                    * tc.lip_dynamics
                    * tc.lip_dynamics
                    * (1.0 + tc.initial_state_bound)
                    * (2.0 * tc.lip_dynamics * tc.control_sup_bound).exp());
        assert!((r0 - r0_alt).abs() <= 1e-12 * r0_alt.abs());
        assert!((r - r_alt).abs() <= 1e-12 * r_alt.abs());

        let m = tc.control_dim;
        let nu = 0.1 + rng.random::<f64>();
        let cov = covering_bound_log2(m, r, tc.alpha, nu, tc.covering_rho);
        let cov_alt = (tc.covering_rho / (tc.alpha * nu)) * (m as f64).powf(1.5) * r;
        assert!((cov - cov_alt).abs() <= 1e-12 * cov_alt.abs());

        let c1 = 2.0 * rng.random::<f64>();
        let d = 0.2 + 3.0 * rng.random::<f64>();
        let ent = entropy_integral_bound(c1, d);
        let ent_alt = (0.5 * d * (c1 + 0.5 * d)).sqrt() + (0.5 * d * c1).sqrt();
        assert!((ent - ent_alt).abs() <= 1e-12 * ent_alt.abs().max(1.0));

        for kind in [RateKind::Value, RateKind::Criticality] {
            let n = 1 + (rng.random::<f64>() * 1000.0) as usize;
            let got = rate_bound(&tc, n, kind);
            let (lip, c0) = match kind {
                RateKind::Value => {
                    let lt = 2f64.sqrt() * tc.lip_cost * tc.lip_dynamics * tc.lip_dynamics.exp();
                    (lt, tc.deviation_value)
                }
                RateKind::Criticality => (tc.lip_gradient, tc.deviation_gradient),
            };
            let mf = tc.control_dim as f64;
            let alt = (c0
                + 16.0 * 3f64.sqrt() * lip * tc.control_sup_bound
                    * (1.0 + tc.covering_rho * mf.sqrt() * r * mf / tc.alpha).sqrt())
                / (n as f64).sqrt();
            assert!((got - alt).abs() <= 1e-12 * alt.abs());
        }
    }

    // The closed form upper-bounds the entropy integral (Simpson quadrature
    // after ε = t², which removes the endpoint singularity).
    for _ in 0..50 {
        let c1 = 2.5 * rng.random::<f64>();
        let d = 0.1 + 4.0 * rng.random::<f64>();
        let upper = (0.5 * d).sqrt();
        let f = |t: f64| 2.0 * (std::f64::consts::LN_2 * (t * t + c1)).sqrt();
        let panels = 4000;
        let hstep = upper / panels as f64;
        let mut acc = f(0.0) + f(upper);
        for i in 1..panels {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * hstep);
        }
        let quad = acc * hstep / 3.0;
        let bound = entropy_integral_bound(c1, d);
        assert!(quad <= bound + 1e-9, "quadrature {quad} above bound {bound}");
    }
    pass("09 theory", "re-derivations at 1e-12; quadrature dominated".to_string());
}

#[test]
fn criterion_10_vaccination_model_sanity() {
    let (def, _) = make_vaccination(&VaccinationConfig::default()).unwrap();

    // Balanced slice a = 0, d = b: total population is conserved to 1e-8.
    let xi = [0.0, 0.5, 0.001, 0.5, 0.45, 0.1];
    let grid = ControlGrid::new(20.0, 50, 1).unwrap();
    let u = Control::constant(grid, &[0.35]);
    let traj = integrate_forward(&def, &u, &xi).unwrap();
    let mut worst = 0.0f64;
    for node in 0..traj.node_count() {
        worst = worst.max((traj.state(node)[3] - 1165.0).abs());
    }
    assert!(worst <= 1e-8, "population drift {worst}");

    // İ(0) = 10 at the nominal rates, via a one-step difference quotient.
    let h = 1e-4;
    let tiny = ControlGrid::new(h, 1, 1).unwrap();
    let traj = integrate_forward(&def, &Control::zeros(tiny), &saaoc::problems::VACCINATION_NOMINAL).unwrap();
    let rate = (traj.terminal_state()[2] - traj.state(0)[2]) / h;
    assert!((rate - 10.0).abs() / 10.0 <= 0.01, "İ(0) ≈ {rate}, want 10 ± 1%");
    pass("10 vaccination-sanity", format!("drift {worst:.1e}, İ(0) = {rate:.4}"));
}
