mod common;

use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use hyppen::exec::Exec;
use hyppen::halfline::{FrequencyField, Side};
use hyppen::harness::{run_experiment, Command, ExperimentConfig};
use hyppen::kreiss::{reference_solution, solve_penalized_kreiss, KreissSetup};
use hyppen::linalg::{op_norm, CMat, CVec};
use hyppen::projector::{boundary_data_h, solve_penalized_projector, ProjectorSetup};
use hyppen::symbol::{Frequency, HyperbolicSystem, SymbolTolerances};
use hyppen::transform::XGrid;

fn systems() -> &'static [(String, HyperbolicSystem)] {
    static S: OnceLock<Vec<(String, HyperbolicSystem)>> = OnceLock::new();
    S.get_or_init(test_systems)
}

fn random_frequency<R: Rng>(rng: &mut R, d: usize) -> Frequency {
    let gamma = rng.gen_range(0.5..1.5);
    let tau = rng.gen_range(-2.0..2.0);
    let eta = (1..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Frequency::new(gamma, tau, eta)
}

/// max_i |w(x_{i+1}) - e^{M h} w(x_i)| / max |w| over the nodes in [lo, hi]
/// of a field solving the homogeneous equation w' = M w there.
fn propagation_defect(w: &FrequencyField, m: &CMat, lo: f64, hi: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..w.x.len() - 1 {
        if w.x[i] < lo || w.x[i + 1] > hi {
            continue;
        }
        let h = w.x[i + 1] - w.x[i];
        let e = m.scale(h).exp();
        let r = w.values.column(i + 1) - e * w.values.column(i);
        worst = worst.max(r.norm());
    }
    worst / w.max_norm().max(1e-300)
}

/// Max over x < 0 of the three-point residual of w' = M w + s.
fn left_residual(w: &FrequencyField, m: &CMat, src: &FrequencyField) -> f64 {
    w.restrict(Side::Minus).ode_residual(m, &src.values) / w.max_norm().max(1e-300)
}

fn envelope_field(zeta: &Frequency, grid: &XGrid, v: &CVec) -> FrequencyField {
    FrequencyField::from_fn(zeta, Side::Minus, grid, v.len(), |x| v * c((-x * x).exp()))
}

#[test]
fn penalized_solves_satisfy_their_equations() {
    let tol = SymbolTolerances::default();
    let coarse = XGrid::uniform(4.0, 4.0, 4096).unwrap();
    let fine = XGrid::uniform(4.0, 4.0, 8192).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (name, sys) in systems() {
        let n = sys.state_dim();
        let z = random_frequency(&mut rng, sys.space_dim());
        let g = random_cvec(&mut rng, n);
        let ks = KreissSetup::new(sys, &z, 16.0, &tol).unwrap();
        let ps = ProjectorSetup::new(sys, &z, &tol).unwrap();
        for eps in [0.125, 1.0 / 64.0] {
            let mut left = Vec::new();
            for grid in [&coarse, &fine] {
                let f0 = FrequencyField::zeros(&z, Side::Full, grid, n);
                let v = solve_penalized_kreiss(sys, &ks, grid, eps, &f0, &g).unwrap();
                let dv = propagation_defect(&v, &ks.rauch.a_r, 0.0, 4.0);
                assert!(dv < 1e-7, "{} kreiss right {:e}", name, dv);
                let s_inv = ks.rauch.s_r.clone().try_inverse().unwrap();
                let drive = (s_inv * ks.target(&g)).scale(-1.0 / eps);
                let rk = left_residual(&v, &ks.left_matrix(eps).unwrap(), &envelope_field(&z, grid, &drive));

                let b = boundary_data_h(&ps, grid, &CVec::zeros(n), &g);
                let u = solve_penalized_projector(sys, &ps, eps, &f0, &b).unwrap();
                assert!(propagation_defect(&u, ps.a(), 0.0, 4.0) < 1e-7, "{} projector right", name);
                let src = b.h_tilde.scale(1.0 / eps);
                let rp = left_residual(&u, &ps.left_matrix(eps), &src);
                left.push((rk, rp));
            }
            // Residuals are pure truncation error of the difference quotient:
            // second order under grid halving.
            for k in 0..2 {
                let (a, b) = if k == 0 { (left[0].0, left[1].0) } else { (left[0].1, left[1].1) };
                assert!(b < 1e-7 || a / b > 3.0, "{} eps {}: residual {} -> {}", name, eps, a, b);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn boundary_datum_is_linear_and_bounded(seed in any::<u64>(), which in 0usize..4) {
        let (_, sys) = &systems()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = random_frequency(&mut rng, sys.space_dim());
        let ps = ProjectorSetup::new(sys, &z, &SymbolTolerances::default()).unwrap();
        let grid = XGrid::uniform(2.0, 2.0, 64).unwrap();
        let n = sys.state_dim();
        let (v1, g1, v2, g2) = (random_cvec(&mut rng, n), random_cvec(&mut rng, n), random_cvec(&mut rng, n), random_cvec(&mut rng, n));
        let a = c(rng.gen_range(-2.0..2.0));
        let h1 = boundary_data_h(&ps, &grid, &v1, &g1).h_hat;
        let h2 = boundary_data_h(&ps, &grid, &v2, &g2).h_hat;
        let h12 = boundary_data_h(&ps, &grid, &(&v1 + &v2 * a), &(&g1 + &g2 * a)).h_hat;
        let scale = op_norm(ps.p_minus()) + op_norm(&ps.pi);
        prop_assert!((&h12 - &h1 - &h2 * a).norm() < 1e-10 * scale * (v1.norm() + g1.norm() + v2.norm() + g2.norm()));
        prop_assert!(h1.norm() <= scale * (v1.norm() + g1.norm()) * (1.0 + 1e-12));
        prop_assert!((ps.p_minus() * &h1 - &h1).norm() <= 1e-9 * h1.norm().max(1.0));
    }

    #[test]
    fn unstable_part_ignores_the_boundary_operator(seed in any::<u64>()) {
        // P^+ u on x > 0 is fixed by f alone.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = HyperbolicSystem::wave(1.0);
        let other = sys.with_gamma(nalgebra::DMatrix::from_row_slice(1, 2, &[1.0, rng.gen_range(-0.5..0.5)])).unwrap();
        let z = random_frequency(&mut rng, 1);
        let tol = SymbolTolerances::default();
        let grid = XGrid::graded(8.0, 10, 16).unwrap();
        let amp = random_cvec(&mut rng, 2);
        let f = FrequencyField::from_fn(&z, Side::Plus, &grid, 2, |x| &amp * c((-(x - 1.5) * (x - 1.5)).exp()));
        let u1 = reference_solution(&sys, &z, &f, &random_cvec(&mut rng, 2), &tol).unwrap();
        let u2 = reference_solution(&other, &z, &f, &random_cvec(&mut rng, 2), &tol).unwrap();
        let p_plus = ProjectorSetup::new(&sys, &z, &tol).unwrap().p_plus().clone();
        let d = u1.apply(&p_plus).sub(&u2.apply(&p_plus)).max_norm();
        prop_assert!(d <= 1e-8 * u1.max_norm().max(1.0), "{}", d);
    }
}

fn quick(command: Command, system: &str, out: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(command, Some(fixture(system)), out.to_path_buf());
    cfg.study.n_t = 16;
    cfg.eps_ladder = vec![0.125, 0.0625, 0.03125, 0.015625];
    cfg
}

#[test]
fn runs_are_deterministic_across_execution_policies() {
    let dir = tempfile::tempdir().unwrap();
    for command in [Command::Scan, Command::PenalizeKreiss, Command::PenalizeProjector] {
        let mut csv = Vec::new();
        for (i, exec) in [Exec::Sequential, Exec::default(), Exec::default()].into_iter().enumerate() {
            let out = dir.path().join(format!("{}-{}", command.name(), i));
            run_experiment(&quick(command, "wave1d.json", &out), exec).unwrap();
            csv.push(std::fs::read(out.join("results.csv")).unwrap());
        }
        assert!(!csv[0].is_empty());
        assert_eq!(csv[0], csv[1], "{} sequential vs parallel", command.name());
        assert_eq!(csv[1], csv[2], "{} repeated", command.name());
    }
}

#[test]
fn sample_failures_are_reported_with_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(Command::PenalizeProjector, "wave1d_ulc_violated.json", dir.path());
    let outcome = run_experiment(&cfg, Exec::default()).unwrap();
    assert!(!outcome.failures.is_empty());
    assert_eq!(outcome.exit_code(), 3);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let failures = report["failures"].as_array().unwrap();
    assert_eq!(failures.len(), outcome.failures.len());
    for f in failures {
        assert!(f["zeta"]["gamma"].is_number() && f["zeta"]["tau"].is_number());
        assert!(f["error"].as_str().unwrap().contains("Lopatinski"));
    }
    assert_eq!(report["exit_code"], 3);
}

