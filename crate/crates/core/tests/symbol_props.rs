mod common;

use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use hyppen::linalg::{identity, op_norm, subspace_det, subspace_distance, CVec};
use hyppen::symbol::{
    frequency_grid, lopatinski_projector, stable_splitting, symbol_matrix, Frequency, HyperbolicSystem,
    SymbolTolerances,
};

fn systems() -> &'static [(String, HyperbolicSystem)] {
    static S: OnceLock<Vec<(String, HyperbolicSystem)>> = OnceLock::new();
    S.get_or_init(test_systems)
}

fn random_frequency<R: Rng>(rng: &mut R, d: usize) -> Frequency {
    let gamma = rng.gen_range(0.05..1.0);
    let tau = rng.gen_range(-2.0..2.0);
    let eta = (1..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Frequency::new(gamma, tau, eta)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn homogeneity(seed in any::<u64>(), which in 0usize..4, s in 0.1f64..10.0) {
        let (_, sys) = &systems()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = random_frequency(&mut rng, sys.space_dim());
        let tol = SymbolTolerances::default();
        let a = symbol_matrix(sys, &z).unwrap();
        let a_s = symbol_matrix(sys, &z.scaled(s)).unwrap();
        prop_assert!(op_norm(&(a_s - a.scale(s))) <= 1e-14 * s * op_norm(&a));
        let d0 = stable_splitting(sys, &z, &tol).unwrap();
        let d1 = stable_splitting(sys, &z.scaled(s), &tol).unwrap();
        prop_assert!(subspace_distance(&d0.split.basis_minus, &d1.split.basis_minus).unwrap() <= 1e-10);
        prop_assert!(subspace_distance(&d0.split.basis_plus, &d1.split.basis_plus).unwrap() <= 1e-10);
    }

    #[test]
    fn splitting_projectors(seed in any::<u64>(), which in 0usize..4) {
        let (_, sys) = &systems()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = random_frequency(&mut rng, sys.space_dim());
        let data = stable_splitting(sys, &z, &SymbolTolerances::default()).unwrap();
        let s = &data.split;
        let n = sys.state_dim();
        let a = &data.a_matrix;
        let scale = op_norm(&s.proj_minus).max(1.0).powi(2) * op_norm(a).max(1.0);
        prop_assert!(op_norm(&(&s.proj_minus + &s.proj_plus - identity(n))) < 1e-9 * scale);
        prop_assert!(op_norm(&(&s.proj_minus * a - a * &s.proj_minus)) < 1e-9 * scale);
        prop_assert!(op_norm(&(&s.proj_plus * a - a * &s.proj_plus)) < 1e-9 * scale);
        prop_assert_eq!(s.dim_minus(), sys.boundary_rank());
    }

    #[test]
    fn lopatinski_projector_algebra(seed in any::<u64>(), which in 0usize..4) {
        let (_, sys) = &systems()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = random_frequency(&mut rng, sys.space_dim());
        let tol = SymbolTolerances::default();
        let pi = lopatinski_projector(sys, &z, &tol).unwrap();
        let scale = op_norm(&pi).max(1.0).powi(2);
        prop_assert!(op_norm(&(&pi * &pi - &pi)) < 1e-9 * scale);
        prop_assert!(op_norm(&(&pi * sys.ker_gamma().columns())) < 1e-9 * scale);
        let e_minus = stable_splitting(sys, &z, &tol).unwrap().split.basis_minus;
        let f = e_minus.columns();
        prop_assert!(op_norm(&(&pi * f - f)) < 1e-9 * scale);
        let v: CVec = random_cvec(&mut rng, sys.state_dim());
        let pv = &pi * &v;
        let resid = &pv - f * (f.adjoint() * &pv);
        prop_assert!(resid.norm() < 1e-9 * scale * v.norm());
    }
}

#[test]
fn axis_limits_are_complementary() {
    let tol = SymbolTolerances::default();
    for (name, sys) in systems() {
        let axis: Vec<Frequency> = frequency_grid(sys.space_dim(), 64, 5)
            .into_iter()
            .map(|z| {
                let t = z.tangential_norm();
                Frequency::new(0.0, z.tau / t, z.eta.iter().map(|e| e / t).collect())
            })
            .collect();
        let mut checked = 0;
        for z in &axis {
            match stable_splitting(sys, z, &tol) {
                Ok(d) => {
                    assert!(d.extended);
                    assert_eq!(d.split.dim_minus(), sys.boundary_rank(), "{} at {}", name, z);
                    let det = subspace_det(&d.split.basis_minus, &d.split.basis_plus).unwrap();
                    assert!(det > 0.0, "{} at {}: det {}", name, z, det);
                    checked += 1;
                }
                Err(e) => eprintln!("{} at {}: {}", name, z, e),
            }
        }
        assert!(checked * 10 >= axis.len() * 9, "{}: only {}/{} axis points", name, checked, axis.len());
    }
}

#[test]
fn wave_axis_limit_is_exact() {
    // At gamma = 0, tau = 1 the limit of E_- is spanned by (1, -1).
    let sys = HyperbolicSystem::wave(1.0);
    let d = stable_splitting(&sys, &Frequency::gt(0.0, 1.0), &SymbolTolerances::default()).unwrap();
    let f = d.split.basis_minus.columns();
    let ratio = f[(1, 0)] / f[(0, 0)];
    assert!((ratio - c(-1.0)).norm() < 1e-8, "{}", ratio);
}
