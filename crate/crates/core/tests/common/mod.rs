#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hyppen::exec::Exec;
use hyppen::linalg::{identity, CMat, CVec};
use hyppen::symbol::{lopatinski_scan, validate_system, HyperbolicSystem, SymbolTolerances};

pub fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

pub fn random_cmat<R: Rng>(rng: &mut R, n: usize, m: usize) -> CMat {
    CMat::from_fn(n, m, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_cvec<R: Rng>(rng: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// Random unitary from the QR factor of a complex Gaussian-ish matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMat {
    random_cmat(rng, n, n).qr().q()
}

/// V diag(lambda) V^{-1} with the given eigenvalues and a well-conditioned V.
pub fn with_spectrum<R: Rng>(rng: &mut R, lambda: &[Complex64]) -> CMat {
    let n = lambda.len();
    let v = random_unitary(rng, n) + random_cmat(rng, n, n).scale(0.3);
    let v_inv = v.clone().try_inverse().expect("perturbed unitary is invertible");
    v * CMat::from_diagonal(&CVec::from_column_slice(lambda)) * v_inv
}

/// Eigenvalues with |Re| >= gap, at least one on each side.
pub fn split_spectrum<R: Rng>(rng: &mut R, n: usize, gap: f64) -> Vec<Complex64> {
    (0..n)
        .map(|i| {
            let side = match i {
                0 => 1.0,
                1 => -1.0,
                _ => if rng.gen::<bool>() { 1.0 } else { -1.0 },
            };
            Complex64::new(side * rng.gen_range(gap..2.0), rng.gen_range(-2.0..2.0))
        })
        .collect()
}

pub fn hermitian_pd<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let m = random_cmat(rng, n, n);
    &m * m.adjoint() + identity(n).scale(0.5)
}

/// Symmetric hyperbolic system with a strictly dissipative boundary row set:
/// Gamma is a perturbation of the projection onto the positive eigenspace of
/// A_d, so ker Gamma stays inside the negative cone of A_d.
pub fn dissipative_system(d: usize, n: usize, seed: u64) -> HyperbolicSystem {
    let tol = SymbolTolerances::default();
    for attempt in 0..64u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(attempt));
        let base = match HyperbolicSystem::random_symmetric(d, n, &mut rng) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let eig = base.a_normal().clone().symmetric_eigen();
        let pos: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.0).collect();
        if pos.is_empty() || pos.len() == n {
            continue;
        }
        let gamma = DMatrix::from_fn(pos.len(), n, |r, col| {
            eig.eigenvectors[(col, pos[r])] + 0.1 * rng.gen_range(-1.0..1.0)
        });
        let Ok(sys) = base.with_gamma(gamma) else { continue };
        if validate_system(&sys, 64, seed).is_err() {
            continue;
        }
        match lopatinski_scan(&sys, 256, &tol, seed, Exec::Sequential) {
            Ok(r) if r.passed => return sys,
            _ => continue,
        }
    }
    panic!("no admissible {}x{} system in 64 attempts (seed {})", n, n, seed);
}

/// Wave system plus random d = 2 systems of sizes 3, 4 and 6.
pub fn test_systems() -> Vec<(String, HyperbolicSystem)> {
    let mut out = vec![("wave".to_string(), HyperbolicSystem::wave(1.0))];
    for (i, n) in [3usize, 4, 6].into_iter().enumerate() {
        out.push((format!("random d=2 N={}", n), dissipative_system(2, n, 11 + i as u64)));
    }
    out
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}
