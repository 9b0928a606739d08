//! Pointwise Kreiss symmetrizers, the Rauch matrix B and the conjugated
//! system (S_R, A_R).

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    condition_number, hermitian_defect, hermitian_eigen, hermitian_part, hermitian_sqrt, identity,
    inverse, lyapunov_stable_solve, min_hermitian_eigenvalue, op_norm, subspace_distance, CMat,
    SubspaceBasis,
};
use crate::symbol::{stable_splitting, Frequency, HyperbolicSystem, SymbolData, SymbolTolerances};

/// Largest gain / penalty weight tried before giving up.
pub const MAX_GAIN: f64 = 1048576.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificates {
    /// lambda_min(Re(S A))
    pub lambda: f64,
    /// lambda_min(S + C1 Gamma^* Gamma)
    pub delta: f64,
    pub c1: f64,
}

#[derive(Debug, Clone)]
pub struct SymmetrizerData {
    pub zeta: Frequency,
    pub s: CMat,
    pub a_matrix: CMat,
    pub cert: Certificates,
    pub k_used: f64,
}

/// S = K c_+^* H_+ c_+ - c_-^* H_- c_-, where c_+- are the coordinate maps of
/// the spectral projectors and H_+- solve Lyapunov equations on the blocks.
/// K doubles until the certificates hold.
pub fn build_kreiss_symmetrizer(
    sys: &HyperbolicSystem,
    zeta: &Frequency,
    k: f64,
    tol: &SymbolTolerances,
) -> Result<SymmetrizerData> {
    if !(zeta.gamma > 0.0) {
        return Err(Error::NotASymmetrizer(format!(
            "symmetrizers are built only for gamma > 0, got {}",
            zeta
        )));
    }
    let data = stable_splitting(sys, zeta, tol)?;
    symmetrizer_from_symbol(sys, &data, k)
}

pub fn symmetrizer_from_symbol(
    sys: &HyperbolicSystem,
    data: &SymbolData,
    k: f64,
) -> Result<SymmetrizerData> {
    let split = &data.split;
    let cm = split.coords_minus();
    let cp = split.coords_plus();
    let hm = lyapunov_stable_solve(&(-&split.block_minus))?;
    let hp = lyapunov_stable_solve(&split.block_plus)?;
    let plus = cp.adjoint() * hp * &cp;
    let minus = cm.adjoint() * hm * &cm;
    let gamma = sys.gamma_complex();
    let mut gain = k.max(f64::MIN_POSITIVE);
    loop {
        let s = hermitian_part(&(plus.scale(gain) - &minus));
        if let Ok(cert) = verify_symmetrizer(&s, &data.a_matrix, &gamma, sys.boundary_rank()) {
            return Ok(SymmetrizerData {
                zeta: data.zeta.clone(),
                s,
                a_matrix: data.a_matrix.clone(),
                cert,
                k_used: gain,
            });
        }
        gain *= 2.0;
        if gain > MAX_GAIN {
            return Err(Error::GainExhausted(MAX_GAIN));
        }
    }
}

/// Checks Re(SA) > 0, S + C1 Gamma^* Gamma > 0 for the smallest
/// C1 in {0, 1, 2, 4, ..., 2^20}, and the signature (p negative, N-p positive).
pub fn verify_symmetrizer(s: &CMat, a: &CMat, gamma: &CMat, p: usize) -> Result<Certificates> {
    let n = s.nrows();
    let defect = hermitian_defect(s);
    if defect > 1e-10 * s.norm().max(1.0) {
        return Err(Error::NotASymmetrizer(format!(
            "S is not hermitian (defect {:.3e})",
            defect
        )));
    }
    let lambda = min_hermitian_eigenvalue(&hermitian_part(&(s * a)));
    if lambda <= 0.0 {
        return Err(Error::NotASymmetrizer(format!(
            "Re(SA) is not positive definite (lambda_min = {:.3e})",
            lambda
        )));
    }
    let (vals, _) = hermitian_eigen(s);
    let neg = vals.iter().filter(|&&v| v < 0.0).count();
    let pos = vals.iter().filter(|&&v| v > 0.0).count();
    if neg != p || pos != n - p {
        return Err(Error::NotASymmetrizer(format!(
            "signature ({} negative, {} positive), expected ({}, {})",
            neg,
            pos,
            p,
            n - p
        )));
    }
    let gg = gamma.adjoint() * gamma;
    // Definiteness margin below which a candidate counts as singular.
    let floor = 1e-9 * s.norm().max(1.0);
    let mut c1 = 0.0;
    while c1 <= MAX_GAIN {
        let delta = min_hermitian_eigenvalue(&(s + gg.scale(c1)));
        if delta > floor {
            return Ok(Certificates { lambda, delta, c1 });
        }
        c1 = if c1 == 0.0 { 1.0 } else { 2.0 * c1 };
    }
    Err(Error::NotASymmetrizer(
        "S is not positive on ker Gamma for any C1 <= 2^20".into(),
    ))
}

#[derive(Debug, Clone)]
pub struct RauchData {
    pub b: CMat,
    pub r: CMat,
    pub r_inv: CMat,
    pub s_r: CMat,
    pub a_r: CMat,
    /// Orthogonal projectors onto E_-(S_R) and E_+(S_R).
    pub p_minus: CMat,
    pub p_plus: CMat,
    /// p x (N-p)
    pub aleph: CMat,
    /// Distances certifying ker Gamma = E_+(S^{-1}B) and ker Gamma R^{-1} = E_+(S_R).
    pub identity_distance: f64,
    pub conjugated_distance: f64,
}

/// Builds B from a certified symmetrizer.
pub fn build_rauch_matrix(sdata: &SymmetrizerData, sys: &HyperbolicSystem) -> Result<RauchData> {
    rauch_pipeline(&sdata.s, &sdata.a_matrix, &sys.gamma_complex())
}

/// The Rauch construction for hermitian S of signature (p, N-p), symbol A
/// and boundary matrix Gamma (p x N).
pub fn rauch_pipeline(s: &CMat, a: &CMat, gamma: &CMat) -> Result<RauchData> {
    let n = s.nrows();
    let p = gamma.nrows();
    // (1)-(2): S = Z diag(s) Z^*, negatives first; V = Z |s|^{-1/2} so that
    // V^* S V = J = diag(-I_p, I_{N-p}).
    let (vals, z) = hermitian_eigen(s);
    let neg = vals.iter().filter(|&&v| v < 0.0).count();
    if neg != p || vals.contains(&0.0) {
        return Err(Error::RauchInvariant(format!(
            "S has {} negative eigenvalues, expected {}",
            neg, p
        )));
    }
    let mut v = z.clone();
    for (j, lam) in vals.iter().enumerate() {
        let w = Complex64::new(lam.abs().powf(-0.5), 0.0);
        for i in 0..n {
            v[(i, j)] *= w;
        }
    }
    let mut j = identity(n);
    for i in 0..p {
        j[(i, i)] = Complex64::new(-1.0, 0.0);
    }
    // (3) aleph from a basis of V^{-1} ker Gamma.
    let ker = SubspaceBasis::kernel_of(gamma, p);
    let v_inv = inverse(&v, "V")?;
    let w = SubspaceBasis::orthonormalize(&(&v_inv * ker.columns()))?;
    let q_minus = w.columns().rows(0, p).into_owned();
    let q_plus = w.columns().rows(p, n - p).into_owned();
    let cond = condition_number(&q_plus);
    if cond > 1e8 {
        return Err(Error::TransversalityLost(cond));
    }
    let aleph = &q_minus * inverse(&q_plus, "Q_+")?;
    let an = op_norm(&aleph);
    if an >= 1.0 {
        return Err(Error::AlephTooLarge(an));
    }
    // (4)-(5)
    let mut r_tilde = identity(n);
    r_tilde.view_mut((0, p), (p, n - p)).copy_from(&(-&aleph));
    r_tilde.view_mut((p, 0), (n - p, p)).copy_from(&(-aleph.adjoint()));
    let m = &r_tilde * &j * v.adjoint() * s;
    let b = hermitian_part(&(m.adjoint() * &m));
    // (6)
    let r = hermitian_sqrt(&b)?;
    let r_inv = hermitian_part(&inverse(&r, "R")?);
    let s_r = hermitian_part(&(&r_inv * s * &r_inv));
    let a_r = &r * a * &r_inv;
    let (sr_vals, sr_vecs) = hermitian_eigen(&s_r);
    let sr_neg = sr_vals.iter().filter(|&&x| x < 0.0).count();
    let um = sr_vecs.columns(0, sr_neg).into_owned();
    let up = sr_vecs.columns(sr_neg, n - sr_neg).into_owned();
    let p_minus = &um * um.adjoint();
    let p_plus = &up * up.adjoint();

    let s_inv_b = inverse(s, "S")? * &b;
    let e_plus = positive_eigenspace(&s_inv_b)?;
    let identity_distance = dim_checked_distance(&ker, &e_plus)?;
    if identity_distance > 1e-8 {
        return Err(Error::RauchInvariant(format!(
            "dist(ker Gamma, E_+(S^-1 B)) = {:.3e}",
            identity_distance
        )));
    }
    let ker_r = SubspaceBasis::kernel_of(&(gamma * &r_inv), p);
    let conjugated_distance =
        dim_checked_distance(&ker_r, &SubspaceBasis::from_orthonormal(up.clone()))?;
    if conjugated_distance > 1e-8 {
        return Err(Error::RauchInvariant(format!(
            "dist(ker Gamma_R, E_+(S_R)) = {:.3e}",
            conjugated_distance
        )));
    }
    Ok(RauchData {
        b,
        r,
        r_inv,
        s_r,
        a_r,
        p_minus,
        p_plus,
        aleph,
        identity_distance,
        conjugated_distance,
    })
}

fn dim_checked_distance(f: &SubspaceBasis, g: &SubspaceBasis) -> Result<f64> {
    if f.dim() != g.dim() {
        return Ok(1.0);
    }
    subspace_distance(f, g)
}

/// E_+ of a matrix whose spectrum is real and nonzero (S^{-1}B is similar to
/// a hermitian matrix).
pub fn positive_eigenspace(m: &CMat) -> Result<SubspaceBasis> {
    let split = crate::linalg::ordered_spectral_split(m, 1e-12)?;
    Ok(split.basis_plus)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugateReport {
    /// tolerance minus hermitian defect of S_R
    pub hermitian_margin: f64,
    /// lambda_min(Re(S_R A_R))
    pub dissipation_margin: f64,
    /// lambda_min of S_R restricted to ker Gamma_R
    pub kernel_margin: f64,
}

pub fn conjugate_system(
    rauch: &RauchData,
    sys: &HyperbolicSystem,
) -> Result<ConjugateReport> {
    let n = rauch.s_r.nrows();
    let p = sys.boundary_rank();
    let hermitian_margin = 1e-10 * rauch.s_r.norm().max(1.0) - hermitian_defect(&rauch.s_r);
    if hermitian_margin < 0.0 {
        return Err(Error::ConjugationFailed(1));
    }
    let dissipation_margin = min_hermitian_eigenvalue(&hermitian_part(&(&rauch.s_r * &rauch.a_r)));
    if dissipation_margin <= 0.0 {
        return Err(Error::ConjugationFailed(2));
    }
    let ker_r = SubspaceBasis::kernel_of(&(sys.gamma_complex() * &rauch.r_inv), p);
    let w = SubspaceBasis::orthonormalize(ker_r.columns())?;
    let restricted = w.columns().adjoint() * &rauch.s_r * w.columns();
    let kernel_margin = min_hermitian_eigenvalue(&restricted);
    let positive = hermitian_eigen(&rauch.s_r)
        .0
        .iter()
        .filter(|&&v| v > 0.0)
        .count();
    if kernel_margin <= 0.0 || w.dim() != positive || positive != n - p {
        return Err(Error::ConjugationFailed(3));
    }
    Ok(ConjugateReport {
        hermitian_margin,
        dissipation_margin,
        kernel_margin,
    })
}

/// Row-major (re, im) pairs, for JSON dumps.
pub fn matrix_json(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetrizerDump {
    pub zeta: Frequency,
    pub k_used: f64,
    pub certificates: Certificates,
    #[serde(rename = "S")]
    pub s: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<[f64; 2]>>,
    pub aleph_norm: f64,
}

impl SymmetrizerDump {
    pub fn new(s: &SymmetrizerData, r: &RauchData) -> Self {
        SymmetrizerDump {
            zeta: s.zeta.clone(),
            k_used: s.k_used,
            certificates: s.cert,
            s: matrix_json(&s.s),
            b: matrix_json(&r.b),
            r: matrix_json(&r.r),
            aleph_norm: op_norm(&r.aleph),
        }
    }
}
