//! Second penalization approach: the boundary condition is traded for the
//! datum h = P^- v(0) + Pi (g - v(0)), built from the free-space solution v,
//! and imposed on x < 0 through the singular term (1/eps)(h~ - P^- u).

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::halfline::{
    bounded_halfline_solve, full_line_solve, transmission_solve, BoundaryCondition,
    FrequencyField, Side,
};
use crate::kreiss::join;
use crate::linalg::{identity, subspace_det, subspace_distance, CMat, CVec, SubspaceBasis};
use crate::symbol::{
    extend_to_axis, frequency_grid, projector_from_split, stable_splitting, symbol_matrix,
    Frequency, HyperbolicSystem, SymbolData, SymbolTolerances,
};
use crate::transform::XGrid;

/// Symbol data and the Lopatinski projector at one frequency.
#[derive(Debug, Clone)]
pub struct ProjectorSetup {
    pub symbol: SymbolData,
    pub pi: CMat,
    axis_tol: f64,
}

impl ProjectorSetup {
    pub fn new(sys: &HyperbolicSystem, zeta: &Frequency, tol: &SymbolTolerances) -> Result<Self> {
        if !(zeta.gamma > 0.0) {
            return Err(Error::Config(format!("penalized solves need gamma > 0, got {}", zeta)));
        }
        let symbol = stable_splitting(sys, zeta, tol)?;
        let pi = projector_from_split(sys, &symbol, tol)?;
        Ok(ProjectorSetup {
            symbol,
            pi,
            axis_tol: tol.axis_tol,
        })
    }

    pub fn zeta(&self) -> &Frequency {
        &self.symbol.zeta
    }
    pub fn a(&self) -> &CMat {
        &self.symbol.a_matrix
    }
    pub fn p_minus(&self) -> &CMat {
        &self.symbol.split.proj_minus
    }
    pub fn p_plus(&self) -> &CMat {
        &self.symbol.split.proj_plus
    }

    /// Penalized ODE matrix on x < 0: A - P^-/eps.
    pub fn left_matrix(&self, eps: f64) -> CMat {
        self.a() - self.p_minus().scale(1.0 / eps)
    }
}

/// Bounded solution on the whole line of v' = A v + A_d^{-1} f_hat.
pub fn free_space_solution(
    sys: &HyperbolicSystem,
    setup: &ProjectorSetup,
    f_hat: &FrequencyField,
) -> Result<FrequencyField> {
    if f_hat.side != Side::Full {
        return Err(Error::Config("free-space source must live on the full grid".into()));
    }
    full_line_solve(setup.a(), &f_hat.apply(sys.a_normal_inv()), setup.axis_tol)
}

#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub h_hat: CVec,
    /// e^{-x^2} h_hat on x <= 0.
    pub h_tilde: FrequencyField,
}

fn envelope(x: f64) -> f64 {
    (-x * x).exp()
}

/// h = P^- v(0) + Pi (g - v(0)).
pub fn boundary_data_h(setup: &ProjectorSetup, grid: &XGrid, v_trace: &CVec, g_hat: &CVec) -> BoundaryData {
    let h_hat = setup.p_minus() * v_trace + &setup.pi * (g_hat - v_trace);
    let h_tilde = FrequencyField::from_fn(setup.zeta(), Side::Minus, grid, h_hat.len(), |x| {
        &h_hat * Complex64::new(envelope(x), 0.0)
    });
    BoundaryData { h_hat, h_tilde }
}

#[derive(Debug, Clone)]
pub struct ProjectorProfileSet {
    pub u0_plus: FrequencyField,
    pub u0_minus: FrequencyField,
    pub u1_minus: FrequencyField,
}

impl ProjectorProfileSet {
    /// u0^- + eps u1^- on x < 0, u0^+ on x > 0.
    pub fn approximation(&self, eps: f64) -> FrequencyField {
        join(&self.u0_minus.add(&self.u1_minus.scale(eps)), &self.u0_plus)
    }
}

/// Splits a full-line source into its two sides (or builds zero sides).
fn sides(f_hat: &FrequencyField) -> (FrequencyField, FrequencyField) {
    (f_hat.restrict(Side::Minus), f_hat.restrict(Side::Plus))
}

pub fn projector_profiles(
    sys: &HyperbolicSystem,
    setup: &ProjectorSetup,
    f_hat: &FrequencyField,
    bdata: &BoundaryData,
) -> Result<ProjectorProfileSet> {
    let (f_left, f_right) = sides(f_hat);
    let ad_inv = sys.a_normal_inv();
    let u0_plus = bounded_halfline_solve(
        setup.a(),
        Side::Plus,
        &f_right.apply(ad_inv),
        &BoundaryCondition::Projector(setup.p_minus().clone(), bdata.h_hat.clone()),
        setup.axis_tol,
    )?;
    // P^+ u0^- in Schur coordinates of E_+(A): y' = T_+ y + c_+ A_d^{-1} f, y(0) = c_+ u0^+(0).
    let split = &setup.symbol.split;
    let cp = split.coords_plus();
    let k = cp.nrows();
    let y = bounded_halfline_solve(
        &split.block_plus,
        Side::Minus,
        &f_left.apply(&(&cp * ad_inv)),
        &BoundaryCondition::Rows(identity(k), &cp * u0_plus.trace()),
        setup.axis_tol,
    )?;
    let u0_minus = y.apply(split.basis_plus.columns()).add(&bdata.h_tilde);
    // P^- u1^- = -h~' + A h~ + P^- A_d^{-1} f; the P^+ part vanishes because
    // the first-order correction on x > 0 lies in E_-(A).
    let h = &bdata.h_hat;
    let ah = setup.a() * h;
    let x = &bdata.h_tilde.x;
    let u1_core = bdata.h_tilde.map_values(|_| {
        CMat::from_fn(h.len(), x.len(), |r, i| {
            let e = envelope(x[i]);
            h[r] * (2.0 * x[i] * e) + ah[r] * e
        })
    });
    let u1_minus = u1_core.add(&f_left.apply(&(setup.p_minus() * ad_inv)));
    Ok(ProjectorProfileSet {
        u0_plus,
        u0_minus,
        u1_minus,
    })
}

/// Exact solution of u' = A u - (1/eps)(P^- u - h~) + A_d^{-1} f on x < 0,
/// u' = A u + A_d^{-1} f on x > 0, continuous and bounded.
pub fn solve_penalized_projector(
    sys: &HyperbolicSystem,
    setup: &ProjectorSetup,
    eps: f64,
    f_hat: &FrequencyField,
    bdata: &BoundaryData,
) -> Result<FrequencyField> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {}", eps)));
    }
    let (f_left, f_right) = sides(f_hat);
    let ad_inv = sys.a_normal_inv();
    let src_left = f_left.apply(ad_inv).add(&bdata.h_tilde.scale(1.0 / eps));
    transmission_solve(
        &setup.left_matrix(eps),
        &src_left,
        setup.a(),
        &f_right.apply(ad_inv),
        setup.axis_tol,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct DoubledSample {
    pub zeta: Frequency,
    /// max of dist(E_-(A - P^-), E_-(A)) and dist(E_+(A - P^-), E_+(A))
    pub prel_distance: f64,
    /// subspace_det(E_-(A), E_+(A))
    pub margin: f64,
    /// Lopatinski determinant of the doubled system with Gamma~ = [I, -I].
    pub doubled_det: f64,
    pub single_det: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoubledReport {
    pub samples: Vec<DoubledSample>,
    pub max_prel_distance: f64,
    pub min_margin: f64,
    pub min_doubled_det: f64,
    pub passed: bool,
}

/// Block symbol diag(A, -(A - P^-)) of the reflected transmission problem.
pub fn doubled_symbol(a: &CMat, p_minus: &CMat) -> CMat {
    let n = a.nrows();
    let mut out = CMat::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (n, n)).copy_from(&(p_minus - a));
    out
}

pub fn doubled_sample(sys: &HyperbolicSystem, zeta: &Frequency, tol: &SymbolTolerances) -> Result<DoubledSample> {
    let base = stable_splitting(sys, zeta, tol)?;
    let shifted = if zeta.gamma > 0.0 {
        let m = &base.a_matrix - &base.split.proj_minus;
        crate::linalg::ordered_spectral_split(&m, tol.axis_tol)?
    } else {
        let family = |g: f64| -> Result<CMat> {
            let z = zeta.with_gamma(g);
            let a = symbol_matrix(sys, &z)?;
            let s = crate::linalg::ordered_spectral_split(&a, tol.axis_tol * 1e-4)?;
            Ok(a - s.proj_minus)
        };
        let limit = &base.a_matrix - &base.split.proj_minus;
        extend_to_axis(family, zeta.tangential_norm(), &limit, tol).map_err(|e| match e {
            Error::ExtensionDiverged { distance, .. } => Error::ExtensionDiverged {
                zeta: zeta.to_string(),
                distance,
            },
            other => other,
        })?
    };
    let split = &base.split;
    let prel_distance = subspace_distance(&shifted.basis_minus, &split.basis_minus)?
        .max(subspace_distance(&shifted.basis_plus, &split.basis_plus)?);
    let margin = subspace_det(&split.basis_minus, &split.basis_plus)?;
    let single_det = subspace_det(&split.basis_minus, sys.ker_gamma())?;
    // E_-(A~) = E_-(A) x E_+(A - P^-), ker Gamma~ = {(a, a)}
    let n = sys.state_dim();
    let p = split.dim_minus();
    let mut em = CMat::zeros(2 * n, n);
    em.view_mut((0, 0), (n, p)).copy_from(split.basis_minus.columns());
    em.view_mut((n, p), (n, n - p)).copy_from(shifted.basis_plus.columns());
    let mut ker = CMat::zeros(2 * n, n);
    ker.view_mut((0, 0), (n, n)).copy_from(&identity(n));
    ker.view_mut((n, 0), (n, n)).copy_from(&identity(n));
    let doubled_det = subspace_det(
        &SubspaceBasis::orthonormalize(&em)?,
        &SubspaceBasis::orthonormalize(&ker)?,
    )?;
    Ok(DoubledSample {
        zeta: zeta.clone(),
        prel_distance,
        margin,
        doubled_det,
        single_det,
    })
}

/// Lemma-level checks for the doubled (reflected) system over the
/// frequency hemisphere.
pub fn doubled_lopatinski_check(
    sys: &HyperbolicSystem,
    n_grid: usize,
    tol: &SymbolTolerances,
    seed: u64,
    exec: Exec,
) -> Result<DoubledReport> {
    let grid = frequency_grid(sys.space_dim(), n_grid, seed);
    let results = exec.map(&grid, |z| doubled_sample(sys, z, tol));
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    let max_prel_distance = samples.iter().map(|s| s.prel_distance).fold(0.0, f64::max);
    let min_margin = samples.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    let min_doubled_det = samples
        .iter()
        .map(|s| s.doubled_det)
        .fold(f64::INFINITY, f64::min);
    let passed = max_prel_distance <= 1e-8
        && samples
            .iter()
            .all(|s| s.single_det < tol.ulc_threshold || s.margin >= tol.ulc_threshold);
    Ok(DoubledReport {
        samples,
        max_prel_distance,
        min_margin,
        min_doubled_det,
        passed,
    })
}
