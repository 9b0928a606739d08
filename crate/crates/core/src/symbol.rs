//! Problem description, the symbol A(zeta), hyperbolicity checks and the
//! Lopatinski determinant.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{
    self, identity, ordered_spectral_split, real_to_complex, subspace_det, subspace_distance,
    CMat, SpectralSplit, SubspaceBasis,
};

/// Tolerances shared by the symbol-level operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolTolerances {
    pub axis_tol: f64,
    pub ladder_tol: f64,
    pub ulc_threshold: f64,
}

impl Default for SymbolTolerances {
    fn default() -> Self {
        SymbolTolerances {
            axis_tol: linalg::DEFAULT_AXIS_TOL,
            ladder_tol: 1e-6,
            ulc_threshold: 1e-3,
        }
    }
}

/// On-disk schema: matrices are flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "Gamma")]
    pub gamma: Vec<f64>,
    pub p: usize,
}

/// Constant-coefficient operator d_t + sum_j A_j d_j on {x_d > 0} with
/// boundary condition Gamma u = Gamma g.
#[derive(Debug, Clone)]
pub struct HyperbolicSystem {
    d: usize,
    n: usize,
    a: Vec<DMatrix<f64>>,
    gamma_bc: DMatrix<f64>,
    p: usize,
    a_d_inv: CMat,
    ker_gamma: SubspaceBasis,
}

impl HyperbolicSystem {
    /// Checks shapes, noncharacteristic boundary and rank of Gamma.
    pub fn new(a: Vec<DMatrix<f64>>, gamma_bc: DMatrix<f64>, p: usize) -> Result<Self> {
        let d = a.len();
        if d == 0 {
            return Err(Error::DimensionMismatch("need at least one matrix A_j".into()));
        }
        let n = a[0].nrows();
        if n == 0 {
            return Err(Error::DimensionMismatch("state dimension is zero".into()));
        }
        for (j, aj) in a.iter().enumerate() {
            if aj.shape() != (n, n) {
                return Err(Error::DimensionMismatch(format!(
                    "A_{} is {}x{}, expected {}x{}",
                    j + 1,
                    aj.nrows(),
                    aj.ncols(),
                    n,
                    n
                )));
            }
        }
        if gamma_bc.shape() != (p, n) {
            return Err(Error::DimensionMismatch(format!(
                "Gamma is {}x{}, expected {}x{}",
                gamma_bc.nrows(),
                gamma_bc.ncols(),
                p,
                n
            )));
        }
        let det = a[d - 1].determinant();
        if det.abs() <= 1e-12 {
            return Err(Error::CharacteristicBoundary(det.abs()));
        }
        let gc = real_to_complex(&gamma_bc);
        let rank = linalg::numerical_rank(&gc, 1e-10);
        if rank != p {
            return Err(Error::GammaRankDeficient { rank, p });
        }
        let a_d_inv = linalg::inverse(&real_to_complex(&a[d - 1]), "A_d")?;
        let ker_gamma = SubspaceBasis::kernel_of(&gc, p);
        Ok(HyperbolicSystem {
            d,
            n,
            a,
            gamma_bc,
            p,
            a_d_inv,
            ker_gamma,
        })
    }

    pub fn from_spec(spec: &SystemSpec) -> Result<Self> {
        if spec.a.len() != spec.d {
            return Err(Error::Parse(format!(
                "expected {} matrices in A, found {}",
                spec.d,
                spec.a.len()
            )));
        }
        let nn = spec.n * spec.n;
        let mut mats = Vec::with_capacity(spec.d);
        for (j, flat) in spec.a.iter().enumerate() {
            if flat.len() != nn {
                return Err(Error::Parse(format!(
                    "A[{}] has {} entries, expected {}",
                    j,
                    flat.len(),
                    nn
                )));
            }
            mats.push(DMatrix::from_row_slice(spec.n, spec.n, flat));
        }
        if spec.gamma.len() != spec.p * spec.n {
            return Err(Error::Parse(format!(
                "Gamma has {} entries, expected {}",
                spec.gamma.len(),
                spec.p * spec.n
            )));
        }
        let g = DMatrix::from_row_slice(spec.p, spec.n, &spec.gamma);
        HyperbolicSystem::new(mats, g, spec.p).map_err(|e| match e {
            Error::DimensionMismatch(m) => Error::Parse(m),
            other => Error::ValidationFailed(Box::new(other)),
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: SystemSpec = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        HyperbolicSystem::from_spec(&spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {}", path.display(), e)))?;
        HyperbolicSystem::from_json_str(&text)
    }

    pub fn to_spec(&self) -> SystemSpec {
        let flat = |m: &DMatrix<f64>| -> Vec<f64> {
            (0..m.nrows())
                .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
                .map(|(i, j)| m[(i, j)])
                .collect()
        };
        SystemSpec {
            d: self.d,
            n: self.n,
            a: self.a.iter().map(flat).collect(),
            gamma: flat(&self.gamma_bc),
            p: self.p,
        }
    }

    /// 1-D wave equation u_tt = c^2 u_xx as the system for (u_t, c u_x) with
    /// Dirichlet condition on u_t.
    pub fn wave(c: f64) -> Self {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -c, -c, 0.0]);
        let g = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        HyperbolicSystem::new(vec![a], g, 1).expect("wave system is well formed")
    }

    /// Same system with another boundary row.
    pub fn with_gamma(&self, gamma_bc: DMatrix<f64>) -> Result<Self> {
        let p = gamma_bc.nrows();
        HyperbolicSystem::new(self.a.clone(), gamma_bc, p)
    }

    /// Symmetric hyperbolic system with Gaussian entries and a Gaussian
    /// boundary matrix; p is the number of positive eigenvalues of A_d.
    pub fn random_symmetric<R: Rng>(d: usize, n: usize, rng: &mut R) -> Result<Self> {
        let mut mats = Vec::with_capacity(d);
        for _ in 0..d {
            let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
            mats.push((&g + g.transpose()) * 0.5);
        }
        let eig = mats[d - 1].clone().symmetric_eigen();
        let p = eig.eigenvalues.iter().filter(|&&v| v > 0.0).count();
        let g = DMatrix::<f64>::from_fn(p, n, |_, _| rng.sample(StandardNormal));
        HyperbolicSystem::new(mats, g, p)
    }

    pub fn space_dim(&self) -> usize {
        self.d
    }
    pub fn state_dim(&self) -> usize {
        self.n
    }
    pub fn boundary_rank(&self) -> usize {
        self.p
    }
    pub fn a(&self, j: usize) -> &DMatrix<f64> {
        &self.a[j]
    }
    pub fn a_normal(&self) -> &DMatrix<f64> {
        &self.a[self.d - 1]
    }
    pub fn a_normal_inv(&self) -> &CMat {
        &self.a_d_inv
    }
    pub fn gamma_bc(&self) -> &DMatrix<f64> {
        &self.gamma_bc
    }
    pub fn gamma_complex(&self) -> CMat {
        real_to_complex(&self.gamma_bc)
    }
    pub fn ker_gamma(&self) -> &SubspaceBasis {
        &self.ker_gamma
    }
}

/// A point zeta = (gamma, tau, eta) of the frequency half-space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub gamma: f64,
    pub tau: f64,
    pub eta: Vec<f64>,
}

impl Frequency {
    pub fn new(gamma: f64, tau: f64, eta: Vec<f64>) -> Self {
        Frequency { gamma, tau, eta }
    }

    /// Frequency for a 1-D problem (no tangential space variables).
    pub fn gt(gamma: f64, tau: f64) -> Self {
        Frequency::new(gamma, tau, Vec::new())
    }

    pub fn norm(&self) -> f64 {
        (self.gamma * self.gamma + self.tangential_norm().powi(2)).sqrt()
    }

    /// |(tau, eta)|
    pub fn tangential_norm(&self) -> f64 {
        (self.tau * self.tau + self.eta.iter().map(|e| e * e).sum::<f64>()).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Frequency {
            gamma: self.gamma * s,
            tau: self.tau * s,
            eta: self.eta.iter().map(|e| e * s).collect(),
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Frequency {
            gamma,
            ..self.clone()
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(gamma={:.6}, tau={:.6}", self.gamma, self.tau)?;
        if !self.eta.is_empty() {
            write!(f, ", eta={:?}", self.eta)?;
        }
        write!(f, ")")
    }
}

/// A(zeta) = -A_d^{-1}((i tau + gamma) I + sum_j i eta_j A_j).
pub fn symbol_matrix(sys: &HyperbolicSystem, zeta: &Frequency) -> Result<CMat> {
    if zeta.eta.len() != sys.d - 1 {
        return Err(Error::DimensionMismatch(format!(
            "eta has length {}, expected {}",
            zeta.eta.len(),
            sys.d - 1
        )));
    }
    if zeta.norm() == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let n = sys.n;
    let mut inner = identity(n) * Complex64::new(zeta.gamma, zeta.tau);
    for (j, &eta) in zeta.eta.iter().enumerate() {
        inner += real_to_complex(&sys.a[j]) * Complex64::new(0.0, eta);
    }
    Ok(-(&sys.a_d_inv * inner))
}

#[derive(Debug, Clone)]
pub struct SymbolData {
    pub zeta: Frequency,
    pub a_matrix: CMat,
    pub split: SpectralSplit,
    /// Set when the splitting is the gamma -> 0 limit.
    pub extended: bool,
}

/// Spectral splitting of A(zeta); at gamma = 0 the continuous extension is
/// computed from a ladder gamma_k = 2^-k |(tau, eta)|, k = 4..12, with
/// repeated Richardson extrapolation of the projectors.
pub fn stable_splitting(
    sys: &HyperbolicSystem,
    zeta: &Frequency,
    tol: &SymbolTolerances,
) -> Result<SymbolData> {
    let a_matrix = symbol_matrix(sys, zeta)?;
    if zeta.gamma > 0.0 {
        let split = ordered_spectral_split(&a_matrix, tol.axis_tol)?;
        return Ok(SymbolData {
            zeta: zeta.clone(),
            a_matrix,
            split,
            extended: false,
        });
    }
    let split = extend_to_axis(
        |g| symbol_matrix(sys, &zeta.with_gamma(g)),
        zeta.tangential_norm(),
        &a_matrix,
        tol,
    )
    .map_err(|e| match e {
        Error::ExtensionDiverged { distance, .. } => Error::ExtensionDiverged {
            zeta: zeta.to_string(),
            distance,
        },
        other => other,
    })?;
    Ok(SymbolData {
        zeta: zeta.clone(),
        a_matrix,
        split,
        extended: true,
    })
}

/// Continuity limit gamma -> 0 of the splitting of `family(gamma)`.
/// `limit_matrix` is family(0), used only for the restricted blocks.
pub(crate) fn extend_to_axis<F>(
    family: F,
    scale: f64,
    limit_matrix: &CMat,
    tol: &SymbolTolerances,
) -> Result<SpectralSplit>
where
    F: Fn(f64) -> Result<CMat>,
{
    let mut projectors = Vec::new();
    let mut dim_minus = None;
    for k in 4..=12 {
        let g = scale * 2f64.powi(-k);
        let s = ordered_spectral_split(&family(g)?, tol.axis_tol * 2f64.powi(-k))?;
        match dim_minus {
            None => dim_minus = Some(s.dim_minus()),
            Some(dm) if dm != s.dim_minus() => {
                return Err(Error::ExtensionDiverged {
                    zeta: String::new(),
                    distance: 1.0,
                })
            }
            _ => {}
        }
        projectors.push(s.proj_minus);
    }
    let k = dim_minus.unwrap_or(0);
    let n = limit_matrix.nrows();
    // Richardson table on the halving ladder; the diagonal is the sequence
    // of increasingly extrapolated limits.
    let mut richardson: Vec<CMat> = Vec::with_capacity(projectors.len());
    let mut row: Vec<CMat> = Vec::new();
    for p in projectors {
        let mut next = vec![p];
        for (j, prev) in row.iter().enumerate() {
            let w = 2f64.powi(j as i32 + 1) - 1.0;
            let t = &next[j] + (&next[j] - prev).scale(1.0 / w);
            next.push(t);
        }
        richardson.push(next.last().expect("row is non-empty").clone());
        row = next;
    }
    let split_of = |p: &CMat| -> Result<SpectralSplit> {
        let f = top_range(p, k);
        let g = top_range(&(identity(n) - p), n - k);
        split_from_bases(limit_matrix, f, g)
    };
    let mut last = f64::INFINITY;
    let mut prev: Option<SpectralSplit> = None;
    for r in &richardson {
        let cur = split_of(r)?;
        if let Some(p) = &prev {
            let dm = subspace_distance(&p.basis_minus, &cur.basis_minus)?;
            let dp = subspace_distance(&p.basis_plus, &cur.basis_plus)?;
            last = dm.max(dp);
            if last < tol.ladder_tol {
                return Ok(cur);
            }
        }
        prev = Some(cur);
    }
    Err(Error::ExtensionDiverged {
        zeta: String::new(),
        distance: last,
    })
}

/// Leading k left singular vectors.
fn top_range(p: &CMat, k: usize) -> SubspaceBasis {
    let n = p.nrows();
    let svd = p.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let cols = CMat::from_fn(n, k, |r, c| u[(r, order[c])]);
    SubspaceBasis::from_orthonormal(cols)
}

/// Splitting with prescribed complementary bases: P_- = [F 0][F G]^{-1}.
fn split_from_bases(m: &CMat, f: SubspaceBasis, g: SubspaceBasis) -> Result<SpectralSplit> {
    let n = m.nrows();
    let k = f.dim();
    let mut joined = CMat::zeros(n, n);
    joined.view_mut((0, 0), (n, k)).copy_from(f.columns());
    joined.view_mut((0, k), (n, n - k)).copy_from(g.columns());
    let inv = linalg::inverse(&joined, "extended splitting")?;
    let proj_minus = f.columns() * inv.rows(0, k);
    let proj_plus = identity(n) - &proj_minus;
    let block_minus = f.columns().adjoint() * m * f.columns();
    let block_plus = g.columns().adjoint() * m * g.columns();
    Ok(SpectralSplit {
        basis_minus: f,
        basis_plus: g,
        proj_minus,
        proj_plus,
        gap: 0.0,
        block_minus,
        block_plus,
    })
}

/// |det(E_-(A(zeta)), ker Gamma)|
pub fn lopatinski_det(
    sys: &HyperbolicSystem,
    zeta: &Frequency,
    tol: &SymbolTolerances,
) -> Result<f64> {
    let data = stable_splitting(sys, zeta, tol)?;
    subspace_det(&data.split.basis_minus, &sys.ker_gamma)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub samples: Vec<(Frequency, f64)>,
    pub min_value: f64,
    pub argmin: Frequency,
    pub threshold: f64,
    pub passed: bool,
}

/// Quasi-uniform points on {gamma >= 0, |zeta| = 1}: uniform angles for
/// d = 1, a Fibonacci hemisphere for d = 2, seeded Gaussian directions
/// otherwise.
pub fn frequency_grid(d: usize, n_grid: usize, seed: u64) -> Vec<Frequency> {
    match d {
        1 => (0..n_grid)
            .map(|i| {
                let theta = if n_grid == 1 {
                    0.0
                } else {
                    -std::f64::consts::FRAC_PI_2
                        + std::f64::consts::PI * i as f64 / (n_grid - 1) as f64
                };
                let g = theta.cos();
                Frequency::gt(if g < 1e-12 { 0.0 } else { g }, theta.sin())
            })
            .collect(),
        2 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n_grid)
                .map(|i| {
                    let z = (i as f64 + 0.5) / n_grid as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    Frequency::new(z, r * phi.cos(), vec![r * phi.sin()])
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n_grid)
                .map(|_| {
                    let v: Vec<f64> = (0..=d).map(|_| rng.sample(StandardNormal)).collect();
                    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    Frequency::new(
                        (v[0] / nv).abs(),
                        v[1] / nv,
                        v[2..].iter().map(|x| x / nv).collect(),
                    )
                })
                .collect()
        }
    }
}

pub fn lopatinski_scan(
    sys: &HyperbolicSystem,
    n_grid: usize,
    tol: &SymbolTolerances,
    seed: u64,
    exec: Exec,
) -> Result<ScanReport> {
    let grid = frequency_grid(sys.d, n_grid, seed);
    if grid.is_empty() {
        return Err(Error::Config("frequency grid is empty".into()));
    }
    let values = exec.map(&grid, |z| lopatinski_det(sys, z, tol));
    let mut samples = Vec::with_capacity(grid.len());
    for (z, v) in grid.into_iter().zip(values) {
        samples.push((z, v?));
    }
    let (argmin, min_value) = samples
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(z, v)| (z.clone(), *v))
        .expect("non-empty grid");
    Ok(ScanReport {
        passed: min_value >= tol.ulc_threshold,
        samples,
        min_value,
        argmin,
        threshold: tol.ulc_threshold,
    })
}

/// Projector onto E_-(A(zeta)) along ker Gamma: Pi = F (Gamma F)^{-1} Gamma.
pub fn lopatinski_projector(
    sys: &HyperbolicSystem,
    zeta: &Frequency,
    tol: &SymbolTolerances,
) -> Result<CMat> {
    let data = stable_splitting(sys, zeta, tol)?;
    projector_from_split(sys, &data, tol)
}

pub fn projector_from_split(
    sys: &HyperbolicSystem,
    data: &SymbolData,
    tol: &SymbolTolerances,
) -> Result<CMat> {
    let det = subspace_det(&data.split.basis_minus, &sys.ker_gamma)?;
    if det < tol.ulc_threshold {
        return Err(Error::UlcViolated {
            zeta: data.zeta.to_string(),
            det,
        });
    }
    let f = data.split.basis_minus.columns();
    let g = sys.gamma_complex();
    let gf = linalg::inverse(&(&g * f), "Gamma restricted to E_-")?;
    Ok(f * gf * g)
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n_samples: usize,
    /// Multiplicities of the distinct eigenvalues, ordered by eigenvalue.
    pub multiplicities: Vec<usize>,
    pub max_imag: f64,
    pub det_normal: f64,
    pub dim_minus: usize,
}

/// Checks hyperbolicity (real, semi-simple, constant multiplicity) on random
/// directions, plus the boundary-count identity p = dim E_-(A(1, 0)).
pub fn validate_system(
    sys: &HyperbolicSystem,
    n_samples: usize,
    seed: u64,
) -> Result<ValidationReport> {
    let det_normal = sys.a_normal().determinant().abs();
    if det_normal <= 1e-12 {
        return Err(Error::CharacteristicBoundary(det_normal));
    }
    let rank = linalg::numerical_rank(&sys.gamma_complex(), 1e-10);
    if rank != sys.p {
        return Err(Error::GammaRankDeficient { rank, p: sys.p });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pattern: Option<Vec<usize>> = None;
    let mut max_imag: f64 = 0.0;
    for _ in 0..n_samples {
        let dir: Vec<f64> = if sys.d == 1 {
            vec![if rng.gen::<bool>() { 1.0 } else { -1.0 }]
        } else {
            let v: Vec<f64> = (0..sys.d).map(|_| rng.sample(StandardNormal)).collect();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / nv).collect()
        };
        let sample = format!("{:?}", dir);
        let mut m = DMatrix::<f64>::zeros(sys.n, sys.n);
        for (j, w) in dir.iter().enumerate() {
            m += &sys.a[j] * *w;
        }
        let found = eigen_pattern(&m, &sample, &mut max_imag)?;
        match &pattern {
            None => pattern = Some(found),
            Some(expected) => {
                let mut rev = found.clone();
                rev.reverse();
                if &found != expected && &rev != expected {
                    return Err(Error::MultiplicityJump {
                        sample,
                        expected: expected.clone(),
                        found,
                    });
                }
            }
        }
    }
    let reference = symbol_matrix(sys, &Frequency::new(1.0, 0.0, vec![0.0; sys.d - 1]))?;
    let dim_minus = ordered_spectral_split(&reference, linalg::DEFAULT_AXIS_TOL)?.dim_minus();
    if dim_minus != sys.p {
        return Err(Error::BoundaryCountMismatch {
            p: sys.p,
            dim: dim_minus,
        });
    }
    Ok(ValidationReport {
        n_samples,
        multiplicities: pattern.unwrap_or_default(),
        max_imag,
        det_normal,
        dim_minus,
    })
}

fn eigen_pattern(m: &DMatrix<f64>, sample: &str, max_imag: &mut f64) -> Result<Vec<usize>> {
    let n = m.nrows();
    let scale = m.norm().max(1.0);
    let eig = m.complex_eigenvalues();
    let mut reals = Vec::with_capacity(n);
    for lam in eig.iter() {
        *max_imag = max_imag.max(lam.im.abs());
        if lam.im.abs() >= 1e-8 * scale {
            return Err(Error::NonRealEigenvalue {
                sample: sample.to_string(),
                im: lam.im,
            });
        }
        reals.push(lam.re);
    }
    reals.sort_by(f64::total_cmp);
    let cluster_tol = 1e-6 * scale;
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for v in reals {
        match clusters.last_mut() {
            Some(c) if v - c[c.len() - 1] < cluster_tol => c.push(v),
            _ => clusters.push(vec![v]),
        }
    }
    let mc = real_to_complex(m);
    for c in &clusters {
        let lam = c.iter().sum::<f64>() / c.len() as f64;
        let shifted = &mc - identity(n) * Complex64::new(lam, 0.0);
        let rank = linalg::numerical_rank(&shifted, 1e-7);
        if rank != n - c.len() {
            return Err(Error::NotSemiSimple {
                sample: sample.to_string(),
            });
        }
    }
    Ok(clusters.iter().map(Vec::len).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn wave_symbol_examples() {
        let sys = HyperbolicSystem::wave(1.0);
        let a = symbol_matrix(&sys, &Frequency::gt(1.0, 0.0)).unwrap();
        let expected = CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        assert!((a - expected).norm() < 1e-15);
        let a = symbol_matrix(&sys, &Frequency::gt(0.0, 1.0)).unwrap();
        let expected = CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., 1.), c(0., 1.), c(0., 0.)]);
        assert!((a - expected).norm() < 1e-15);
        assert_eq!(
            symbol_matrix(&sys, &Frequency::gt(0.0, 0.0)),
            Err(Error::ZeroFrequency)
        );
    }

    #[test]
    fn validation_examples() {
        let rep = validate_system(&HyperbolicSystem::wave(1.0), 32, 1).unwrap();
        assert_eq!(rep.multiplicities, vec![1, 1]);
        assert_eq!(rep.dim_minus, 1);

        let g = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let sys = HyperbolicSystem::new(vec![rot], g.clone(), 1).unwrap();
        assert!(matches!(
            validate_system(&sys, 8, 1),
            Err(Error::NonRealEigenvalue { .. })
        ));

        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            HyperbolicSystem::new(vec![sing], g, 1),
            Err(Error::CharacteristicBoundary(_))
        ));
    }

    #[test]
    fn jordan_block_is_not_semisimple() {
        let g = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let sys = HyperbolicSystem::new(vec![j], g, 1).unwrap();
        assert!(matches!(
            validate_system(&sys, 4, 3),
            Err(Error::NotSemiSimple { .. })
        ));
    }

    #[test]
    fn wave_stable_subspace_including_axis_limit() {
        let sys = HyperbolicSystem::wave(1.0);
        let tol = SymbolTolerances::default();
        let target = SubspaceBasis::orthonormalize(&CMat::from_column_slice(
            2,
            1,
            &[c(1.0, 0.0), c(-1.0, 0.0)],
        ))
        .unwrap();
        let d = stable_splitting(&sys, &Frequency::gt(1.0, 0.0), &tol).unwrap();
        assert!(!d.extended);
        assert!(subspace_distance(&d.split.basis_minus, &target).unwrap() < 1e-12);
        let d = stable_splitting(&sys, &Frequency::gt(0.0, 1.0), &tol).unwrap();
        assert!(d.extended);
        assert!(subspace_distance(&d.split.basis_minus, &target).unwrap() < 1e-8);
    }

    #[test]
    fn wave_lopatinski_values() {
        let sys = HyperbolicSystem::wave(1.0);
        let tol = SymbolTolerances::default();
        for z in [Frequency::gt(1.0, 0.0), Frequency::gt(0.3, -2.0), Frequency::gt(0.0, 1.0)] {
            let v = lopatinski_det(&sys, &z, &tol).unwrap();
            assert!((v - 0.5f64.sqrt()).abs() < 1e-9, "{} at {}", v, z);
        }
        let bad = sys
            .with_gamma(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]))
            .unwrap();
        assert!(lopatinski_det(&bad, &Frequency::gt(1.0, 0.5), &tol).unwrap() < 1e-12);
    }

    #[test]
    fn wave_projector_example() {
        let sys = HyperbolicSystem::wave(1.0);
        let pi = lopatinski_projector(&sys, &Frequency::gt(1.0, 0.0), &SymbolTolerances::default())
            .unwrap();
        let expected = CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(-1., 0.), c(0., 0.)]);
        assert!((pi - expected).norm() < 1e-12);
    }

    #[test]
    fn scan_single_point() {
        let sys = HyperbolicSystem::wave(1.0);
        let r = lopatinski_scan(&sys, 1, &SymbolTolerances::default(), 0, Exec::Sequential)
            .unwrap();
        assert_eq!(r.samples.len(), 1);
        assert_eq!(r.argmin, Frequency::gt(1.0, 0.0));
        assert!(r.passed);
    }

    #[test]
    fn spec_round_trip() {
        let sys = HyperbolicSystem::wave(2.0);
        let text = serde_json::to_string(&sys.to_spec()).unwrap();
        let back = HyperbolicSystem::from_json_str(&text).unwrap();
        assert_eq!(back.a(0), sys.a(0));
        assert_eq!(back.gamma_bc(), sys.gamma_bc());
        assert!(matches!(
            HyperbolicSystem::from_json_str(r#"{"d":1,"N":2,"A":[[0,1,1]],"Gamma":[1,0],"p":1}"#),
            Err(Error::Parse(_))
        ));
    }
}
