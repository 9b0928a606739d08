//! Dense complex linear algebra used throughout the solver.
//!
//! Everything here works on small matrices (N <= 16) and is a pure function of
//! its inputs. Spectral splittings go through an ordered complex Schur form so
//! that defective or strongly non-normal blocks are handled without ever
//! forming an eigenvector matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Default half-width of the band around the imaginary axis treated as "on" it.
pub const DEFAULT_AXIS_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn real_to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Ratio of extreme singular values (infinite for singular or empty input).
pub fn condition_number(m: &CMat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

pub fn inverse(m: &CMat, what: &'static str) -> Result<CMat> {
    if m.is_empty() {
        return Ok(m.clone());
    }
    m.clone().try_inverse().ok_or(Error::Singular(what))
}

/// Eigen-decomposition of a hermitian matrix, eigenvalues ascending.
///
/// Read off the complex Schur form, which is diagonal for hermitian input;
/// nalgebra's complex `symmetric_eigen` can return eigenvectors with O(1e-3)
/// residuals on clustered spectra.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let (q, t) = complex_schur(&hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| t[(a, a)].re.total_cmp(&t[(b, b)].re));
    let values = order.iter().map(|&i| t[(i, i)].re).collect();
    let vectors = CMat::from_fn(n, n, |r, c| q[(r, order[c])]);
    (values, vectors)
}

pub fn min_hermitian_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(f64::INFINITY)
}

/// Orthonormal basis of a subspace of C^N, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    columns: CMat,
}

impl SubspaceBasis {
    /// Orthonormalizes the given spanning columns (two passes of modified
    /// Gram-Schmidt). Fails if the columns are numerically dependent.
    pub fn orthonormalize(m: &CMat) -> Result<Self> {
        let (n, k) = m.shape();
        let mut q = CMat::zeros(n, k);
        for j in 0..k {
            let mut v = m.column(j).into_owned();
            let original = v.norm().max(f64::MIN_POSITIVE);
            for _ in 0..2 {
                for i in 0..j {
                    let qi = q.column(i);
                    let proj = qi.dotc(&v);
                    v -= qi * proj;
                }
            }
            let nv = v.norm();
            if nv <= 1e-10 * original || nv == 0.0 {
                return Err(Error::RankDeficient);
            }
            q.set_column(j, &(v / Complex64::new(nv, 0.0)));
        }
        Ok(SubspaceBasis { columns: q })
    }

    /// Wraps columns that are already orthonormal.
    pub(crate) fn from_orthonormal(columns: CMat) -> Self {
        SubspaceBasis { columns }
    }

    pub fn columns(&self) -> &CMat {
        &self.columns
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    /// Orthogonal projector onto the subspace.
    pub fn orthogonal_projector(&self) -> CMat {
        &self.columns * self.columns.adjoint()
    }

    /// Gram matrix defect ||Q*Q - I||.
    pub fn orthonormality_defect(&self) -> f64 {
        (self.columns.adjoint() * &self.columns - identity(self.dim())).norm()
    }

    /// Orthonormal basis of the range of `m`, taking singular values above
    /// `rel_tol * sigma_max`.
    pub fn range_of(m: &CMat, rel_tol: f64) -> Self {
        let (n, _) = m.shape();
        let svd = m.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let mut idx: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| smax > 0.0 && svd.singular_values[i] > rel_tol * smax)
            .collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let cols = CMat::from_fn(n, idx.len(), |r, c| u[(r, idx[c])]);
        SubspaceBasis { columns: cols }
    }

    /// Orthonormal basis of the kernel of `m` (given rank).
    pub fn kernel_of(m: &CMat, rank: usize) -> Self {
        let n = m.ncols();
        // Pad to a square matrix so the full right singular basis is returned.
        let mut sq = CMat::zeros(n.max(m.nrows()), n);
        sq.view_mut((0, 0), m.shape()).copy_from(m);
        let svd = sq.svd(false, true);
        let vt = svd.v_t.expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let kernel_rows = &order[rank.min(n)..];
        let cols = CMat::from_fn(n, kernel_rows.len(), |r, c| vt[(kernel_rows[c], r)].conj());
        SubspaceBasis { columns: cols }
    }
}

/// Numerical rank by singular values above `tol * max(1, sigma_max)`.
pub fn numerical_rank(m: &CMat, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > tol * smax.max(1.0)).count()
}

/// Splitting of C^N into the invariant subspaces of a matrix for eigenvalues
/// left and right of the imaginary axis.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub basis_minus: SubspaceBasis,
    pub basis_plus: SubspaceBasis,
    /// Spectral projector onto E_- along E_+ (generally oblique).
    pub proj_minus: CMat,
    pub proj_plus: CMat,
    /// Smallest |Re lambda| over the spectrum.
    pub gap: f64,
    /// The matrix restricted to E_- in the orthonormal basis `basis_minus`.
    pub block_minus: CMat,
    pub block_plus: CMat,
}

impl SpectralSplit {
    /// Coordinates of the E_- component: `basis_minus^* P_-`.
    pub fn coords_minus(&self) -> CMat {
        self.basis_minus.columns().adjoint() * &self.proj_minus
    }

    pub fn coords_plus(&self) -> CMat {
        self.basis_plus.columns().adjoint() * &self.proj_plus
    }

    pub fn dim_minus(&self) -> usize {
        self.basis_minus.dim()
    }

    pub fn dim_plus(&self) -> usize {
        self.basis_plus.dim()
    }
}

/// Swaps diagonal entries k and k+1 of an upper-triangular T with a unitary
/// rotation, updating the Schur vectors Q.
fn swap_adjacent(q: &mut CMat, t: &mut CMat, k: usize) {
    let n = t.nrows();
    let a = t[(k, k)];
    let b = t[(k + 1, k + 1)];
    let x = t[(k, k + 1)];
    // eigenvector of [[a, x], [0, b]] for eigenvalue b
    let v1 = x;
    let v2 = b - a;
    let nrm = v1.norm().hypot(v2.norm());
    if nrm == 0.0 {
        return;
    }
    let g11 = v1 / nrm;
    let g21 = v2 / nrm;
    let g12 = -g21.conj();
    let g22 = g11.conj();
    for i in 0..n {
        let tk = t[(i, k)];
        let tk1 = t[(i, k + 1)];
        t[(i, k)] = tk * g11 + tk1 * g21;
        t[(i, k + 1)] = tk * g12 + tk1 * g22;
        let qk = q[(i, k)];
        let qk1 = q[(i, k + 1)];
        q[(i, k)] = qk * g11 + qk1 * g21;
        q[(i, k + 1)] = qk * g12 + qk1 * g22;
    }
    for j in 0..n {
        let tk = t[(k, j)];
        let tk1 = t[(k + 1, j)];
        t[(k, j)] = g11.conj() * tk + g21.conj() * tk1;
        t[(k + 1, j)] = g12.conj() * tk + g22.conj() * tk1;
    }
    t[(k, k)] = b;
    t[(k + 1, k + 1)] = a;
    t[(k + 1, k)] = ZERO;
}

/// Solves T11 Y - Y T22 = C for upper-triangular T11, T22 with disjoint spectra.
fn triangular_sylvester(t11: &CMat, t22: &CMat, c: &CMat) -> CMat {
    let k = t11.nrows();
    let m = t22.nrows();
    let mut y = CMat::zeros(k, m);
    for j in 0..m {
        let mut rhs = c.column(j).into_owned();
        for i in 0..j {
            rhs += y.column(i) * t22[(i, j)];
        }
        let shift = t22[(j, j)];
        for r in (0..k).rev() {
            let mut acc = rhs[r];
            for s in (r + 1)..k {
                acc -= t11[(r, s)] * y[(s, j)];
            }
            y[(r, j)] = acc / (t11[(r, r)] - shift);
        }
    }
    y
}

/// Complex Schur form M = Q T Q^* with T upper triangular.
pub fn complex_schur(m: &CMat) -> (CMat, CMat) {
    let (q, mut t) = m.clone().schur().unpack();
    let n = t.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = ZERO;
        }
    }
    (q, t)
}

/// Splits C^N into the stable (Re < 0) and unstable (Re > 0) invariant
/// subspaces of `m`.
pub fn ordered_spectral_split(m: &CMat, axis_tol: f64) -> Result<SpectralSplit> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    let (mut q, mut t) = complex_schur(m);
    let mut gap = f64::INFINITY;
    for i in 0..n {
        let lam = t[(i, i)];
        if lam.re.abs() < axis_tol {
            return Err(Error::EigenvalueOnAxis {
                re: lam.re,
                im: lam.im,
            });
        }
        gap = gap.min(lam.re.abs());
    }
    loop {
        let mut swapped = false;
        for k in 0..n.saturating_sub(1) {
            if t[(k, k)].re > 0.0 && t[(k + 1, k + 1)].re < 0.0 {
                swap_adjacent(&mut q, &mut t, k);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    let k = (0..n).filter(|&i| t[(i, i)].re < 0.0).count();
    let t11 = t.view((0, 0), (k, k)).into_owned();
    let t12 = t.view((0, k), (k, n - k)).into_owned();
    let t22 = t.view((k, k), (n - k, n - k)).into_owned();
    let y = triangular_sylvester(&t11, &t22, &(-t12));

    let mut p_schur = CMat::zeros(n, n);
    for i in 0..k {
        p_schur[(i, i)] = ONE;
    }
    p_schur.view_mut((0, k), (k, n - k)).copy_from(&(-&y));
    let proj_minus = &q * p_schur * q.adjoint();
    let proj_plus = identity(n) - &proj_minus;

    let basis_minus = SubspaceBasis::from_orthonormal(q.columns(0, k).into_owned());
    let mut stacked = CMat::zeros(n, n - k);
    stacked.view_mut((0, 0), (k, n - k)).copy_from(&y);
    stacked
        .view_mut((k, 0), (n - k, n - k))
        .copy_from(&identity(n - k));
    let basis_plus = SubspaceBasis::orthonormalize(&(&q * stacked))?;
    let block_plus = basis_plus.columns().adjoint() * m * basis_plus.columns();

    Ok(SpectralSplit {
        basis_minus,
        basis_plus,
        proj_minus,
        proj_plus,
        gap,
        block_minus: t11,
        block_plus,
    })
}

fn check_square_dims(f: &SubspaceBasis, g: &SubspaceBasis) -> Result<usize> {
    let n = f.ambient_dim();
    if g.ambient_dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "ambient dimensions {} and {}",
            n,
            g.ambient_dim()
        )));
    }
    Ok(n)
}

/// |det [F | G]| for orthonormal bases of complementary-dimension subspaces.
pub fn subspace_det(f: &SubspaceBasis, g: &SubspaceBasis) -> Result<f64> {
    let n = check_square_dims(f, g)?;
    if f.dim() + g.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "dim F + dim G = {} + {} != {}",
            f.dim(),
            g.dim(),
            n
        )));
    }
    let orth = |b: &SubspaceBasis| -> Result<CMat> {
        if b.dim() == 0 {
            Ok(b.columns().clone())
        } else {
            Ok(SubspaceBasis::orthonormalize(b.columns())?.columns().clone())
        }
    };
    let fq = match orth(f) {
        Ok(q) => q,
        Err(Error::RankDeficient) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let gq = match orth(g) {
        Ok(q) => q,
        Err(Error::RankDeficient) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let mut joined = CMat::zeros(n, n);
    joined.view_mut((0, 0), (n, f.dim())).copy_from(&fq);
    joined.view_mut((0, f.dim()), (n, g.dim())).copy_from(&gq);
    Ok(joined.determinant().norm())
}

/// Sine of the largest principal angle between equal-dimension subspaces.
pub fn subspace_distance(f: &SubspaceBasis, g: &SubspaceBasis) -> Result<f64> {
    check_square_dims(f, g)?;
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dim F = {} but dim G = {}",
            f.dim(),
            g.dim()
        )));
    }
    if f.dim() == 0 {
        return Ok(0.0);
    }
    let fq = SubspaceBasis::orthonormalize(f.columns())?;
    let gq = SubspaceBasis::orthonormalize(g.columns())?;
    let residual = gq.columns() - fq.columns() * (fq.columns().adjoint() * gq.columns());
    Ok(op_norm(&residual).clamp(0.0, 1.0))
}

/// Hermitian positive-definite square root.
pub fn hermitian_sqrt(b: &CMat) -> Result<CMat> {
    let scale = b.norm().max(1.0);
    let defect = hermitian_defect(b);
    if defect > 1e-12 * scale {
        return Err(Error::NotHermitian(defect));
    }
    let (vals, vecs) = hermitian_eigen(b);
    if let Some(&lmin) = vals.first() {
        if lmin <= 0.0 {
            return Err(Error::NotPositiveDefinite(lmin));
        }
    }
    let d = CVec::from_iterator(vals.len(), vals.iter().map(|v| Complex64::new(v.sqrt(), 0.0)));
    let r = &vecs * CMat::from_diagonal(&d) * vecs.adjoint();
    Ok(hermitian_part(&r))
}

/// Hermitian H with H M + M^* H = 2 I, for M with spectrum in Re > 0.
pub fn lyapunov_stable_solve(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let (u, t) = complex_schur(m);
    let min_re = (0..n).map(|i| t[(i, i)].re).fold(f64::INFINITY, f64::min);
    if n > 0 && min_re <= 0.0 {
        return Err(Error::SpectrumNotStable(min_re));
    }
    // X T + T^* X = 2I, solved entrywise in increasing (i, j).
    let mut x = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = if i == j { Complex64::new(2.0, 0.0) } else { ZERO };
            for k in 0..j {
                acc -= x[(i, k)] * t[(k, j)];
            }
            for k in 0..i {
                acc -= t[(k, i)].conj() * x[(k, j)];
            }
            x[(i, j)] = acc / (t[(j, j)] + t[(i, i)].conj());
        }
    }
    Ok(hermitian_part(&(&u * x * u.adjoint())))
}

/// exp(hT) and the moment weights `W_m = int_0^h e^{T(h-s)} (s/h)^m ds`
/// for m = 0, 1, 2, from one exponential of an augmented block matrix.
pub fn exp_with_moments(t: &CMat, h: f64) -> (CMat, [CMat; 3]) {
    let k = t.nrows();
    if k == 0 {
        return (t.clone(), [t.clone(), t.clone(), t.clone()]);
    }
    let mut aug = CMat::zeros(4 * k, 4 * k);
    aug.view_mut((0, 0), (k, k)).copy_from(&t.scale(h));
    for b in 0..3 {
        aug.view_mut((b * k, (b + 1) * k), (k, k))
            .copy_from(&identity(k));
    }
    let e = aug.exp();
    let block = |b: usize| e.view((0, b * k), (k, k)).into_owned();
    // phi_{m+1}(hT) sits in block m+1; W_m = h m! phi_{m+1}(hT)
    (
        block(0),
        [block(1).scale(h), block(2).scale(h), block(3).scale(2.0 * h)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: &[&[f64]]) -> CMat {
        let n = rows.len();
        let m = rows[0].len();
        CMat::from_fn(n, m, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    fn span(v: &[f64]) -> SubspaceBasis {
        SubspaceBasis::orthonormalize(&cm(&v.iter().map(std::slice::from_ref).collect::<Vec<_>>()))
            .unwrap()
    }

    #[test]
    fn split_of_diagonal_matrix() {
        let s = ordered_spectral_split(&cm(&[&[-1.0, 0.0], &[0.0, 2.0]]), DEFAULT_AXIS_TOL).unwrap();
        assert_eq!(s.dim_minus(), 1);
        assert!((s.proj_minus.clone() - cm(&[&[1.0, 0.0], &[0.0, 0.0]])).norm() < 1e-14);
        assert!(subspace_distance(&s.basis_minus, &span(&[1.0, 0.0])).unwrap() < 1e-14);
        assert!(subspace_distance(&s.basis_plus, &span(&[0.0, 1.0])).unwrap() < 1e-14);
        assert!((s.gap - 1.0).abs() < 1e-14);
    }

    #[test]
    fn split_of_swap_matrix_and_its_complex_multiple() {
        let m = cm(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let expected = cm(&[&[0.5, -0.5], &[-0.5, 0.5]]);
        for scale in [Complex64::new(1.0, 0.0), Complex64::new(1.0, 1.0)] {
            let s = ordered_spectral_split(&m.map(|v| v * scale), DEFAULT_AXIS_TOL).unwrap();
            assert!((s.proj_minus.clone() - &expected).norm() < 1e-13);
            assert!(subspace_distance(&s.basis_minus, &span(&[1.0, -1.0])).unwrap() < 1e-13);
        }
    }

    #[test]
    fn split_rejects_axis_eigenvalue() {
        let m = cm(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert!(matches!(
            ordered_spectral_split(&m, DEFAULT_AXIS_TOL),
            Err(Error::EigenvalueOnAxis { .. })
        ));
    }

    #[test]
    fn split_handles_jordan_block() {
        // [[-1, 1, 0], [0, -1, 5], [0, 0, 2]]: defective stable block
        let m = cm(&[&[-1.0, 1.0, 0.0], &[0.0, -1.0, 5.0], &[0.0, 0.0, 2.0]]);
        let s = ordered_spectral_split(&m, DEFAULT_AXIS_TOL).unwrap();
        assert_eq!(s.dim_minus(), 2);
        let p = &s.proj_minus;
        assert!((p * p - p).norm() < 1e-12);
        assert!((p * &m - &m * p).norm() < 1e-12);
    }

    #[test]
    fn subspace_det_examples() {
        assert!((subspace_det(&span(&[1.0, 0.0]), &span(&[0.0, 1.0])).unwrap() - 1.0).abs() < 1e-15);
        let v = subspace_det(&span(&[1.0, -1.0]), &span(&[0.0, 1.0])).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(subspace_det(&span(&[1.0, 0.0]), &span(&[1.0, 0.0])).unwrap() < 1e-15);
        assert!(matches!(
            subspace_det(&span(&[1.0, 0.0]), &SubspaceBasis::from_orthonormal(identity(2))),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn subspace_distance_examples() {
        let e1 = span(&[1.0, 0.0]);
        assert_eq!(subspace_distance(&e1, &e1).unwrap(), 0.0);
        assert!((subspace_distance(&e1, &span(&[0.0, 1.0])).unwrap() - 1.0).abs() < 1e-15);
        let d = subspace_distance(&e1, &span(&[1.0, 1.0])).unwrap();
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            subspace_distance(&e1, &SubspaceBasis::from_orthonormal(identity(2))),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn hermitian_sqrt_examples() {
        assert!((hermitian_sqrt(&identity(3)).unwrap() - identity(3)).norm() < 1e-15);
        let r = hermitian_sqrt(&cm(&[&[4.0, 0.0], &[0.0, 9.0]])).unwrap();
        assert!((r - cm(&[&[2.0, 0.0], &[0.0, 3.0]])).norm() < 1e-14);
        let b = cm(&[&[1.25, -1.0], &[-1.0, 1.25]]);
        let r = hermitian_sqrt(&b).unwrap();
        assert!((&r * &r - &b).norm() / b.norm() < 1e-10);
        assert!(min_hermitian_eigenvalue(&r) > 0.0);
        assert!(matches!(
            hermitian_sqrt(&cm(&[&[1.0, 0.0], &[0.0, -1.0]])),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn lyapunov_examples() {
        assert!((lyapunov_stable_solve(&identity(2)).unwrap() - identity(2)).norm() < 1e-15);
        let h = lyapunov_stable_solve(&cm(&[&[1.0, 0.0], &[0.0, 2.0]])).unwrap();
        assert!((h - cm(&[&[1.0, 0.0], &[0.0, 0.5]])).norm() < 1e-15);
        assert!(matches!(
            lyapunov_stable_solve(&cm(&[&[-1.0, 0.0], &[0.0, 2.0]])),
            Err(Error::SpectrumNotStable(_))
        ));
    }

    #[test]
    fn lyapunov_jordan_block_matches_kronecker_oracle() {
        // Oracle: vec(H M + M^T H) = 2 vec(I) as a dense 4x4 real system.
        let m = [[2.0, 1.0], [0.0, 2.0]];
        let mut a = nalgebra::DMatrix::<f64>::zeros(4, 4);
        let idx = |i: usize, j: usize| 2 * i + j;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    a[(idx(i, j), idx(i, k))] += m[k][j];
                    a[(idx(i, j), idx(k, j))] += m[k][i];
                }
            }
        }
        let rhs = nalgebra::DVector::from_vec(vec![2.0, 0.0, 0.0, 2.0]);
        let oracle = a.lu().solve(&rhs).unwrap();
        let h = lyapunov_stable_solve(&cm(&[&[2.0, 1.0], &[0.0, 2.0]])).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((h[(i, j)].re - oracle[idx(i, j)]).abs() < 1e-12);
                assert!(h[(i, j)].im.abs() < 1e-12);
            }
        }
        let mm = cm(&[&[2.0, 1.0], &[0.0, 2.0]]);
        let res = &h * &mm + mm.adjoint() * &h - identity(2).scale(2.0);
        assert!(res.norm() < 1e-10);
    }

    #[test]
    fn moment_weights_match_closed_forms() {
        let lam = -3.0f64;
        let h = 0.1;
        let (e, w) = exp_with_moments(&cm(&[&[lam]]), h);
        let eh = (lam * h).exp();
        // int_0^h e^{lam(h-s)} (s/h)^m ds by parts
        let m0 = (eh - 1.0) / lam;
        let m1 = (m0 - h) / (lam * h);
        let m2 = (2.0 * m1 - h) / (lam * h);
        assert!((e[(0, 0)].re - eh).abs() < 1e-14);
        assert!((w[0][(0, 0)].re - m0).abs() < 1e-14);
        assert!((w[1][(0, 0)].re - m1).abs() < 1e-13);
        assert!((w[2][(0, 0)].re - m2).abs() < 1e-12);
    }
}
