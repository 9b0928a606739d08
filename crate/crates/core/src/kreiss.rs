//! First penalization approach: the problem is conjugated by the Rauch root
//! R, v = R u, and the boundary condition is replaced on x < 0 by the
//! penalty (1/eps) P^-(v - c) with P^- the orthogonal projector on E_-(S_R).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::halfline::{
    bounded_halfline_solve, transmission_solve, BoundaryCondition, FrequencyField, Side,
};
use crate::linalg::{identity, inverse, subspace_det, CMat, CVec};
use crate::symbol::{stable_splitting, Frequency, HyperbolicSystem, SymbolTolerances};
use crate::symmetrizer::{
    build_rauch_matrix, symmetrizer_from_symbol, RauchData, SymmetrizerData,
};
use crate::transform::XGrid;

/// Everything the approach needs at one frequency.
#[derive(Debug, Clone)]
pub struct KreissSetup {
    pub zeta: Frequency,
    pub a: CMat,
    pub sym: SymmetrizerData,
    pub rauch: RauchData,
    /// Orthonormal basis of E_+(S_R), N x (N-p).
    u_plus: CMat,
    /// A_R compressed to E_+(S_R).
    m_w: CMat,
    axis_tol: f64,
}

impl KreissSetup {
    pub fn new(sys: &HyperbolicSystem, zeta: &Frequency, k0: f64, tol: &SymbolTolerances) -> Result<Self> {
        if !(zeta.gamma > 0.0) {
            return Err(Error::Config(format!("penalized solves need gamma > 0, got {}", zeta)));
        }
        let data = stable_splitting(sys, zeta, tol)?;
        let det = subspace_det(&data.split.basis_minus, sys.ker_gamma())?;
        if det < tol.ulc_threshold {
            return Err(Error::UlcViolated {
                zeta: zeta.to_string(),
                det,
            });
        }
        let sym = symmetrizer_from_symbol(sys, &data, k0)?;
        let rauch = build_rauch_matrix(&sym, sys)?;
        let (vals, vecs) = crate::linalg::hermitian_eigen(&rauch.s_r);
        let neg = vals.iter().filter(|&&v| v < 0.0).count();
        let u_plus = vecs.columns(neg, vals.len() - neg).into_owned();
        let m_w = u_plus.adjoint() * &rauch.a_r * &u_plus;
        Ok(KreissSetup {
            zeta: zeta.clone(),
            a: data.a_matrix,
            sym,
            rauch,
            u_plus,
            m_w,
            axis_tol: tol.axis_tol,
        })
    }

    /// Constraint target P^- R g_hat.
    pub fn target(&self, g_hat: &CVec) -> CVec {
        &self.rauch.p_minus * (&self.rauch.r * g_hat)
    }

    /// v-frame source R A_d^{-1} f_hat on x >= 0.
    fn v_source(&self, sys: &HyperbolicSystem, f_hat: &FrequencyField) -> Result<FrequencyField> {
        Ok(right_side(f_hat)?.apply(&(&self.rauch.r * sys.a_normal_inv())))
    }

    /// Penalized ODE matrix on x < 0: A_R + (1/eps) S_R^{-1} P^-.
    pub fn left_matrix(&self, eps: f64) -> Result<CMat> {
        let s_inv = inverse(&self.rauch.s_r, "S_R")?;
        Ok(&self.rauch.a_r + (s_inv * &self.rauch.p_minus).scale(1.0 / eps))
    }
}

/// The x >= 0 part of a source given on the right half-line or the full line.
fn right_side(f_hat: &FrequencyField) -> Result<FrequencyField> {
    match f_hat.side {
        Side::Plus => Ok(f_hat.clone()),
        Side::Full => Ok(f_hat.restrict(Side::Plus)),
        Side::Minus => Err(Error::Config("interior source must cover x >= 0".into())),
    }
}

fn envelope(x: f64) -> f64 {
    (-x * x).exp()
}

fn envelope_d1(x: f64) -> f64 {
    -2.0 * x * envelope(x)
}

fn envelope_d2(x: f64) -> f64 {
    (4.0 * x * x - 2.0) * envelope(x)
}

fn profile(zeta: &Frequency, grid: &XGrid, side: Side, v: &CVec, f: fn(f64) -> f64) -> FrequencyField {
    FrequencyField::from_fn(zeta, side, grid, v.len(), |x| v * Complex64::new(f(x), 0.0))
}

/// Bounded solution on x > 0 of u' = A u + A_d^{-1} f_hat with
/// Gamma u(0) = Gamma g_hat.
pub fn reference_solution(
    sys: &HyperbolicSystem,
    zeta: &Frequency,
    f_hat: &FrequencyField,
    g_hat: &CVec,
    tol: &SymbolTolerances,
) -> Result<FrequencyField> {
    let data = stable_splitting(sys, zeta, tol)?;
    let det = subspace_det(&data.split.basis_minus, sys.ker_gamma())?;
    if det < tol.ulc_threshold {
        return Err(Error::UlcViolated {
            zeta: zeta.to_string(),
            det,
        });
    }
    let g = sys.gamma_complex();
    let src = right_side(f_hat)?.apply(sys.a_normal_inv());
    bounded_halfline_solve(
        &data.a_matrix,
        Side::Plus,
        &src,
        &BoundaryCondition::Rows(g.clone(), &g * g_hat),
        tol.axis_tol,
    )
}

/// Polarized part y = U_+^* V on x < 0 of y' = M_w y + U_+^* A_R h(x),
/// y(0) = y0, bounded as x -> -infinity.
fn polarized(setup: &KreissSetup, drive: &FrequencyField, y0: &CVec) -> Result<FrequencyField> {
    let k = setup.u_plus.ncols();
    let src = drive.apply(&(setup.u_plus.adjoint() * &setup.rauch.a_r));
    bounded_halfline_solve(
        &setup.m_w,
        Side::Minus,
        &src,
        &BoundaryCondition::Rows(identity(k), y0.clone()),
        setup.axis_tol,
    )
}

/// Left extension in the u-frame: R^{-1}(U_+ y + c) with the polarized y
/// started from P^+ R u(0).
pub fn left_extension(
    setup: &KreissSetup,
    grid: &XGrid,
    u_trace: &CVec,
    g_hat: &CVec,
) -> Result<FrequencyField> {
    let c0 = setup.target(g_hat);
    let c = profile(&setup.zeta, grid, Side::Minus, &c0, envelope);
    let y0 = setup.u_plus.adjoint() * (&setup.rauch.r * u_trace);
    let y = polarized(setup, &c, &y0)?;
    let v = y.apply(&setup.u_plus).add(&c);
    Ok(v.apply(&setup.rauch.r_inv))
}

/// Profiles in the v-frame.
#[derive(Debug, Clone)]
pub struct KreissProfileSet {
    pub v0_plus: FrequencyField,
    pub v0_minus: FrequencyField,
    pub v1_minus: FrequencyField,
    /// L2 norm on x < 0 of S_R V1' - S_R A_R V1 (the eps^1 residual coefficient).
    pub residual_norm: f64,
}

impl KreissProfileSet {
    /// V0^- + eps V1^- on x < 0, V0^+ on x > 0, as one full-line field.
    pub fn approximation(&self, eps: f64) -> FrequencyField {
        let left = self.v0_minus.add(&self.v1_minus.scale(eps));
        join(&left, &self.v0_plus)
    }
}

/// Concatenates a minus-side and a plus-side field; the value at 0 is taken
/// from the left.
pub fn join(left: &FrequencyField, right: &FrequencyField) -> FrequencyField {
    let n = left.dim();
    let nl = left.x.len();
    let nr = right.x.len();
    let mut x = left.x.clone();
    x.extend_from_slice(&right.x[1..]);
    let mut values = CMat::zeros(n, nl + nr - 1);
    values.columns_mut(0, nl).copy_from(&left.values);
    values
        .columns_mut(nl, nr - 1)
        .copy_from(&right.values.columns(1, nr - 1));
    FrequencyField {
        zeta: left.zeta.clone(),
        side: Side::Full,
        x,
        values,
    }
}

pub fn kreiss_profiles(
    sys: &HyperbolicSystem,
    setup: &KreissSetup,
    grid: &XGrid,
    f_hat: &FrequencyField,
    g_hat: &CVec,
) -> Result<KreissProfileSet> {
    let zeta = &setup.zeta;
    let rd = &setup.rauch;
    let n = sys.state_dim();
    let c0 = setup.target(g_hat);
    let v0_plus = bounded_halfline_solve(
        &rd.a_r,
        Side::Plus,
        &setup.v_source(sys, f_hat)?,
        &BoundaryCondition::Projector(rd.p_minus.clone(), c0.clone()),
        setup.axis_tol,
    )?;
    let c = profile(zeta, grid, Side::Minus, &c0, envelope);
    let dc = profile(zeta, grid, Side::Minus, &c0, envelope_d1);
    let ddc = profile(zeta, grid, Side::Minus, &c0, envelope_d2);
    let y0 = setup.u_plus.adjoint() * v0_plus.trace();
    let y = polarized(setup, &c, &y0)?;
    let v0_minus = y.apply(&setup.u_plus).add(&c);

    // P^- V1 = q1 = S_R (c' - P^- A_R V0^-)
    let pa = &rd.p_minus * &rd.a_r;
    let q1 = dc.sub(&v0_minus.apply(&pa)).apply(&rd.s_r);
    // V1^+ solves the homogeneous right problem with P^- V1^+(0) = q1(0).
    let zero_right = FrequencyField::zeros(zeta, Side::Plus, grid, n);
    let v1_plus = bounded_halfline_solve(
        &rd.a_r,
        Side::Plus,
        &zero_right,
        &BoundaryCondition::Projector(rd.p_minus.clone(), q1.trace()),
        setup.axis_tol,
    )?;
    let z0 = setup.u_plus.adjoint() * v1_plus.trace();
    let z = polarized(setup, &q1, &z0)?;
    let v1_minus = z.apply(&setup.u_plus).add(&q1);

    // q1' = S_R (c'' - P^- A_R (U_+ y' + c')), y' = M_w y + U_+^* A_R c
    let ua = setup.u_plus.adjoint() * &rd.a_r;
    let dy = y.apply(&setup.m_w).add(&c.apply(&ua));
    let dv0 = dy.apply(&setup.u_plus).add(&dc);
    let dq1 = ddc.sub(&dv0.apply(&pa)).apply(&rd.s_r);
    // S_R V1' - S_R A_R V1 has no P^+ part by construction.
    let rho = dq1.sub(&v1_minus.apply(&pa)).apply(&rd.s_r);
    Ok(KreissProfileSet {
        v0_plus,
        v0_minus,
        v1_minus,
        residual_norm: rho.l2(),
    })
}

/// Exact solution of the penalized transmission problem in the v-frame:
/// S_R v' = S_R A_R v + (1/eps) P^-(v - c) on x < 0 and the conjugated
/// reference equation on x > 0, continuous at 0 and bounded.
pub fn solve_penalized_kreiss(
    sys: &HyperbolicSystem,
    setup: &KreissSetup,
    grid: &XGrid,
    eps: f64,
    f_hat: &FrequencyField,
    g_hat: &CVec,
) -> Result<FrequencyField> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {}", eps)));
    }
    let rd = &setup.rauch;
    let left = setup.left_matrix(eps)?;
    let s_inv = inverse(&rd.s_r, "S_R")?;
    let c0 = setup.target(g_hat);
    let drive = (s_inv * c0).scale(-1.0 / eps);
    let src_left = profile(&setup.zeta, grid, Side::Minus, &drive, envelope);
    transmission_solve(
        &left,
        &src_left,
        &rd.a_r,
        &setup.v_source(sys, f_hat)?,
        setup.axis_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn reference_wave_example() {
        let sys = HyperbolicSystem::wave(1.0);
        let grid = XGrid::default();
        let z = Frequency::gt(1.0, 0.0);
        let f = FrequencyField::zeros(&z, Side::Plus, &grid, 2);
        let g = CVec::from_vec(vec![c(1.0), c(0.0)]);
        let u = reference_solution(&sys, &z, &f, &g, &SymbolTolerances::default()).unwrap();
        for (i, &x) in u.x.iter().enumerate() {
            let e = (-x).exp();
            assert!((u.values[(0, i)] - c(e)).norm() < 1e-12);
            assert!((u.values[(1, i)] - c(-e)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_data_gives_zero_everything() {
        let sys = HyperbolicSystem::wave(1.0);
        let grid = XGrid::default();
        let z = Frequency::gt(1.0, 0.7);
        let tol = SymbolTolerances::default();
        let setup = KreissSetup::new(&sys, &z, 2.0, &tol).unwrap();
        let f = FrequencyField::zeros(&z, Side::Plus, &grid, 2);
        let g = CVec::zeros(2);
        let p = kreiss_profiles(&sys, &setup, &grid, &f, &g).unwrap();
        assert_eq!(p.v0_plus.max_norm() + p.v0_minus.max_norm() + p.v1_minus.max_norm(), 0.0);
        let v = solve_penalized_kreiss(&sys, &setup, &grid, 0.01, &f, &g).unwrap();
        assert_eq!(v.max_norm(), 0.0);
        assert_eq!(left_extension(&setup, &grid, &CVec::zeros(2), &g).unwrap().max_norm(), 0.0);
    }

    #[test]
    fn profiles_are_continuous_and_meet_the_boundary_row() {
        let sys = HyperbolicSystem::wave(1.0);
        let grid = XGrid::default();
        let z = Frequency::gt(1.0, -0.4);
        let tol = SymbolTolerances::default();
        let setup = KreissSetup::new(&sys, &z, 2.0, &tol).unwrap();
        let f = FrequencyField::from_fn(&z, Side::Plus, &grid, 2, |x| {
            CVec::from_vec(vec![c((-(x - 1.5).powi(2) * 4.0).exp()), c(0.0)])
        });
        let g = CVec::from_vec(vec![c(1.0), c(0.0)]);
        let p = kreiss_profiles(&sys, &setup, &grid, &f, &g).unwrap();
        assert!((p.v0_plus.trace() - p.v0_minus.trace()).norm() < 1e-12);
        let bc = &setup.rauch.p_minus * p.v0_plus.trace() - setup.target(&g);
        assert!(bc.norm() < 1e-12);
        assert!(p.residual_norm.is_finite());
        // the left extension of the reference trace is V0^- in the u-frame
        let u = reference_solution(&sys, &z, &f, &g, &tol).unwrap();
        let ext = left_extension(&setup, &grid, &u.trace(), &g).unwrap();
        assert!((ext.trace() - u.trace()).norm() < 1e-8);
        let v0 = p.v0_minus.apply(&setup.rauch.r_inv);
        assert!((ext.values - v0.values).norm() < 1e-8);
    }
}
