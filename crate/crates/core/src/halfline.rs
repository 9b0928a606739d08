//! Bounded solutions of constant-coefficient ODEs w' = M w + s(x) on a
//! half-line or the full line, and the two-sided interface matching used by
//! both penalized solvers.
//!
//! The stable part of M is integrated forward from the first node and the
//! unstable part backward from the last node, each restricted to its own
//! invariant block, so no exponential ever grows along the sweep.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    condition_number, exp_with_moments, ordered_spectral_split, CMat, CVec, SpectralSplit,
    SubspaceBasis,
};
use crate::symbol::Frequency;
use crate::transform::XGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
    Full,
}

/// Complex N-vector field over the x nodes of one side of the interface.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyField {
    pub zeta: Frequency,
    pub side: Side,
    pub x: Vec<f64>,
    /// N x len(x), one column per node.
    pub values: CMat,
}

impl FrequencyField {
    pub fn nodes_for(grid: &XGrid, side: Side) -> Vec<f64> {
        match side {
            Side::Plus => grid.right().to_vec(),
            Side::Minus => grid.left().to_vec(),
            Side::Full => grid.nodes().to_vec(),
        }
    }

    pub fn zeros(zeta: &Frequency, side: Side, grid: &XGrid, n: usize) -> Self {
        let x = Self::nodes_for(grid, side);
        let values = CMat::zeros(n, x.len());
        FrequencyField {
            zeta: zeta.clone(),
            side,
            x,
            values,
        }
    }

    pub fn from_fn<F: Fn(f64) -> CVec>(
        zeta: &Frequency,
        side: Side,
        grid: &XGrid,
        n: usize,
        f: F,
    ) -> Self {
        let x = Self::nodes_for(grid, side);
        let mut values = CMat::zeros(n, x.len());
        for (i, &xi) in x.iter().enumerate() {
            values.set_column(i, &f(xi));
        }
        FrequencyField {
            zeta: zeta.clone(),
            side,
            x,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn at(&self, i: usize) -> CVec {
        self.values.column(i).into_owned()
    }

    /// Value at x = 0.
    pub fn trace(&self) -> CVec {
        let i = self
            .x
            .iter()
            .position(|&x| x == 0.0)
            .expect("field grid contains 0");
        self.at(i)
    }

    /// Restriction of a full-line field to one side.
    pub fn restrict(&self, side: Side) -> FrequencyField {
        let keep: Vec<usize> = (0..self.x.len())
            .filter(|&i| match side {
                Side::Plus => self.x[i] >= 0.0,
                Side::Minus => self.x[i] <= 0.0,
                Side::Full => true,
            })
            .collect();
        FrequencyField {
            zeta: self.zeta.clone(),
            side,
            x: keep.iter().map(|&i| self.x[i]).collect(),
            values: self.values.select_columns(&keep),
        }
    }

    pub fn map_values<F: Fn(&CMat) -> CMat>(&self, f: F) -> FrequencyField {
        FrequencyField {
            values: f(&self.values),
            ..self.clone()
        }
    }

    /// Pointwise left multiplication by a constant matrix.
    pub fn apply(&self, m: &CMat) -> FrequencyField {
        self.map_values(|v| m * v)
    }

    pub fn sub(&self, other: &FrequencyField) -> FrequencyField {
        debug_assert_eq!(self.x, other.x);
        self.map_values(|v| v - &other.values)
    }

    pub fn add(&self, other: &FrequencyField) -> FrequencyField {
        debug_assert_eq!(self.x, other.x);
        self.map_values(|v| v + &other.values)
    }

    pub fn scale(&self, s: f64) -> FrequencyField {
        self.map_values(|v| v.scale(s))
    }

    /// Squared trapezoid L2 norm over nodes with x in [lo, hi].
    pub fn l2_sq_on(&self, lo: f64, hi: f64) -> f64 {
        let idx: Vec<usize> = (0..self.x.len())
            .filter(|&i| self.x[i] >= lo && self.x[i] <= hi)
            .collect();
        if idx.len() < 2 {
            return 0.0;
        }
        let xs: Vec<f64> = idx.iter().map(|&i| self.x[i]).collect();
        let w = XGrid::trapezoid_weights(&xs);
        idx.iter()
            .zip(w)
            .map(|(&i, wi)| wi * self.values.column(i).norm_squared())
            .sum()
    }

    pub fn l2_sq(&self) -> f64 {
        self.l2_sq_on(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn l2(&self) -> f64 {
        self.l2_sq().sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        self.values
            .column_iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// |proj w| at the far end of the field relative to the field maximum.
    pub fn end_mass(&self, proj: &CMat) -> f64 {
        let end = match self.side {
            Side::Minus => 0,
            _ => self.x.len() - 1,
        };
        let m = self.max_norm();
        if m == 0.0 {
            0.0
        } else {
            (proj * self.values.column(end)).norm() / m
        }
    }

    /// Max over interior nodes of |w' - M w - s| with a three-point
    /// non-uniform derivative.
    pub fn ode_residual(&self, m: &CMat, source: &CMat) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.x.len().saturating_sub(1) {
            let (h0, h1) = (self.x[i] - self.x[i - 1], self.x[i + 1] - self.x[i]);
            let a = -h1 / (h0 * (h0 + h1));
            let b = (h1 - h0) / (h0 * h1);
            let c = h0 / (h1 * (h0 + h1));
            let d = self.values.column(i - 1) * Complex64::new(a, 0.0)
                + self.values.column(i) * Complex64::new(b, 0.0)
                + self.values.column(i + 1) * Complex64::new(c, 0.0);
            let r = d - m * self.values.column(i) - source.column(i);
            worst = worst.max(r.norm());
        }
        worst
    }
}

/// Boundary condition at x = 0 for a half-line solve.
#[derive(Debug, Clone)]
pub enum BoundaryCondition {
    /// G w(0) = b with G of full row rank.
    Rows(CMat, CVec),
    /// P w(0) = P b for a (possibly oblique) projector P.
    Projector(CMat, CVec),
}

impl BoundaryCondition {
    fn rows(&self) -> (CMat, CVec) {
        match self {
            BoundaryCondition::Rows(g, b) => (g.clone(), b.clone()),
            BoundaryCondition::Projector(p, b) => {
                let u = SubspaceBasis::range_of(p, 1e-10);
                let ut = u.columns().adjoint();
                (&ut * p, &ut * p * b)
            }
        }
    }
}

pub(crate) fn split_with_gap(m: &CMat, axis_tol: f64) -> Result<SpectralSplit> {
    ordered_spectral_split(m, axis_tol).map_err(|e| match e {
        Error::EigenvalueOnAxis { re, .. } => Error::NoGap(re.abs()),
        other => other,
    })
}

/// Exponential and moment weights for one block, recomputed whenever the
/// spacing changes.
struct Stepper {
    block: CMat,
    h: f64,
    e: CMat,
    w: [CMat; 3],
}

impl Stepper {
    fn new(block: CMat) -> Self {
        Stepper {
            block,
            h: f64::NAN,
            e: CMat::zeros(0, 0),
            w: [CMat::zeros(0, 0), CMat::zeros(0, 0), CMat::zeros(0, 0)],
        }
    }

    fn prepare(&mut self, h: f64) {
        if !((h - self.h).abs() <= 1e-13 * h) {
            let (e, w) = exp_with_moments(&self.block, h);
            self.h = h;
            self.e = e;
            self.w = w;
        }
    }

    /// int over one step of e^{T(h-s)} p(s), with p the quadratic through
    /// (0, sa), (h, sb) and (r h, sr).
    fn integral(&self, sa: &CVec, sb: &CVec, third: Option<(f64, CVec)>) -> CVec {
        let d = sb - sa;
        match third {
            Some((r, sr)) => {
                let c2 = (&sr - sa - &d * Complex64::new(r, 0.0)) / Complex64::new(r * r - r, 0.0);
                let c1 = &d - &c2;
                &self.w[0] * sa + &self.w[1] * c1 + &self.w[2] * c2
            }
            None => &self.w[0] * sa + &self.w[1] * d,
        }
    }
}

/// Particular bounded solution of w' = M w + s on the nodes `x`:
/// stable block from the first node, unstable block from the last, both
/// started at zero. The source is interpolated by local quadratics.
fn particular(split: &SpectralSplit, x: &[f64], source: &CMat) -> CMat {
    let n = split.proj_minus.nrows();
    let len = x.len();
    let mut out = CMat::zeros(n, len);
    if source.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
        return out;
    }
    let km = split.dim_minus();
    if km > 0 {
        let s = split.coords_minus() * source;
        let mut st = Stepper::new(split.block_minus.clone());
        let mut y = CVec::zeros(km);
        let q = split.basis_minus.columns();
        for i in 1..len {
            let h = x[i] - x[i - 1];
            st.prepare(h);
            let third = if i >= 2 {
                Some(((x[i - 2] - x[i - 1]) / h, s.column(i - 2).into_owned()))
            } else if i + 1 < len {
                Some(((x[i + 1] - x[i - 1]) / h, s.column(i + 1).into_owned()))
            } else {
                None
            };
            let inc = st.integral(&s.column(i - 1).into_owned(), &s.column(i).into_owned(), third);
            y = &st.e * &y + inc;
            let mut dst = out.column_mut(i);
            dst += q * &y;
        }
    }
    let kp = split.dim_plus();
    if kp > 0 {
        let s = split.coords_plus() * source;
        // Backward sweep: the same quadrature for -T, measured from x[i+1].
        let mut st = Stepper::new(-&split.block_plus);
        let mut y = CVec::zeros(kp);
        let q = split.basis_plus.columns();
        for i in (0..len - 1).rev() {
            let h = x[i + 1] - x[i];
            st.prepare(h);
            let third = if i + 2 < len {
                Some(((x[i + 1] - x[i + 2]) / h, s.column(i + 2).into_owned()))
            } else if i >= 1 {
                Some(((x[i + 1] - x[i - 1]) / h, s.column(i - 1).into_owned()))
            } else {
                None
            };
            let inc = st.integral(&s.column(i + 1).into_owned(), &s.column(i).into_owned(), third);
            y = &st.e * &y - inc;
            let mut dst = out.column_mut(i);
            dst += q * &y;
        }
    }
    out
}

/// General solution w = particular + Q F(x) c on one side of the interface,
/// where Q F(x) spans the modes that stay bounded away from x = 0.
pub struct HalfLineRepresentation {
    pub particular: CMat,
    pub basis: CMat,
    /// exp(T x_i) for each node.
    pub fundamental: Vec<CMat>,
    pub zero_index: usize,
}

impl HalfLineRepresentation {
    pub fn build(m: &CMat, side: Side, x: &[f64], source: &CMat, axis_tol: f64) -> Result<Self> {
        let split = split_with_gap(m, axis_tol)?;
        Self::from_split(&split, side, x, source)
    }

    pub fn from_split(split: &SpectralSplit, side: Side, x: &[f64], source: &CMat) -> Result<Self> {
        if source.ncols() != x.len() || source.nrows() != split.proj_minus.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "source is {}x{} for {} nodes",
                source.nrows(),
                source.ncols(),
                x.len()
            )));
        }
        let particular = particular(split, x, source);
        let (basis, block) = match side {
            Side::Plus => (split.basis_minus.columns().clone(), &split.block_minus),
            Side::Minus => (split.basis_plus.columns().clone(), &split.block_plus),
            Side::Full => {
                let n = split.proj_minus.nrows();
                (CMat::zeros(n, 0), &split.block_minus)
            }
        };
        let k = basis.ncols();
        let zero_index = x
            .iter()
            .position(|&v| v == 0.0)
            .ok_or_else(|| Error::Config("grid must contain 0".into()))?;
        let mut fundamental = vec![CMat::zeros(k, k); x.len()];
        if k > 0 {
            fundamental[zero_index] = CMat::identity(k, k);
            let mut last_h = f64::NAN;
            let mut e = CMat::zeros(k, k);
            // Step away from 0 in the direction where the modes decay.
            let order: Vec<usize> = match side {
                Side::Plus => ((zero_index + 1)..x.len()).collect(),
                _ => (0..zero_index).rev().collect(),
            };
            let mut prev = zero_index;
            for i in order {
                let h = x[i] - x[prev];
                if !((h - last_h).abs() <= 1e-13 * h.abs()) {
                    e = block.scale(h).exp();
                    last_h = h;
                }
                fundamental[i] = &e * &fundamental[prev];
                prev = i;
            }
        }
        Ok(HalfLineRepresentation {
            particular,
            basis,
            fundamental,
            zero_index,
        })
    }

    pub fn free_count(&self) -> usize {
        self.basis.ncols()
    }

    pub fn particular_at_zero(&self) -> CVec {
        self.particular.column(self.zero_index).into_owned()
    }

    pub fn evaluate(&self, c: &CVec) -> CMat {
        let mut out = self.particular.clone();
        if c.is_empty() {
            return out;
        }
        for (i, f) in self.fundamental.iter().enumerate() {
            let v = &self.basis * (f * c);
            let mut dst = out.column_mut(i);
            dst += v;
        }
        out
    }
}

/// Unique solution of w' = M w + s bounded on the half-line, with the
/// given condition at x = 0.
pub fn bounded_halfline_solve(
    m: &CMat,
    side: Side,
    source: &FrequencyField,
    bc: &BoundaryCondition,
    axis_tol: f64,
) -> Result<FrequencyField> {
    if side == Side::Full {
        return Err(Error::Config("half-line solve needs side plus or minus".into()));
    }
    let rep = HalfLineRepresentation::build(m, side, &source.x, &source.values, axis_tol)?;
    let (g, b) = bc.rows();
    let free = rep.free_count();
    if g.nrows() != free {
        return Err(Error::IllPosedBoundaryCount {
            free,
            rows: g.nrows(),
        });
    }
    let lhs = &g * &rep.basis;
    let rhs = b - &g * rep.particular_at_zero();
    let c = if free == 0 {
        CVec::zeros(0)
    } else {
        lhs.lu().solve(&rhs).ok_or(Error::Singular("half-line boundary rows"))?
    };
    Ok(FrequencyField {
        zeta: source.zeta.clone(),
        side,
        x: source.x.clone(),
        values: rep.evaluate(&c),
    })
}

/// Solution of w' = M w + s bounded on the whole line.
pub fn full_line_solve(m: &CMat, source: &FrequencyField, axis_tol: f64) -> Result<FrequencyField> {
    let split = split_with_gap(m, axis_tol)?;
    Ok(FrequencyField {
        zeta: source.zeta.clone(),
        side: Side::Full,
        x: source.x.clone(),
        values: particular(&split, &source.x, &source.values),
    })
}

/// Transmission problem: w' = M_L w + s_L on x < 0, w' = M_R w + s_R on
/// x > 0, w continuous at 0 and bounded at both ends.
pub fn transmission_solve(
    m_left: &CMat,
    src_left: &FrequencyField,
    m_right: &CMat,
    src_right: &FrequencyField,
    axis_tol: f64,
) -> Result<FrequencyField> {
    let left = HalfLineRepresentation::build(m_left, Side::Minus, &src_left.x, &src_left.values, axis_tol)?;
    let right = HalfLineRepresentation::build(m_right, Side::Plus, &src_right.x, &src_right.values, axis_tol)?;
    let n = m_left.nrows();
    let (kl, kr) = (left.free_count(), right.free_count());
    if kl + kr != n {
        return Err(Error::IllPosedBoundaryCount {
            free: kl + kr,
            rows: n,
        });
    }
    let mut lhs = CMat::zeros(n, n);
    lhs.view_mut((0, 0), (n, kr)).copy_from(&right.basis);
    lhs.view_mut((0, kr), (n, kl)).copy_from(&(-&left.basis));
    let cond = condition_number(&lhs);
    if cond > 1e10 {
        return Err(Error::MatchingSingular(cond));
    }
    let rhs = left.particular_at_zero() - right.particular_at_zero();
    let sol = lhs.lu().solve(&rhs).ok_or(Error::MatchingSingular(f64::INFINITY))?;
    let alpha = sol.rows(0, kr).into_owned();
    let beta = sol.rows(kr, kl).into_owned();
    let wl = left.evaluate(&beta);
    let wr = right.evaluate(&alpha);
    let nl = src_left.x.len();
    let mut x = src_left.x.clone();
    x.extend_from_slice(&src_right.x[1..]);
    let mut values = CMat::zeros(n, x.len());
    values.columns_mut(0, nl).copy_from(&wl);
    values
        .columns_mut(nl, src_right.x.len() - 1)
        .copy_from(&wr.columns(1, src_right.x.len() - 1));
    Ok(FrequencyField {
        zeta: src_right.zeta.clone(),
        side: Side::Full,
        x,
        values,
    })
}
