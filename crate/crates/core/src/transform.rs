//! Grids and the discrete Fourier-Laplace transform in the tangential
//! variables (t, y).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing nodes in the normal variable x; 0 is always a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XGrid {
    nodes: Vec<f64>,
    zero: usize,
}

impl XGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("x grid must be strictly increasing".into()));
        }
        let zero = nodes
            .iter()
            .position(|&x| x == 0.0)
            .ok_or_else(|| Error::Config("x grid must contain 0".into()))?;
        Ok(XGrid { nodes, zero })
    }

    /// `n` uniform cells on [-l_minus, l_plus]; the cell size must divide both ends.
    pub fn uniform(l_minus: f64, l_plus: f64, n: usize) -> Result<Self> {
        let h = (l_minus + l_plus) / n as f64;
        let n_minus = (l_minus / h).round() as usize;
        if ((n_minus as f64) * h - l_minus).abs() > 1e-9 * h {
            return Err(Error::Config("0 is not a node of the uniform grid".into()));
        }
        let nodes = (0..=n)
            .map(|i| (i as f64 - n_minus as f64) * h)
            .collect();
        XGrid::from_nodes(nodes)
    }

    /// Symmetric grid on [-l, l], dyadically refined toward x = 0: each
    /// interval [2^-(j+1), 2^-j] for j < levels gets `per_level` cells, and
    /// [1, l] is covered with spacing `1/per_level`.
    pub fn graded(l: f64, levels: u32, per_level: usize) -> Result<Self> {
        let mut right = vec![0.0];
        let inner = 2f64.powi(-(levels as i32));
        for i in 1..=per_level {
            right.push(inner * i as f64 / per_level as f64);
        }
        for j in (0..levels as i32).rev() {
            let a = 2f64.powi(-(j + 1));
            let b = 2f64.powi(-j);
            for i in 1..=per_level {
                right.push(a + (b - a) * i as f64 / per_level as f64);
            }
        }
        let n_outer = ((l - 1.0) * per_level as f64).round() as usize;
        for i in 1..=n_outer {
            right.push(1.0 + (l - 1.0) * i as f64 / n_outer as f64);
        }
        let mut nodes: Vec<f64> = right.iter().skip(1).rev().map(|x| -x).collect();
        nodes.extend(right);
        XGrid::from_nodes(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    /// Index of the node x = 0.
    pub fn zero_index(&self) -> usize {
        self.zero
    }
    /// Nodes x <= 0, ascending.
    pub fn left(&self) -> &[f64] {
        &self.nodes[..=self.zero]
    }
    /// Nodes x >= 0, ascending.
    pub fn right(&self) -> &[f64] {
        &self.nodes[self.zero..]
    }

    /// Trapezoid weights for the node slice `xs`.
    pub fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; xs.len()];
        for i in 0..xs.len().saturating_sub(1) {
            let h = xs[i + 1] - xs[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        w
    }
}

impl Default for XGrid {
    fn default() -> Self {
        XGrid::graded(8.0, 14, 32).expect("default grid is valid")
    }
}

/// Discretization of the tangential domain (0, T) x (0, y_length).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentialGrid {
    pub t_horizon: f64,
    pub n_t: usize,
    pub n_y: usize,
    pub y_length: f64,
    pub pad_factor: usize,
    pub gamma: f64,
    pub x_grid: XGrid,
}

impl TangentialGrid {
    /// Grid with the default weight gamma = 8 / T.
    pub fn new(t_horizon: f64, n_t: usize, n_y: usize, y_length: f64, pad_factor: usize) -> Result<Self> {
        let g = TangentialGrid {
            t_horizon,
            n_t,
            n_y,
            y_length,
            pad_factor,
            gamma: 8.0 / t_horizon,
            x_grid: XGrid::default(),
        };
        g.check()?;
        Ok(g)
    }

    pub fn check(&self) -> Result<()> {
        if !self.n_t.is_power_of_two() || !self.n_y.is_power_of_two() {
            return Err(Error::Config("n_t and n_y must be powers of two".into()));
        }
        if self.pad_factor == 0 || !(self.gamma > 0.0) || !(self.t_horizon > 0.0) || !(self.y_length > 0.0) {
            return Err(Error::Config(
                "pad_factor, gamma, T and y_length must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_horizon / self.n_t as f64
    }
    pub fn dy(&self) -> f64 {
        self.y_length / self.n_y as f64
    }
    pub fn padded_len(&self) -> usize {
        self.n_t * self.pad_factor
    }
    pub fn times(&self) -> Vec<f64> {
        (0..self.n_t).map(|k| k as f64 * self.dt()).collect()
    }

    /// Angular frequencies of the padded t-transform, FFT order.
    pub fn taus(&self) -> Vec<f64> {
        fft_frequencies(self.padded_len(), self.dt())
    }
    pub fn etas(&self) -> Vec<f64> {
        fft_frequencies(self.n_y, self.dy())
    }
}

fn fft_frequencies(n: usize, h: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / (n as f64 * h);
    (0..n)
        .map(|k| {
            let k = if k < n.div_ceil(2) { k as i64 } else { k as i64 - n as i64 };
            base * k as f64
        })
        .collect()
}

/// Samples of a scalar field on the (t, y) grid. The first `n_pre` rows hold
/// samples at negative times (t = -n_pre dt, ...), which must vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub n_pre: usize,
    pub values: DMatrix<f64>,
}

impl SampledField {
    pub fn causal(values: DMatrix<f64>) -> Self {
        SampledField { n_pre: 0, values }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: &TangentialGrid, f: F) -> Self {
        let dt = grid.dt();
        let dy = grid.dy();
        SampledField::causal(DMatrix::from_fn(grid.n_t, grid.n_y, |k, m| {
            f(k as f64 * dt, m as f64 * dy)
        }))
    }
}

/// Fourier-Laplace coefficients: rows tau_k (padded, FFT order), columns eta_m.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: DMatrix<Complex64>,
}

/// g_hat(tau_k, eta_m) = dt dy sum e^{-gamma t} g(t, y) e^{-i(tau t + eta y)}
/// over the zero-padded horizon.
pub fn tangential_transform(field: &SampledField, grid: &TangentialGrid) -> Result<Spectrum> {
    grid.check()?;
    let rows = field.values.nrows();
    if rows != field.n_pre + grid.n_t || field.values.ncols() != grid.n_y {
        return Err(Error::DimensionMismatch(format!(
            "field is {}x{}, grid expects {}x{}",
            rows,
            field.values.ncols(),
            field.n_pre + grid.n_t,
            grid.n_y
        )));
    }
    let pre_mass = field
        .values
        .rows(0, field.n_pre)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if pre_mass > 1e-12 {
        return Err(Error::NonCausalInput(pre_mass));
    }
    let big = grid.padded_len();
    let dt = grid.dt();
    let mut data = DMatrix::<Complex64>::zeros(big, grid.n_y);
    for k in 0..grid.n_t {
        let w = (-grid.gamma * k as f64 * dt).exp();
        for m in 0..grid.n_y {
            data[(k, m)] = Complex64::new(w * field.values[(field.n_pre + k, m)], 0.0);
        }
    }
    fft_2d(&mut data, false);
    let scale = Complex64::new(dt * grid.dy(), 0.0);
    Ok(Spectrum {
        values: data.map(|v| v * scale),
    })
}

/// Inverse of `tangential_transform` restricted to the unpadded horizon.
pub fn assemble_physical(spec: &Spectrum, grid: &TangentialGrid) -> Result<DMatrix<f64>> {
    grid.check()?;
    let big = grid.padded_len();
    if spec.values.shape() != (big, grid.n_y) {
        return Err(Error::DimensionMismatch(format!(
            "spectrum is {}x{}, grid expects {}x{}",
            spec.values.nrows(),
            spec.values.ncols(),
            big,
            grid.n_y
        )));
    }
    let mut data = spec.values.clone();
    fft_2d(&mut data, true);
    let dt = grid.dt();
    let norm = 1.0 / (big as f64 * dt * grid.n_y as f64 * grid.dy());
    Ok(DMatrix::from_fn(grid.n_t, grid.n_y, |k, m| {
        data[(k, m)].re * norm * (grid.gamma * k as f64 * dt).exp()
    }))
}

fn fft_2d(data: &mut DMatrix<Complex64>, inverse: bool) {
    let (nr, nc) = data.shape();
    let mut planner = FftPlanner::new();
    let (fr, fc) = if inverse {
        (planner.plan_fft_inverse(nr), planner.plan_fft_inverse(nc))
    } else {
        (planner.plan_fft_forward(nr), planner.plan_fft_forward(nc))
    };
    // nalgebra storage is column-major, so columns are contiguous.
    for mut col in data.column_iter_mut() {
        fr.process(col.as_mut_slice());
    }
    if nc > 1 {
        let mut row = vec![Complex64::new(0.0, 0.0); nc];
        for r in 0..nr {
            for (c, v) in row.iter_mut().enumerate() {
                *v = data[(r, c)];
            }
            fc.process(&mut row);
            for (c, v) in row.iter().enumerate() {
                data[(r, c)] = *v;
            }
        }
    }
}

fn diff(values: &DMatrix<f64>, h: f64, along_rows: bool) -> DMatrix<f64> {
    let (nr, nc) = values.shape();
    let n = if along_rows { nr } else { nc };
    let at = |i: usize, j: usize| {
        if along_rows {
            values[(i, j)]
        } else {
            values[(j, i)]
        }
    };
    let other = if along_rows { nc } else { nr };
    let mut out = DMatrix::zeros(nr, nc);
    if n < 2 {
        return out;
    }
    for j in 0..other {
        for i in 0..n {
            let d = if i == 0 {
                (at(1, j) - at(0, j)) / h
            } else if i == n - 1 {
                (at(n - 1, j) - at(n - 2, j)) / h
            } else {
                (at(i + 1, j) - at(i - 1, j)) / (2.0 * h)
            };
            if along_rows {
                out[(i, j)] = d;
            } else {
                out[(j, i)] = d;
            }
        }
    }
    out
}

/// Discrete H^rho_gamma norm of e^{-gamma t} u for rho in {0, 1, 2}:
/// sum over |alpha| <= rho of gamma^{2(rho-|alpha|)} ||d^alpha(e^{-gamma t} u)||^2.
pub fn weighted_norm(field: &SampledField, grid: &TangentialGrid, rho: u32) -> Result<f64> {
    if rho > 2 {
        return Err(Error::Config(format!("weighted norm order {} not supported", rho)));
    }
    let dt = grid.dt();
    let dy = grid.dy();
    let rows = field.values.nrows() - field.n_pre;
    let w = DMatrix::from_fn(rows, field.values.ncols(), |k, m| {
        (-grid.gamma * k as f64 * dt).exp() * field.values[(field.n_pre + k, m)]
    });
    let l2 = |m: &DMatrix<f64>| m.iter().map(|v| v * v).sum::<f64>() * dt * dy;
    let g2 = grid.gamma * grid.gamma;
    let mut total = g2.powi(rho as i32) * l2(&w);
    if rho >= 1 {
        let wt = diff(&w, dt, true);
        let wy = diff(&w, dy, false);
        total += g2.powi(rho as i32 - 1) * (l2(&wt) + l2(&wy));
        if rho == 2 {
            total += l2(&diff(&wt, dt, true))
                + 2.0 * l2(&diff(&wt, dy, false))
                + l2(&diff(&wy, dy, false));
        }
    }
    Ok(total.sqrt())
}

/// Smooth compactly supported bump on (0, width), peak 1 at width/2.
pub fn bump(t: f64, width: f64) -> f64 {
    let s = 2.0 * t / width - 1.0;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}
