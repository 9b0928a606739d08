//! Time-domain penalized 1-D wave equation on ]-L, pi[:
//! U_tt - c^2 U_xx + (1/eps^2) 1_{x<0} U = 0, U(t, pi) = 0, U(0, x) = sin x.
//!
//! Leapfrog in time with the mass term averaged over t^{n-1}, t^{n+1}, which
//! keeps the scheme stable for any eps at the usual CFL limit.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rates::{ConvergenceReport, Expectation};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveConfig {
    pub c: f64,
    pub eps: f64,
    pub l_minus: f64,
    /// Intervals on [0, pi]; the left part uses the same spacing.
    pub n_x: usize,
    pub n_t: usize,
    pub t_final: f64,
    pub cfl: f64,
    /// Times at which the full field is kept.
    pub save_times: Vec<f64>,
    /// Each saved frame also carries the field averaged over this many
    /// periods of the fast Klein-Gordon oscillation, centered at the frame.
    pub avg_periods: usize,
    /// Lower edge of the interior error region.
    pub interior_from: f64,
    pub left_data: LeftData,
}

/// Initial data on the fictitious side x < 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LeftData {
    /// sin(x), continued from the physical side.
    Sine,
    Zero,
}

impl WaveConfig {
    /// Defaults: L = 2, T = 4, cfl = 0.9, dx = c eps / 4 (rounded to divide pi).
    pub fn new(c: f64, eps: f64) -> Self {
        let n_x = (4.0 * std::f64::consts::PI / (c * eps)).ceil() as usize;
        let mut cfg = WaveConfig {
            c,
            eps,
            l_minus: 2.0,
            n_x,
            n_t: 0,
            t_final: 4.0,
            cfl: 0.9,
            save_times: vec![0.5],
            avg_periods: 4,
            interior_from: 0.5,
            left_data: LeftData::Sine,
        };
        cfg.n_t = cfg.steps_for_cfl();
        cfg
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        let mut cfg = WaveConfig::new(self.c, eps);
        cfg.l_minus = self.l_minus;
        cfg.t_final = self.t_final;
        cfg.cfl = self.cfl;
        cfg.save_times = self.save_times.clone();
        cfg.avg_periods = self.avg_periods;
        cfg.interior_from = self.interior_from;
        cfg.left_data = self.left_data;
        cfg.n_t = cfg.steps_for_cfl();
        cfg
    }

    pub fn dx(&self) -> f64 {
        std::f64::consts::PI / self.n_x as f64
    }

    /// Frequency of the free oscillation sin(x) cos(omega t) on x < 0.
    pub fn fast_frequency(&self) -> f64 {
        (1.0 / (self.eps * self.eps) + self.c * self.c).sqrt()
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_t as f64
    }

    fn steps_for_cfl(&self) -> usize {
        (self.t_final * self.c / (self.cfl * self.dx())).ceil() as usize
    }

    pub fn check(&self) -> Result<()> {
        if !(self.c > 0.0 && self.eps > 0.0 && self.t_final > 0.0 && self.l_minus > 0.0) {
            return Err(Error::Config("wave parameters must be positive".into()));
        }
        if self.n_x == 0 || self.n_t == 0 {
            return Err(Error::Config("empty wave grid".into()));
        }
        if self.cfl > 1.0 {
            return Err(Error::CflViolation(self.cfl));
        }
        let courant = self.c * self.dt() / self.dx();
        if courant > 1.0 + 1e-12 {
            return Err(Error::CflViolation(courant));
        }
        let limit = self.c * self.eps / 4.0;
        if self.dx() > limit * (1.0 + 1e-12) {
            return Err(Error::LayerUnderresolved { dx: self.dx(), limit });
        }
        Ok(())
    }
}

/// Unpenalized solution on [0, pi].
pub fn exact_wave_solution(c: f64, t: f64, x: f64) -> f64 {
    x.sin() * (c * t).cos()
}

#[derive(Debug, Clone, Serialize)]
pub struct Frame {
    pub t: f64,
    pub u: Vec<f64>,
    /// Time average over the fast-oscillation window (equals `u` when the
    /// window is empty).
    pub u_mean: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveSolution {
    pub x: Vec<f64>,
    pub dt: f64,
    pub frames: Vec<Frame>,
    /// Discrete energy at half steps.
    pub energy: Vec<f64>,
    /// Space-time L2 errors against the exact solution extended by zero.
    pub err_global: f64,
    pub err_interior: f64,
    pub err_plus: f64,
}

impl WaveSolution {
    pub fn frame_near(&self, t: f64) -> Option<&Frame> {
        self.frames
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .filter(|f| (f.t - t).abs() <= self.dt)
    }

    /// Flat little-endian dump: u64 frame count, u64 node count, node
    /// coordinates, then per frame its time followed by the values.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(&(self.frames.len() as u64).to_le_bytes())?;
        out.write_all(&(self.x.len() as u64).to_le_bytes())?;
        for v in &self.x {
            out.write_all(&v.to_le_bytes())?;
        }
        for f in &self.frames {
            out.write_all(&f.t.to_le_bytes())?;
            for v in &f.u {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn solve_penalized_wave(cfg: &WaveConfig) -> Result<WaveSolution> {
    cfg.check()?;
    let dx = cfg.dx();
    let dt = cfg.dt();
    let n_left = (cfg.l_minus / dx).round() as usize;
    let n = n_left + cfg.n_x + 1;
    let x: Vec<f64> = (0..n).map(|i| (i as f64 - n_left as f64) * dx).collect();
    let inv_eps2 = 1.0 / (cfg.eps * cfg.eps);
    let mass: Vec<f64> = (0..n)
        .map(|i| match i.cmp(&n_left) {
            std::cmp::Ordering::Less => inv_eps2,
            std::cmp::Ordering::Equal => 0.5 * inv_eps2,
            std::cmp::Ordering::Greater => 0.0,
        })
        .collect();
    let theta: Vec<f64> = mass.iter().map(|m| 0.5 * dt * dt * m).collect();
    let r2 = (cfg.c * dt / dx).powi(2);
    let interior = |i: usize| i > 0 && i + 1 < n;

    let mut prev: Vec<f64> = (0..n)
        .map(|i| match (interior(i), cfg.left_data) {
            (false, _) => 0.0,
            (true, LeftData::Zero) if x[i] < 0.0 => 0.0,
            _ => x[i].sin(),
        })
        .collect();
    let lap = |u: &[f64], i: usize| u[i - 1] - 2.0 * u[i] + u[i + 1];
    let mut cur = vec![0.0; n];
    for i in 1..n - 1 {
        cur[i] = (prev[i] + 0.5 * r2 * lap(&prev, i)) / (1.0 + theta[i]);
    }

    let energy_of = |a: &[f64], b: &[f64]| -> f64 {
        let mut e = 0.0;
        for i in 0..n {
            let v = (b[i] - a[i]) / dt;
            e += 0.5 * v * v + 0.25 * mass[i] * (a[i] * a[i] + b[i] * b[i]);
            if i + 1 < n {
                e += 0.5 * cfg.c * cfg.c * (a[i + 1] - a[i]) * (b[i + 1] - b[i]) / (dx * dx);
            }
        }
        e * dx
    };

    let mut err_g = 0.0;
    let mut err_i = 0.0;
    let mut err_p = 0.0;
    let mut accumulate = |u: &[f64], t: f64, w: f64| {
        for i in 0..n {
            let exact = if x[i] >= 0.0 { exact_wave_solution(cfg.c, t, x[i]) } else { 0.0 };
            let d2 = (u[i] - exact).powi(2) * w * dx * dt;
            err_g += d2;
            if x[i] >= 0.0 {
                // x = 0 belongs half to each side
                err_p += if i == n_left { 0.5 * d2 } else { d2 };
                if x[i] > cfg.interior_from {
                    err_i += d2;
                }
            }
        }
    };

    let half_window = cfg.avg_periods as f64 * std::f64::consts::PI / cfg.fast_frequency();
    let mut targets: Vec<f64> = cfg.save_times.clone();
    targets.sort_by(f64::total_cmp);
    let mut frames: Vec<Frame> = targets
        .iter()
        .map(|&t| Frame {
            t: ((t / dt).round() * dt).min(cfg.t_final),
            u: Vec::new(),
            u_mean: vec![0.0; n],
        })
        .collect();
    let mut counts = vec![0usize; frames.len()];
    let mut observe = |step: usize, u: &[f64], frames: &mut Vec<Frame>| {
        let t = step as f64 * dt;
        for (f, cnt) in frames.iter_mut().zip(counts.iter_mut()) {
            if (t - f.t).abs() < 0.5 * dt {
                f.u = u.to_vec();
            }
            if (t - f.t).abs() <= half_window + 0.5 * dt {
                for (m, v) in f.u_mean.iter_mut().zip(u) {
                    *m += v;
                }
                *cnt += 1;
            }
        }
    };

    observe(0, &prev, &mut frames);
    observe(1, &cur, &mut frames);
    accumulate(&prev, 0.0, 0.5);
    let mut energy = vec![energy_of(&prev, &cur)];
    let mut next = vec![0.0; n];
    for step in 1..cfg.n_t {
        accumulate(&cur, step as f64 * dt, 1.0);
        for i in 1..n - 1 {
            next[i] = (2.0 * cur[i] + r2 * lap(&cur, i)) / (1.0 + theta[i]) - prev[i];
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        energy.push(energy_of(&prev, &cur));
        observe(step + 1, &cur, &mut frames);
    }
    for (f, cnt) in frames.iter_mut().zip(&counts) {
        f.u_mean.iter_mut().for_each(|m| *m /= *cnt as f64);
    }
    accumulate(&cur, cfg.n_t as f64 * dt, 0.5);

    Ok(WaveSolution {
        x,
        dt,
        frames,
        energy,
        err_global: err_g.sqrt(),
        err_interior: err_i.sqrt(),
        err_plus: err_p.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerFit {
    pub t_star: f64,
    pub amplitude: f64,
    pub decay_length: f64,
    pub rel_error: f64,
}

/// Least-squares fit of the window-averaged U(t_star, x) on [-6 c eps, 0]
/// to a e^{x/l}. The average removes the free oscillation sin(x) cos(omega t)
/// carried by the initial data on x < 0, which is not part of the layer.
/// For fixed l the amplitude is linear, so only l is searched (golden
/// section on log l).
pub fn boundary_layer_fit(sol: &WaveSolution, t_star: f64, cfg: &WaveConfig) -> Result<LayerFit> {
    let driving = cfg.eps * cfg.c * (cfg.c * t_star).cos().abs();
    if driving < 1e-12 {
        return Err(Error::FitDegenerate(driving));
    }
    let frame = sol
        .frame_near(t_star)
        .ok_or_else(|| Error::Config(format!("no saved frame near t = {}", t_star)))?;
    let lo = -6.0 * cfg.c * cfg.eps;
    let pts: Vec<(f64, f64)> = sol
        .x
        .iter()
        .zip(&frame.u_mean)
        .filter(|(x, _)| **x >= lo - 1e-12 && **x <= 0.0)
        .map(|(x, u)| (*x, *u))
        .collect();
    let fit_for = |l: f64| -> (f64, f64) {
        let (mut num, mut den) = (0.0, 0.0);
        for &(x, u) in &pts {
            let e = (x / l).exp();
            num += u * e;
            den += e * e;
        }
        let a = num / den;
        let res: f64 = pts.iter().map(|&(x, u)| (u - a * (x / l).exp()).powi(2)).sum();
        (a, res)
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let scale = cfg.c * cfg.eps;
    let (mut a, mut b) = ((scale / 20.0).ln(), (scale * 20.0).ln());
    let mut c1 = b - phi * (b - a);
    let mut c2 = a + phi * (b - a);
    let (mut f1, mut f2) = (fit_for(c1.exp()).1, fit_for(c2.exp()).1);
    for _ in 0..100 {
        if f1 < f2 {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - phi * (b - a);
            f1 = fit_for(c1.exp()).1;
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + phi * (b - a);
            f2 = fit_for(c2.exp()).1;
        }
    }
    let l = (0.5 * (a + b)).exp();
    let (amp, res) = fit_for(l);
    if amp.abs() < 1e-12 {
        return Err(Error::FitDegenerate(amp.abs()));
    }
    let norm: f64 = pts.iter().map(|p| p.1 * p.1).sum();
    Ok(LayerFit {
        t_star: frame.t,
        amplitude: amp,
        decay_length: l,
        rel_error: (res / norm).sqrt(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveRun {
    pub eps: f64,
    pub err_global: f64,
    pub err_interior: f64,
    pub err_plus: f64,
    pub layer: Option<LayerFit>,
    pub max_energy_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveStudy {
    pub c: f64,
    pub t_star: f64,
    pub runs: Vec<WaveRun>,
    pub global: ConvergenceReport,
    /// Same errors against mu = eps^2.
    pub global_mu: ConvergenceReport,
    pub interior: ConvergenceReport,
}

impl WaveStudy {
    pub fn passed(&self) -> bool {
        self.global.passed && self.global_mu.passed && self.interior.passed
    }
}

pub fn wave_rate_study(c: f64, eps_ladder: &[f64], template: &WaveConfig, exec: Exec) -> Result<WaveStudy> {
    if eps_ladder.len() < 4 {
        return Err(Error::InsufficientPoints(eps_ladder.len()));
    }
    let (hi, lo) = eps_ladder
        .iter()
        .fold((0.0f64, f64::INFINITY), |(h, l), &e| (h.max(e), l.min(e)));
    if !(lo > 0.0) || (hi / lo).log10() < 1.0 {
        return Err(Error::Config("eps ladder must be positive and span at least one decade".into()));
    }
    let mut template = template.clone();
    template.c = c;
    let t_star = template.save_times.first().copied().unwrap_or(0.5);
    let runs = exec.map(eps_ladder, |&eps| -> Result<WaveRun> {
        let cfg = template.with_eps(eps);
        let sol = solve_penalized_wave(&cfg)?;
        let e0 = sol.energy[0];
        let max_energy_ratio = sol.energy.iter().fold(0.0f64, |m, e| m.max(e / e0));
        Ok(WaveRun {
            eps,
            err_global: sol.err_global,
            err_interior: sol.err_interior,
            err_plus: sol.err_plus,
            layer: boundary_layer_fit(&sol, t_star, &cfg).ok(),
            max_energy_ratio,
        })
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let pairs = |f: fn(&WaveRun) -> f64| runs.iter().map(|r| (r.eps, f(r))).collect::<Vec<_>>();
    let global = ConvergenceReport::from_pairs("err_L2_global", &pairs(|r| r.err_global), Expectation::band(0.5, 0.1))?;
    let mu_pairs: Vec<_> = runs.iter().map(|r| (r.eps * r.eps, r.err_global)).collect();
    let global_mu = ConvergenceReport::from_pairs("err_L2_global_mu", &mu_pairs, Expectation::band(0.25, 0.05))?;
    let interior = ConvergenceReport::from_pairs("err_L2_interior", &pairs(|r| r.err_interior), Expectation::at_least(0.9))?;
    Ok(WaveStudy {
        c,
        t_star,
        runs,
        global,
        global_mu,
        interior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_solution_examples() {
        for &x in &[0.1, 1.0, 2.5] {
            assert_eq!(exact_wave_solution(1.0, 0.0, x), x.sin());
            let h = 1e-4;
            let dt = (exact_wave_solution(2.0, h, x) - exact_wave_solution(2.0, -h, x)) / (2.0 * h);
            assert!(dt.abs() < 1e-10);
            let utt = (exact_wave_solution(2.0, 0.3 + h, x) - 2.0 * exact_wave_solution(2.0, 0.3, x)
                + exact_wave_solution(2.0, 0.3 - h, x))
                / (h * h);
            let uxx = (exact_wave_solution(2.0, 0.3, x + h) - 2.0 * exact_wave_solution(2.0, 0.3, x)
                + exact_wave_solution(2.0, 0.3, x - h))
                / (h * h);
            assert!((utt - 4.0 * uxx).abs() < 1e-5);
        }
    }

    #[test]
    fn config_errors() {
        let mut cfg = WaveConfig::new(1.0, 0.05);
        cfg.cfl = 1.2;
        assert_eq!(cfg.check(), Err(Error::CflViolation(1.2)));
        let mut cfg = WaveConfig::new(1.0, 0.05);
        cfg.n_x /= 2;
        assert!(matches!(cfg.check(), Err(Error::LayerUnderresolved { .. })));
    }

    #[test]
    fn energy_is_bounded_and_dirichlet_holds() {
        let mut cfg = WaveConfig::new(1.0, 0.05);
        cfg.t_final = 2.0;
        cfg.n_t = cfg.steps_for_cfl();
        cfg.save_times = vec![1.0, 2.0];
        let sol = solve_penalized_wave(&cfg).unwrap();
        let e0 = sol.energy[0];
        assert!(sol.energy.iter().all(|e| *e <= e0 * (1.0 + 1e-3)));
        for f in &sol.frames {
            assert_eq!(*f.u.last().unwrap(), 0.0);
        }
    }

    #[test]
    fn degenerate_fit_time() {
        let cfg = WaveConfig::new(1.0, 0.05);
        let sol = WaveSolution {
            x: vec![0.0],
            dt: 0.1,
            frames: vec![],
            energy: vec![],
            err_global: 0.0,
            err_interior: 0.0,
            err_plus: 0.0,
        };
        assert!(matches!(
            boundary_layer_fit(&sol, std::f64::consts::FRAC_PI_2, &cfg),
            Err(Error::FitDegenerate(_))
        ));
    }
}
