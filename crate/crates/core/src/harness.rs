//! Experiment runner behind the `hyppen` binary: config, sweeps over the
//! tangential frequency grid and the eps ladder, reports on disk.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::halfline::{FrequencyField, Side};
use crate::kreiss::{join, kreiss_profiles, reference_solution, solve_penalized_kreiss, KreissSetup};
use crate::linalg::{op_norm, CVec};
use crate::projector::{
    boundary_data_h, doubled_lopatinski_check, free_space_solution, projector_profiles,
    solve_penalized_projector, ProjectorSetup,
};
use crate::rates::{ConvergenceReport, Expectation};
use crate::symbol::{
    frequency_grid, lopatinski_scan, validate_system, Frequency, HyperbolicSystem, SymbolTolerances,
};
use crate::symmetrizer::{build_kreiss_symmetrizer, build_rauch_matrix, conjugate_system, SymmetrizerDump};
use crate::transform::{bump, tangential_transform, SampledField, TangentialGrid, XGrid};
use crate::wave::{wave_rate_study, WaveConfig, WaveStudy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Scan,
    RauchVerify,
    PenalizeKreiss,
    PenalizeProjector,
    WaveDemo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Scan => "scan",
            Command::RauchVerify => "rauch-verify",
            Command::PenalizeKreiss => "penalize-kreiss",
            Command::PenalizeProjector => "penalize-projector",
            Command::WaveDemo => "wave-demo",
        }
    }

    fn needs_system(self) -> bool {
        self != Command::WaveDemo
    }

    fn needs_ladder(self) -> bool {
        matches!(
            self,
            Command::PenalizeKreiss | Command::PenalizeProjector | Command::WaveDemo
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kreiss,
    Projector,
}

/// Tangential grid and data for the penalization sweeps. The data are
/// f = s(t, y) phi(x) f_dir on x > 0 and g = s(t, y) g_dir with
/// s(t, y) = bump(t - data_start, data_width) * bump(y - y_start, y_width).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyParams {
    pub t_horizon: f64,
    pub n_t: usize,
    pub pad_factor: usize,
    /// Used only when d >= 2.
    pub n_y: usize,
    pub y_length: f64,
    pub x_extent: f64,
    pub x_levels: u32,
    pub x_per_level: usize,
    pub data_start: f64,
    pub data_width: f64,
    pub y_start: f64,
    pub y_width: f64,
    /// Frequencies whose data weight is below this fraction of the largest
    /// are skipped.
    pub weight_cutoff: f64,
    /// Initial gain for the symmetrizer construction.
    pub kreiss_gain: f64,
    pub collar: f64,
}

impl Default for StudyParams {
    fn default() -> Self {
        StudyParams {
            t_horizon: 8.0,
            n_t: 64,
            pad_factor: 2,
            n_y: 16,
            y_length: 8.0,
            x_extent: 8.0,
            x_levels: 14,
            x_per_level: 32,
            data_start: 0.5,
            data_width: 3.0,
            y_start: 2.0,
            y_width: 4.0,
            weight_cutoff: 1e-10,
            kreiss_gain: 16.0,
            collar: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveParams {
    pub c: f64,
    pub t_final: f64,
    pub t_star: f64,
    pub l_minus: f64,
    pub cfl: f64,
    pub avg_periods: usize,
}

impl Default for WaveParams {
    fn default() -> Self {
        WaveParams {
            c: 1.0,
            t_final: 4.0,
            t_star: 0.5,
            l_minus: 2.0,
            cfl: 0.9,
            avg_periods: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub system_path: Option<PathBuf>,
    /// Weight gamma of the penalized solves; defaults to 8 / T.
    pub gamma: Option<f64>,
    pub eps_ladder: Vec<f64>,
    /// Frequency samples for scan, rauch-verify and the doubled-system check.
    pub grid: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub dump_symmetrizer: Option<PathBuf>,
    pub dump_field: Option<PathBuf>,
    pub study: StudyParams,
    pub wave: WaveParams,
    pub tolerances: SymbolTolerances,
}

pub fn default_ladder(command: Command) -> Vec<f64> {
    match command {
        Command::WaveDemo => vec![0.04, 0.02, 0.01, 0.005, 0.0025],
        _ => (3..=9).map(|k| 2f64.powi(-k)).collect(),
    }
}

impl ExperimentConfig {
    pub fn new(command: Command, system_path: Option<PathBuf>, output_dir: PathBuf) -> Self {
        ExperimentConfig {
            command,
            system_path,
            gamma: None,
            eps_ladder: default_ladder(command),
            grid: match command {
                Command::Scan => 256,
                _ => 64,
            },
            output_dir,
            seed: 0,
            dump_symmetrizer: None,
            dump_field: None,
            study: StudyParams::default(),
            wave: WaveParams::default(),
            tolerances: SymbolTolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.command.needs_system() && self.system_path.is_none() {
            return Err(Error::Config(format!("{} needs --system", self.command.name())));
        }
        if self.command.needs_ladder() {
            if self.eps_ladder.is_empty() {
                return Err(Error::Config("eps ladder is empty".into()));
            }
            if self.eps_ladder.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
                return Err(Error::Config("eps ladder must be positive".into()));
            }
            if self.eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Config("eps ladder must be strictly decreasing".into()));
            }
        }
        if self.grid == 0 {
            return Err(Error::Config("grid must be positive".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return Err(Error::Config(format!("gamma must be positive, got {}", g)));
            }
        }
        Ok(())
    }

    pub fn tangential_grid(&self) -> Result<TangentialGrid> {
        let s = &self.study;
        let mut g = TangentialGrid::new(s.t_horizon, s.n_t, s.n_y, s.y_length, s.pad_factor)?;
        if let Some(gamma) = self.gamma {
            g.gamma = gamma;
        }
        g.x_grid = XGrid::graded(s.x_extent, s.x_levels, s.x_per_level)?;
        Ok(g)
    }
}

/// Reads a system spec and runs the hyperbolicity checks on 64 samples.
pub fn load_system_spec(path: &Path, seed: u64) -> Result<HyperbolicSystem> {
    let sys = HyperbolicSystem::load(path)?;
    validate_system(&sys, 64, seed).map_err(|e| match e {
        Error::ValidationFailed(_) => e,
        other => Error::ValidationFailed(Box::new(other)),
    })?;
    Ok(sys)
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_rate(name: &str, r: &ConvergenceReport) -> Self {
        Verdict::new(name, r.passed, r.summary())
    }
}

/// A sample that raised an error, with its coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct SampleFailure {
    pub zeta: Option<Frequency>,
    pub eps: Option<f64>,
    pub error: String,
    pub exit_code: i32,
}

impl SampleFailure {
    fn new(zeta: Option<&Frequency>, eps: Option<f64>, e: &Error) -> Self {
        SampleFailure {
            zeta: zeta.cloned(),
            eps,
            error: e.to_string(),
            exit_code: e.exit_code(),
        }
    }
}

/// Per-frequency errors for one eps, all squared L2 norms in x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsErrors {
    pub eps: f64,
    pub plus: f64,
    pub minus: f64,
    pub collar: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleMetrics {
    pub zeta: Frequency,
    /// Parseval weight of this frequency (data amplitude squared times cell).
    pub weight: f64,
    pub errors: Vec<EpsErrors>,
    /// max |u0^+ - u| for the profile limit against the reference solve.
    pub limit_defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsTotals {
    pub eps: f64,
    pub plus: f64,
    pub minus: f64,
    pub combined: f64,
    pub collar: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PenaltyStudy {
    pub method: Method,
    pub gamma: f64,
    pub samples: Vec<SampleMetrics>,
    pub failures: Vec<SampleFailure>,
    pub totals: Vec<EpsTotals>,
    pub combined: Option<ConvergenceReport>,
    pub collar: Option<ConvergenceReport>,
    pub penalty: Option<ConvergenceReport>,
    pub max_limit_defect: f64,
}

impl PenaltyStudy {
    pub fn verdicts(&self) -> Vec<Verdict> {
        let mut v = Vec::new();
        let rate = |name: &str, r: &Option<ConvergenceReport>| match r {
            Some(r) => Verdict::from_rate(name, r),
            None => Verdict::new(name, false, "no rate (too few ladder points or failed samples)"),
        };
        v.push(rate("combined_rate", &self.combined));
        v.push(rate("collar_rate", &self.collar));
        v.push(rate("penalty_rate", &self.penalty));
        v.push(Verdict::new(
            "profile_limit",
            self.max_limit_defect <= 1e-8,
            format!("max |u0+ - u| = {:.3e}", self.max_limit_defect),
        ));
        v
    }
}

fn bump_spectrum_1d(values: &[f64], h: f64, gamma: f64, pad: usize) -> Vec<Complex64> {
    use rustfft::FftPlanner;
    let n = values.len() * pad;
    let mut buf: Vec<Complex64> = (0..n)
        .map(|k| {
            let v = values.get(k).copied().unwrap_or(0.0);
            Complex64::new(v * (-gamma * k as f64 * h).exp(), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.into_iter().map(|v| v * h).collect()
}

struct StudyPoint {
    zeta: Frequency,
    weight: f64,
}

/// Frequencies carrying the data, one per conjugate pair.
fn study_points(sys: &HyperbolicSystem, cfg: &ExperimentConfig, grid: &TangentialGrid) -> Result<Vec<StudyPoint>> {
    let s = &cfg.study;
    let two_pi = 2.0 * std::f64::consts::PI;
    let taus = grid.taus();
    let dtau = two_pi / (grid.padded_len() as f64 * grid.dt());
    let (spec, etas, deta): (Vec<Vec<Complex64>>, Vec<f64>, f64) = match sys.space_dim() {
        1 => {
            let vals: Vec<f64> = grid.times().iter().map(|&t| bump(t - s.data_start, s.data_width)).collect();
            let st = bump_spectrum_1d(&vals, grid.dt(), grid.gamma, grid.pad_factor);
            (st.into_iter().map(|v| vec![v]).collect(), vec![], 1.0)
        }
        2 => {
            let field = SampledField::from_fn(grid, |t, y| {
                bump(t - s.data_start, s.data_width) * bump(y - s.y_start, s.y_width)
            });
            let sp = tangential_transform(&field, grid)?;
            let rows = (0..sp.values.nrows())
                .map(|k| sp.values.row(k).iter().copied().collect())
                .collect();
            (rows, grid.etas(), two_pi / grid.y_length)
        }
        d => {
            return Err(Error::Config(format!(
                "penalization sweeps support d <= 2 tangential layouts, got d = {}",
                d
            )))
        }
    };
    let cell = dtau * deta / two_pi.powi(sys.space_dim() as i32);
    let mut pts = Vec::new();
    for (k, row) in spec.iter().enumerate() {
        let tau = taus[k];
        for (m, v) in row.iter().enumerate() {
            let eta = etas.get(m).copied();
            // keep one member of each pair (tau, eta) ~ (-tau, -eta)
            let key = (tau, eta.unwrap_or(0.0));
            if key.0 < 0.0 || (key.0 == 0.0 && key.1 < 0.0) {
                continue;
            }
            let self_conj = key.0 == 0.0 && key.1 == 0.0;
            let w = v.norm_sqr() * cell * if self_conj { 1.0 } else { 2.0 };
            let zeta = Frequency::new(grid.gamma, tau, eta.into_iter().collect());
            pts.push(StudyPoint { zeta, weight: w });
        }
    }
    let wmax = pts.iter().map(|p| p.weight).fold(0.0, f64::max);
    pts.retain(|p| p.weight >= s.weight_cutoff * wmax);
    Ok(pts)
}

fn directions(n: usize) -> (CVec, CVec) {
    let f = CVec::from_fn(n, |i, _| Complex64::new(1.0 / (1 + i) as f64, 0.0));
    let g = CVec::from_fn(n, |i, _| Complex64::new((-0.5f64).powi(i as i32), 0.0));
    (f, g)
}

fn source_profile(x: f64) -> f64 {
    if x > 0.0 {
        (-4.0 * (x - 1.5).powi(2)).exp()
    } else {
        0.0
    }
}

fn sample_kreiss(
    sys: &HyperbolicSystem,
    z: &Frequency,
    cfg: &ExperimentConfig,
    grid: &XGrid,
) -> std::result::Result<(Vec<EpsErrors>, f64), (Option<f64>, Error)> {
    let tol = &cfg.tolerances;
    let n = sys.state_dim();
    let (fd, g) = directions(n);
    let pre = |e| (None, e);
    let f = FrequencyField::from_fn(z, Side::Plus, grid, n, |x| &fd * Complex64::new(source_profile(x), 0.0));
    let setup = KreissSetup::new(sys, z, cfg.study.kreiss_gain, tol).map_err(pre)?;
    let prof = kreiss_profiles(sys, &setup, grid, &f, &g).map_err(pre)?;
    let u_ref = reference_solution(sys, z, &f, &g, tol).map_err(pre)?;
    let r_inv = &setup.rauch.r_inv;
    let limit_defect = prof.v0_plus.apply(r_inv).sub(&u_ref).max_norm();
    let u_left = prof.v0_minus.apply(r_inv);
    let u_lim = join(&u_left, &u_ref);
    let c = cfg.study.collar;
    let mut out = Vec::with_capacity(cfg.eps_ladder.len());
    for &eps in &cfg.eps_ladder {
        let v = solve_penalized_kreiss(sys, &setup, grid, eps, &f, &g).map_err(|e| (Some(eps), e))?;
        let u = v.apply(r_inv);
        out.push(EpsErrors {
            eps,
            plus: u.restrict(Side::Plus).sub(&u_ref).l2_sq(),
            minus: u.restrict(Side::Minus).sub(&u_left).l2_sq(),
            collar: u.sub(&u_lim).l2_sq_on(-c, c),
            penalty: v
                .sub(&prof.approximation(eps))
                .restrict(Side::Minus)
                .apply(&setup.rauch.p_minus)
                .l2_sq(),
        });
    }
    Ok((out, limit_defect))
}

fn sample_projector(
    sys: &HyperbolicSystem,
    z: &Frequency,
    cfg: &ExperimentConfig,
    grid: &XGrid,
) -> std::result::Result<(Vec<EpsErrors>, f64), (Option<f64>, Error)> {
    let tol = &cfg.tolerances;
    let n = sys.state_dim();
    let (fd, g) = directions(n);
    let pre = |e| (None, e);
    let f = FrequencyField::from_fn(z, Side::Full, grid, n, |x| &fd * Complex64::new(source_profile(x), 0.0));
    let setup = ProjectorSetup::new(sys, z, tol).map_err(pre)?;
    let v = free_space_solution(sys, &setup, &f).map_err(pre)?;
    let bd = boundary_data_h(&setup, grid, &v.trace(), &g);
    let prof = projector_profiles(sys, &setup, &f, &bd).map_err(pre)?;
    let u_ref = reference_solution(sys, z, &f.restrict(Side::Plus), &g, tol).map_err(pre)?;
    let limit_defect = prof.u0_plus.sub(&u_ref).max_norm();
    let u_lim = join(&prof.u0_minus, &prof.u0_plus);
    let c = cfg.study.collar;
    let mut out = Vec::with_capacity(cfg.eps_ladder.len());
    for &eps in &cfg.eps_ladder {
        let u = solve_penalized_projector(sys, &setup, eps, &f, &bd).map_err(|e| (Some(eps), e))?;
        out.push(EpsErrors {
            eps,
            plus: u.restrict(Side::Plus).sub(&prof.u0_plus).l2_sq(),
            minus: u.restrict(Side::Minus).sub(&prof.u0_minus).l2_sq(),
            collar: u.sub(&u_lim).l2_sq_on(-c, c),
            penalty: u
                .sub(&prof.approximation(eps))
                .restrict(Side::Minus)
                .apply(setup.p_minus())
                .l2_sq(),
        });
    }
    Ok((out, limit_defect))
}

/// Runs one penalization method over the data-carrying frequencies and
/// aggregates the errors in the Parseval sense.
pub fn penalization_study(
    sys: &HyperbolicSystem,
    method: Method,
    cfg: &ExperimentConfig,
    exec: Exec,
) -> Result<PenaltyStudy> {
    cfg.validate()?;
    let grid = cfg.tangential_grid()?;
    let pts = study_points(sys, cfg, &grid)?;
    let xg = &grid.x_grid;
    let results = exec.map(&pts, |p| match method {
        Method::Kreiss => sample_kreiss(sys, &p.zeta, cfg, xg),
        Method::Projector => sample_projector(sys, &p.zeta, cfg, xg),
    });
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (p, r) in pts.iter().zip(results) {
        match r {
            Ok((errors, limit_defect)) => samples.push(SampleMetrics {
                zeta: p.zeta.clone(),
                weight: p.weight,
                errors,
                limit_defect,
            }),
            Err((eps, e)) => failures.push(SampleFailure::new(Some(&p.zeta), eps, &e)),
        }
    }
    let totals: Vec<EpsTotals> = cfg
        .eps_ladder
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let sum = |f: fn(&EpsErrors) -> f64| -> f64 {
                samples.iter().map(|s| s.weight * f(&s.errors[i])).sum::<f64>().sqrt()
            };
            let plus = sum(|e| e.plus);
            let minus = sum(|e| e.minus);
            EpsTotals {
                eps,
                plus,
                minus,
                combined: plus + minus,
                collar: sum(|e| e.collar),
                penalty: sum(|e| e.penalty),
            }
        })
        .collect();
    let rate = |name: &str, f: fn(&EpsTotals) -> f64, exp: Expectation| -> Option<ConvergenceReport> {
        if !failures.is_empty() {
            return None;
        }
        let pairs: Vec<(f64, f64)> = totals.iter().map(|t| (t.eps, f(t))).collect();
        ConvergenceReport::from_pairs(name, &pairs, exp).ok()
    };
    let combined = rate("combined_L2", |t| t.combined, Expectation::band(1.0, 0.1).with_r_squared(0.98));
    let collar = rate("collar_L2", |t| t.collar, Expectation::at_least(0.9));
    let penalty = rate("penalty_L2", |t| t.penalty, Expectation::at_least(1.4));
    let max_limit_defect = samples.iter().map(|s| s.limit_defect).fold(0.0, f64::max);
    Ok(PenaltyStudy {
        method,
        gamma: grid.gamma,
        samples,
        failures,
        totals,
        combined,
        collar,
        penalty,
        max_limit_defect,
    })
}

/// Rauch and symmetrizer certificates at one frequency.
#[derive(Debug, Clone, Serialize)]
pub struct RauchSample {
    pub zeta: Frequency,
    pub k_used: f64,
    pub lambda: f64,
    pub delta: f64,
    pub c1: f64,
    pub identity_distance: f64,
    pub conjugated_distance: f64,
    pub aleph_norm: f64,
    pub dissipation_margin: f64,
    pub kernel_margin: f64,
}

/// Grid points with gamma > 0 (symmetrizers are built off the axis).
pub fn interior_frequency_grid(d: usize, n: usize, seed: u64) -> Vec<Frequency> {
    let extra = if d == 1 { 2 } else { 0 };
    frequency_grid(d, n + extra, seed)
        .into_iter()
        .filter(|z| z.gamma > 0.0)
        .take(n)
        .collect()
}

pub fn rauch_sample(
    sys: &HyperbolicSystem,
    z: &Frequency,
    gain: f64,
    tol: &SymbolTolerances,
) -> Result<(RauchSample, SymmetrizerDump)> {
    let sdata = build_kreiss_symmetrizer(sys, z, gain, tol)?;
    let rauch = build_rauch_matrix(&sdata, sys)?;
    let conj = conjugate_system(&rauch, sys)?;
    let sample = RauchSample {
        zeta: z.clone(),
        k_used: sdata.k_used,
        lambda: sdata.cert.lambda,
        delta: sdata.cert.delta,
        c1: sdata.cert.c1,
        identity_distance: rauch.identity_distance,
        conjugated_distance: rauch.conjugated_distance,
        aleph_norm: op_norm(&rauch.aleph),
        dissipation_margin: conj.dissipation_margin,
        kernel_margin: conj.kernel_margin,
    };
    Ok((sample, SymmetrizerDump::new(&sdata, &rauch)))
}

/// What a run produced: verdicts, failures, the command-specific payload,
/// and the files written.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub verdicts: Vec<Verdict>,
    pub failures: Vec<SampleFailure>,
    pub result: Value,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    /// 0 all verdicts pass, 1 a verdict failed, 3 a sample raised a
    /// numerical error.
    pub fn exit_code(&self) -> i32 {
        if let Some(f) = self.failures.iter().map(|f| f.exit_code).max() {
            return f.max(3);
        }
        if self.verdicts.iter().all(|v| v.passed) {
            0
        } else {
            1
        }
    }
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

fn write_file(path: &Path, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(path, contents)?;
    files.push(path.to_path_buf());
    Ok(())
}

fn eta_header(d: usize) -> String {
    (1..d).map(|j| format!(",eta_{}", j)).collect()
}

fn eta_cells(z: &Frequency) -> String {
    z.eta.iter().map(|e| format!(",{:.17e}", e)).collect()
}

fn run_scan(sys: &HyperbolicSystem, cfg: &ExperimentConfig, exec: Exec) -> Result<(Vec<Verdict>, Vec<SampleFailure>, Value, String, Option<String>)> {
    let report = lopatinski_scan(sys, cfg.grid, &cfg.tolerances, cfg.seed, exec)?;
    let mut csv = format!("gamma,tau{},lopatinski_det\n", eta_header(sys.space_dim()));
    for (z, v) in &report.samples {
        let _ = writeln!(csv, "{:.17e},{:.17e}{},{:.17e}", z.gamma, z.tau, eta_cells(z), v);
    }
    let verdict = Verdict::new(
        "uniform_lopatinski",
        report.passed,
        format!("min det {:.12} at {} (threshold {})", report.min_value, report.argmin, report.threshold),
    );
    let result = json!({
        "min_lopatinski": report.min_value,
        "argmin": report.argmin,
        "threshold": report.threshold,
        "n_samples": report.samples.len(),
    });
    Ok((vec![verdict], vec![], result, csv, None))
}

fn run_rauch(sys: &HyperbolicSystem, cfg: &ExperimentConfig, exec: Exec) -> Result<(Vec<Verdict>, Vec<SampleFailure>, Value, String, Option<String>)> {
    let pts = interior_frequency_grid(sys.space_dim(), cfg.grid, cfg.seed);
    let results = exec.map(&pts, |z| rauch_sample(sys, z, 1.0, &cfg.tolerances));
    let mut samples = Vec::new();
    let mut dumps = Vec::new();
    let mut failures = Vec::new();
    for (z, r) in pts.iter().zip(results) {
        match r {
            Ok((s, d)) => {
                samples.push(s);
                dumps.push(d);
            }
            Err(e) => failures.push(SampleFailure::new(Some(z), None, &e)),
        }
    }
    let mut csv = format!(
        "gamma,tau{},k_used,lambda,delta,c1,identity_distance,conjugated_distance,aleph_norm,dissipation_margin,kernel_margin\n",
        eta_header(sys.space_dim())
    );
    for s in &samples {
        let z = &s.zeta;
        let _ = writeln!(
            csv,
            "{:.17e},{:.17e}{},{},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            z.gamma,
            z.tau,
            eta_cells(z),
            s.k_used,
            s.lambda,
            s.delta,
            s.c1,
            s.identity_distance,
            s.conjugated_distance,
            s.aleph_norm,
            s.dissipation_margin,
            s.kernel_margin
        );
    }
    let max_id = samples.iter().map(|s| s.identity_distance).fold(0.0, f64::max);
    let min_lambda = samples.iter().map(|s| s.lambda).fold(f64::INFINITY, f64::min);
    let min_delta = samples.iter().map(|s| s.delta).fold(f64::INFINITY, f64::min);
    let verdicts = vec![
        Verdict::new(
            "rauch_identity",
            failures.is_empty() && max_id <= 1e-8,
            format!("max dist(ker Gamma, E_+(S^-1 B)) = {:.3e} over {} samples", max_id, samples.len()),
        ),
        Verdict::new(
            "symmetrizer_certificates",
            failures.is_empty() && min_lambda > 0.0 && min_delta > 0.0,
            format!("min lambda {:.3e}, min delta {:.3e}", min_lambda, min_delta),
        ),
    ];
    let result = json!({
        "n_samples": samples.len(),
        "max_identity_distance": max_id,
        "min_lambda": min_lambda,
        "min_delta": min_delta,
        "samples": samples,
    });
    let dump = match &cfg.dump_symmetrizer {
        Some(_) => Some(serde_json::to_string_pretty(&dumps).map_err(|e| Error::Io(e.to_string()))?),
        None => None,
    };
    Ok((verdicts, failures, result, csv, dump))
}

fn penalty_csv(study: &PenaltyStudy, d: usize) -> String {
    let method = match study.method {
        Method::Kreiss => "kreiss",
        Method::Projector => "projector",
    };
    let mut csv = format!(
        "method,gamma,tau{},eps,weight,err_plus_L2,err_minus_L2,err_collar_L2,penalty_norm\n",
        eta_header(d)
    );
    for s in &study.samples {
        for e in &s.errors {
            let _ = writeln!(
                csv,
                "{},{:.17e},{:.17e}{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                method,
                s.zeta.gamma,
                s.zeta.tau,
                eta_cells(&s.zeta),
                e.eps,
                s.weight,
                e.plus.sqrt(),
                e.minus.sqrt(),
                e.collar.sqrt(),
                e.penalty.sqrt()
            );
        }
    }
    csv
}

fn penalty_rates(study: &PenaltyStudy) -> String {
    let mut out = String::from("# eps err_plus err_minus err_combined err_collar penalty\n");
    for t in &study.totals {
        let _ = writeln!(
            out,
            "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
            t.eps, t.plus, t.minus, t.combined, t.collar, t.penalty
        );
    }
    out
}

fn wave_csv(study: &WaveStudy) -> String {
    let mut csv = String::from("eps,err_L2_global,err_L2_interior,layer_amplitude,layer_length,t_star\n");
    for r in &study.runs {
        let (a, l) = r.layer.map(|f| (f.amplitude, f.decay_length)).unwrap_or((f64::NAN, f64::NAN));
        let _ = writeln!(
            csv,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            r.eps, r.err_global, r.err_interior, a, l, study.t_star
        );
    }
    csv
}

pub fn wave_template(cfg: &ExperimentConfig) -> WaveConfig {
    let w = &cfg.wave;
    let mut t = WaveConfig::new(w.c, cfg.eps_ladder.first().copied().unwrap_or(0.04));
    t.t_final = w.t_final;
    t.l_minus = w.l_minus;
    t.cfl = w.cfl;
    t.avg_periods = w.avg_periods;
    t.save_times = vec![w.t_star];
    t.with_eps(t.eps)
}

/// Decay length and amplitude are checked at this eps.
pub const LAYER_EPS: f64 = 0.005;

/// Layer fit within 10% of l = c eps and a = eps c cos(c t_star), judged on
/// the run closest to `LAYER_EPS`.
pub fn layer_verdict(study: &WaveStudy) -> Verdict {
    let c = study.c;
    let run = study.runs.iter().min_by(|a, b| {
        let da = (a.eps.ln() - LAYER_EPS.ln()).abs();
        let db = (b.eps.ln() - LAYER_EPS.ln()).abs();
        da.total_cmp(&db)
    });
    let Some(run) = run else {
        return Verdict::new("layer_profile", false, "no runs".to_string());
    };
    match run.layer {
        Some(f) => {
            let a_pred = run.eps * c * (c * f.t_star).cos();
            let dl = f.decay_length / (c * run.eps) - 1.0;
            let da = f.amplitude / a_pred - 1.0;
            Verdict::new(
                "layer_profile",
                dl.abs() <= 0.1 && da.abs() <= 0.1 && f.rel_error <= 0.1,
                format!(
                    "eps {}: length/(c eps) - 1 = {:.3e}, amplitude/pred - 1 = {:.3e}, rel_error {:.3e}",
                    run.eps, dl, da, f.rel_error
                ),
            )
        }
        None => Verdict::new("layer_profile", false, format!("eps {}: no fit", run.eps)),
    }
}

/// Runs `cfg.command`, writes `results.csv`, `report.json` and (for ladder
/// studies) `rates.dat` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Exec) -> Result<RunOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Error::Config(format!("output dir {}: {}", cfg.output_dir.display(), e)))?;
    let start = Instant::now();
    let sys = match &cfg.system_path {
        Some(p) if cfg.command.needs_system() => Some(load_system_spec(p, cfg.seed)?),
        _ => None,
    };
    let mut files = Vec::new();
    let (verdicts, failures, result, csv, rates, extra): (
        Vec<Verdict>,
        Vec<SampleFailure>,
        Value,
        String,
        Option<String>,
        Option<String>,
    ) = match cfg.command {
        Command::Scan => {
            let (v, f, r, c, _) = run_scan(sys.as_ref().expect("system loaded"), cfg, exec)?;
            (v, f, r, c, None, None)
        }
        Command::RauchVerify => {
            let (v, f, r, c, d) = run_rauch(sys.as_ref().expect("system loaded"), cfg, exec)?;
            (v, f, r, c, None, d)
        }
        Command::PenalizeKreiss | Command::PenalizeProjector => {
            let sys = sys.as_ref().expect("system loaded");
            let method = if cfg.command == Command::PenalizeKreiss {
                Method::Kreiss
            } else {
                Method::Projector
            };
            let study = penalization_study(sys, method, cfg, exec)?;
            let mut verdicts = study.verdicts();
            let mut payload = json!({
                "method": study.method,
                "gamma": study.gamma,
                "n_frequencies": study.samples.len(),
                "totals": study.totals,
                "combined": study.combined,
                "collar": study.collar,
                "penalty": study.penalty,
                "max_limit_defect": study.max_limit_defect,
            });
            if method == Method::Projector {
                let dc = doubled_lopatinski_check(sys, cfg.grid, &cfg.tolerances, cfg.seed, exec)?;
                verdicts.push(Verdict::new(
                    "doubled_system",
                    dc.passed,
                    format!(
                        "max prel distance {:.3e}, min margin {:.6}",
                        dc.max_prel_distance, dc.min_margin
                    ),
                ));
                payload["doubled_check"] = json!({
                    "max_prel_distance": dc.max_prel_distance,
                    "min_margin": dc.min_margin,
                    "min_doubled_det": dc.min_doubled_det,
                    "passed": dc.passed,
                });
            }
            let csv = penalty_csv(&study, sys.space_dim());
            let rates = penalty_rates(&study);
            (verdicts, study.failures.clone(), payload, csv, Some(rates), None)
        }
        Command::WaveDemo => {
            let template = wave_template(cfg);
            let study = wave_rate_study(cfg.wave.c, &cfg.eps_ladder, &template, exec)?;
            let verdicts = vec![
                Verdict::from_rate("global_rate", &study.global),
                Verdict::from_rate("global_rate_mu", &study.global_mu),
                Verdict::from_rate("interior_rate", &study.interior),
                layer_verdict(&study),
            ];
            if let Some(path) = &cfg.dump_field {
                let finest = template.with_eps(*cfg.eps_ladder.last().expect("ladder checked"));
                let sol = crate::wave::solve_penalized_wave(&finest)?;
                sol.write_dump(path)?;
                files.push(path.clone());
            }
            let mut rates = String::from("# eps err_global err_interior err_plus\n");
            for r in &study.runs {
                let _ = writeln!(rates, "{:.17e} {:.17e} {:.17e} {:.17e}", r.eps, r.err_global, r.err_interior, r.err_plus);
            }
            let payload = serde_json::to_value(&study).map_err(|e| Error::Io(e.to_string()))?;
            (verdicts, vec![], payload, wave_csv(&study), Some(rates), None)
        }
    };

    write_file(&cfg.output_dir.join("results.csv"), &csv, &mut files)?;
    if let Some(r) = rates {
        write_file(&cfg.output_dir.join("rates.dat"), &r, &mut files)?;
    }
    if let (Some(path), Some(d)) = (&cfg.dump_symmetrizer, extra) {
        write_file(path, &d, &mut files)?;
    }
    let outcome = RunOutcome {
        verdicts,
        failures,
        result,
        files: files.clone(),
    };
    let report = json!({
        "command": cfg.command.name(),
        "config": cfg,
        "git_describe": git_describe(),
        "seed": cfg.seed,
        "exit_code": outcome.exit_code(),
        "elapsed_s": start.elapsed().as_secs_f64(),
        "verdicts": outcome.verdicts,
        "failures": outcome.failures,
        "result": outcome.result,
    });
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    let report_path = cfg.output_dir.join("report.json");
    write_file(&report_path, &text, &mut files)?;
    Ok(RunOutcome { files, ..outcome })
}
