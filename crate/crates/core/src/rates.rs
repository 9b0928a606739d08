//! Log-log rate fits and the convergence report shared by every ladder study.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope (0 for an exact fit).
    pub slope_se: f64,
}

/// Ordinary least squares of log(err) against log(eps).
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 4 {
        return Err(Error::InsufficientPoints(pairs.len()));
    }
    for &(e, v) in pairs {
        for z in [e, v] {
            if !(z > 0.0) || !z.is_finite() {
                return Err(Error::NonPositiveValue(z));
            }
        }
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("rate fit needs at least two distinct eps".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_se = (sse / (n - 2.0) / sxx).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        slope_se,
    })
}

/// Two-sided 95% Student t quantile.
fn t95(df: usize) -> f64 {
    const TABLE: [f64; 10] = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    match df {
        0 => f64::INFINITY,
        1..=10 => TABLE[df - 1],
        11..=30 => 2.2 - 0.008 * (df - 10) as f64,
        _ => 1.96,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Expectation {
    pub min_slope: f64,
    pub max_slope: f64,
    pub min_r_squared: f64,
}

impl Expectation {
    pub fn at_least(min_slope: f64) -> Self {
        Expectation {
            min_slope,
            max_slope: f64::INFINITY,
            min_r_squared: 0.0,
        }
    }
    pub fn band(center: f64, half_width: f64) -> Self {
        Expectation {
            min_slope: center - half_width,
            max_slope: center + half_width,
            min_r_squared: 0.0,
        }
    }
    pub fn with_r_squared(mut self, r2: f64) -> Self {
        self.min_r_squared = r2;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub eps: f64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub metric: String,
    pub rows: Vec<RateRow>,
    pub fit: RateFit,
    /// Half-width of the 95% confidence interval of the slope.
    pub slope_ci: f64,
    pub expectation: Expectation,
    pub passed: bool,
}

impl ConvergenceReport {
    pub fn from_pairs(metric: &str, pairs: &[(f64, f64)], expectation: Expectation) -> Result<Self> {
        let fit = fit_rate(pairs)?;
        let slope_ci = t95(pairs.len() - 2) * fit.slope_se;
        let passed = fit.slope >= expectation.min_slope
            && fit.slope <= expectation.max_slope
            && fit.r_squared >= expectation.min_r_squared;
        Ok(ConvergenceReport {
            metric: metric.to_string(),
            rows: pairs
                .iter()
                .map(|&(eps, value)| RateRow {
                    eps,
                    metric: metric.to_string(),
                    value,
                })
                .collect(),
            fit,
            slope_ci,
            expectation,
            passed,
        })
    }

    pub fn slope(&self) -> f64 {
        self.fit.slope
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: slope {:.4} +/- {:.4} (r2 {:.4}), expected [{}, {}] -> {}",
            self.metric,
            self.fit.slope,
            self.slope_ci,
            self.fit.r_squared,
            self.expectation.min_slope,
            self.expectation.max_slope,
            if self.passed { "pass" } else { "fail" }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ladder() -> Vec<f64> {
        (3..=9).map(|k| 2f64.powi(-k)).collect()
    }

    #[test]
    fn exact_power_laws() {
        let lin: Vec<_> = ladder().into_iter().map(|e| (e, e)).collect();
        let f = fit_rate(&lin).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let half: Vec<_> = ladder().into_iter().map(|e| (e, 3.0 * e.sqrt())).collect();
        let f = fit_rate(&half).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn noisy_linear_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pairs: Vec<_> = ladder()
            .into_iter()
            .map(|e| (e, e * (1.0 + 0.05 * rng.gen_range(-1.0..1.0))))
            .collect();
        let r = ConvergenceReport::from_pairs("err", &pairs, Expectation::band(1.0, 0.05)).unwrap();
        assert!(r.passed, "{}", r.summary());
        assert!(r.slope_ci > 0.0 && r.slope_ci < 0.1);
    }

    #[test]
    fn errors() {
        assert_eq!(
            fit_rate(&[(0.1, 0.1), (0.05, 0.05), (0.02, 0.02)]),
            Err(Error::InsufficientPoints(3))
        );
        assert_eq!(
            fit_rate(&[(0.1, 0.1), (0.05, 0.0), (0.02, 0.02), (0.01, 0.01)]),
            Err(Error::NonPositiveValue(0.0))
        );
    }
}
