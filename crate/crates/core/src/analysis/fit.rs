use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ols;

/// Below this many samples in the fitted range a fit is flagged.
pub const MIN_FIT_SAMPLES: usize = 1000;

const REGRESSION_POINTS: usize = 144;
const REGRESSION_UPPER: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Regression,
    Mle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: FitMethod,
    pub x_min: f64,
    pub m: f64,
    pub stderr: f64,
    /// Coefficient of determination; regression only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_squared: Option<f64>,
    /// Samples inside the fitted range.
    pub samples: usize,
    pub low_sample_warning: bool,
}

/// Log-log regression of the binned density between `l * delta` and
/// `20 * delta`: bins of width `delta / 16` centred on 144 evenly spaced
/// points, slope `-(m + 1)`. Bins reaching below `delta` are shortened to
/// the part above it, where truncated samples can live.
pub fn fit_m_regression(coeffs: &[f64], delta: f64, l: f64) -> Result<FitReport> {
    if !(delta > 0.0) || !(l >= 1.0) || l >= REGRESSION_UPPER {
        return Err(Error::InvalidArgument("need delta > 0 and 1 <= l < 20".into()));
    }
    let mut abs: Vec<f64> = coeffs.iter().map(|c| c.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let total = abs.len() as f64;
    let lo = l * delta;
    let hi = REGRESSION_UPPER * delta;
    let half = delta / 32.0;
    let count_below = |x: f64| abs.partition_point(|&v| v < x);
    let samples = count_below(hi) - count_below(lo);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..REGRESSION_POINTS {
        let x = lo + (hi - lo) * i as f64 / (REGRESSION_POINTS - 1) as f64;
        let a = (x - half).max(delta);
        let b = x + half;
        let count = count_below(b) - count_below(a);
        if count > 0 {
            xs.push(x.ln());
            ys.push((count as f64 / (total * (b - a))).ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} populated bins between {lo:e} and {hi:e}",
            xs.len()
        )));
    }
    let fit = ols(&xs, &ys)?;
    Ok(FitReport {
        method: FitMethod::Regression,
        x_min: lo,
        m: -fit.slope - 1.0,
        stderr: fit.slope_stderr,
        r_squared: Some(fit.r_squared),
        samples,
        low_sample_warning: samples < MIN_FIT_SAMPLES,
    })
}

/// Maximum-likelihood exponent `N / sum ln(|c| / x_min)` over `|c| >= x_min`.
pub fn fit_m_mle(coeffs: &[f64], x_min: f64) -> Result<FitReport> {
    if !(x_min > 0.0) {
        return Err(Error::InvalidArgument("x_min must be positive".into()));
    }
    let (mut n, mut sum) = (0usize, 0.0);
    for c in coeffs {
        let a = c.abs();
        if a >= x_min {
            n += 1;
            sum += (a / x_min).ln();
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData(format!("no sample at or above {x_min:e}")));
    }
    if sum == 0.0 {
        return Err(Error::Singularity("every sample equals x_min".into()));
    }
    let m = n as f64 / sum;
    Ok(FitReport {
        method: FitMethod::Mle,
        x_min,
        m,
        stderr: m / (n as f64).sqrt(),
        r_squared: None,
        samples: n,
        low_sample_warning: n < MIN_FIT_SAMPLES,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mle_examples() {
        let x = 1e-3;
        let r = fit_m_mle(&[std::f64::consts::E * x; 10], x).unwrap();
        assert!((r.m - 1.0).abs() < 1e-12);
        assert!(r.low_sample_warning);
        assert!(fit_m_mle(&[1e-4], 1e-3).is_err());
        let r = fit_m_mle(&[1e-4, -2e-3], 1e-3).unwrap();
        assert_eq!(r.samples, 1);
    }

    #[test]
    fn regression_rejects_degenerate_samples() {
        assert!(fit_m_regression(&[5e-3; 100], 1e-3, 1.0).is_err());
    }
}
