use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_to_infinity, Quadrature, Tolerance};

/// Symmetric truncated power law `rho(t) = A |t|^-(m+1)` for `|t| >= delta`,
/// zero inside the gap, with `A = m delta^m / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawModel {
    pub m: f64,
    pub delta: f64,
}

// Integrals are evaluated in units of delta, where the density is
// `g(x) = (m/2) |x|^-(m+1)` for `|x| >= 1`.
const SCALED_TOL: Tolerance = Tolerance { abs: 1e-12, rel: 1e-11 };

impl PowerLawModel {
    pub fn new(m: f64, delta: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) || !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("power law needs m > 0 and delta > 0, got m={m}, delta={delta}")));
        }
        Ok(PowerLawModel { m, delta })
    }

    /// Normalization constant `A`.
    pub fn amplitude(&self) -> f64 {
        self.m * self.delta.powf(self.m) / 2.0
    }

    pub fn density(&self, t: f64) -> f64 {
        let a = t.abs();
        if a < self.delta {
            0.0
        } else {
            self.amplitude() * a.powf(-self.m - 1.0)
        }
    }

    /// Probability of `|c| >= x`.
    pub fn tail_mass(&self, x: f64) -> f64 {
        if x <= self.delta {
            1.0
        } else {
            (self.delta / x).powf(self.m)
        }
    }

    /// Magnitude with tail probability `u`, for inverse-CDF sampling.
    pub fn quantile_abs(&self, u: f64) -> f64 {
        self.delta * u.powf(-1.0 / self.m)
    }

    fn g(&self, x: f64) -> f64 {
        let a = x.abs();
        if a < 1.0 {
            0.0
        } else {
            0.5 * self.m * a.powf(-self.m - 1.0)
        }
    }

    /// Scaled CDF of `g`.
    fn big_g(&self, x: f64) -> f64 {
        if x <= -1.0 {
            0.5 * (-x).powf(-self.m)
        } else if x < 1.0 {
            0.5
        } else {
            1.0 - 0.5 * x.powf(-self.m)
        }
    }
}

/// `sum |c|^l` predicted from the norm: `((2-m)/(l-m)) ((1 - delta^(l-m)) / (1 - delta^(2-m))) ||O||^2`.
pub fn moment_estimate(model: &PowerLawModel, l: f64, norm_sq: f64) -> Result<f64> {
    let (m, d) = (model.m, model.delta);
    if (l - m).abs() < 1e-9 {
        return Err(Error::Singularity(format!("moment order {l} equals the exponent")));
    }
    if (2.0 - m).abs() < 1e-9 {
        return Err(Error::Singularity("exponent m = 2".into()));
    }
    if l == 2.0 {
        return Ok(norm_sq);
    }
    Ok((2.0 - m) / (l - m) * ((1.0 - d.powf(l - m)) / (1.0 - d.powf(2.0 - m))) * norm_sq)
}

fn check_angle(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("angle {theta} outside (0, pi/2)")))
    }
}

/// Break points approaching `edge` from the side of `toward`, at
/// geometric distances starting from `scale / 8`.
fn ladder(edge: f64, toward: f64, scale: f64) -> impl Iterator<Item = f64> {
    let span = (toward - edge).abs();
    let dir = (toward - edge).signum();
    (0..)
        .map(move |j| scale / 8.0 * 2f64.powi(j))
        .take_while(move |&d| d < span)
        .map(move |d| edge + dir * d)
}

/// Integral of `f` over the real line minus the given open intervals.
/// Narrow features of width `scale` sit next to the interval edges.
fn integrate_outside<F: Fn(f64) -> f64>(f: F, holes: &[(f64, f64)], scale: f64, tol: Tolerance) -> Result<Quadrature> {
    let mut pts: Vec<f64> = holes.iter().flat_map(|&(a, b)| [a, b]).collect();
    pts.sort_by(f64::total_cmp);
    let inside = |x: f64| holes.iter().any(|&(a, b)| x > a && x < b);
    let reach = 4.0 * pts.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let (first, last) = (pts[0] - reach, pts[pts.len() - 1] + reach);
    pts.insert(0, first);
    pts.push(last);
    let mut total = Quadrature { value: 0.0, error: 0.0, intervals: 0 };
    let mut add = |q: Quadrature| {
        total.value += q.value;
        total.error += q.error;
        total.intervals += q.intervals;
    };
    add(integrate_to_infinity(|x| f(-x), -first, tol)?);
    add(integrate_to_infinity(&f, last, tol)?);
    for w in pts.windows(2) {
        if w[1] > w[0] && !inside(0.5 * (w[0] + w[1])) {
            let breaks: Vec<f64> = ladder(w[0], w[1], scale).chain(ladder(w[1], w[0], scale)).collect();
            add(integrate(&f, w[0], w[1], &breaks, tol)?);
        }
    }
    Ok(total)
}

/// Density of `c cos(theta) + c' sin(theta)` for independent `c, c'` drawn
/// from the model.
pub fn convolution_density(model: &PowerLawModel, theta: f64, t: f64) -> Result<f64> {
    check_angle(theta)?;
    let (s, c) = theta.sin_cos();
    let tau = t / model.delta;
    // Need |x| >= 1 and |(tau - x cos)/sin| >= 1.
    let centre = tau / c;
    let half = s / c;
    let f = |x: f64| model.g(x) * model.g((tau - x * c) / s);
    let q = integrate_outside(f, &[(-1.0, 1.0), (centre - half, centre + half)], half.min(1.0), SCALED_TOL)?;
    Ok(q.value / (s * model.delta))
}

/// Mass of the convolution that falls into the truncation gap `(-delta, delta)`.
pub fn s_theta(model: &PowerLawModel, theta: f64) -> Result<f64> {
    check_angle(theta)?;
    let (s, c) = theta.sin_cos();
    // By symmetry, s = 2 int_1^inf g(x) P(|x cos + Y sin| < 1) dx.
    let h = |x: f64| {
        model.g(x) * (model.big_g((1.0 - x * c) / s) - model.big_g((-1.0 - x * c) / s))
    };
    let mut breaks: Vec<f64> = [(1.0 - s) / c, (1.0 + s) / c, (-1.0 - s) / c, (-1.0 + s) / c]
        .into_iter()
        .filter(|&x| x > 1.0)
        .collect();
    breaks.sort_by(f64::total_cmp);
    let last = breaks.last().copied().unwrap_or(1.0).max(1.0) + 4.0;
    let scale = (s / c).min(1.0);
    let fine: Vec<f64> = breaks
        .iter()
        .flat_map(|&b| ladder(b, 1.0, scale).chain(ladder(b, last, scale)))
        .chain(breaks.iter().copied())
        .collect();
    let head = integrate(h, 1.0, last, &fine, SCALED_TOL)?;
    let tail = integrate_to_infinity(h, last, SCALED_TOL)?;
    Ok((2.0 * (head.value + tail.value)).clamp(0.0, 1.0))
}

/// Fraction of merge pairs surviving truncation, `1 - s(theta)`.
pub fn r_theta(model: &PowerLawModel, theta: f64) -> Result<f64> {
    Ok(1.0 - s_theta(model, theta)?)
}

/// Sweep CSV `theta,s,r` over `points` angles strictly inside `(0, pi/2)`.
pub fn write_s_theta_sweep<W: Write>(model: &PowerLawModel, points: usize, mut w: W) -> Result<()> {
    writeln!(w, "theta,s,r")?;
    for i in 1..=points {
        let theta = FRAC_PI_2 * i as f64 / (points + 1) as f64;
        let s = s_theta(model, theta)?;
        writeln!(w, "{theta:e},{s:e},{:e}", 1.0 - s)?;
    }
    Ok(())
}
