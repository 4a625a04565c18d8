use crate::error::{Error, Result};

use super::model::PowerLawModel;

/// Grid model of the coefficient density under the per-gate update
///
/// `rho'(t) ∝ (1-phi) rho(t) + (phi-eta)[rho(t/|cos|)/|cos| + rho(t/|sin|)/|sin|] + eta rho*(t)`
///
/// restricted to `delta <= |t| <= 1`, where `rho*` is the density of
/// `c cos + c' sin` for independent draws. Each branch term carries exactly
/// the mass that survives truncation, so the normalizer is the predicted
/// term-count ratio. The density is stored for `t > 0` on a log grid.
#[derive(Debug, Clone)]
pub struct DensityEvolver {
    delta: f64,
    log_step: f64,
    grid: Vec<f64>,
    density: Vec<f64>,
}

/// Grid size used by [`DensityEvolver::from_model`].
pub const DEFAULT_GRID: usize = 4096;

impl DensityEvolver {
    /// Starts from a power law on `[delta, 1]`.
    pub fn from_model(model: &PowerLawModel, points: usize) -> Result<Self> {
        if !(model.delta < 1.0) || points < 16 {
            return Err(Error::InvalidArgument("need delta < 1 and at least 16 grid points".into()));
        }
        let log_step = -model.delta.ln() / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| model.delta * (log_step * i as f64).exp()).collect();
        let density = grid.iter().map(|&t| model.density(t)).collect();
        let mut e = DensityEvolver { delta: model.delta, log_step, grid, density };
        let mass = e.mass();
        e.density.iter_mut().for_each(|d| *d /= mass);
        Ok(e)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Density on the positive half-line at the grid points.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Interpolated density at any real `t`.
    pub fn at(&self, t: f64) -> f64 {
        let a = t.abs();
        let last = *self.grid.last().expect("grid");
        if a < self.delta || a > last {
            return 0.0;
        }
        let pos = (a / self.delta).ln() / self.log_step;
        let i = (pos.floor() as usize).min(self.grid.len() - 2);
        let w = (pos - i as f64).clamp(0.0, 1.0);
        let (d0, d1) = (self.density[i], self.density[i + 1]);
        if d0 > 0.0 && d1 > 0.0 {
            (d0.ln() * (1.0 - w) + d1.ln() * w).exp()
        } else {
            d0 * (1.0 - w) + d1 * w
        }
    }

    /// Total probability, counting both signs.
    pub fn mass(&self) -> f64 {
        2.0 * trapezoid(&self.grid, &self.density)
    }

    /// Convolution density of `c cos + c' sin` at `t`.
    pub fn convolution(&self, cos: f64, sin: f64, t: f64) -> f64 {
        let f: Vec<f64> = self
            .grid
            .iter()
            .map(|&u| {
                self.at(u) * (self.at((t - u * cos) / sin) + self.at((t + u * cos) / sin))
            })
            .collect();
        trapezoid(&self.grid, &f) / sin
    }

    /// Applies one gate and renormalizes; returns the predicted ratio
    /// `N_{k+1} / N_k`.
    pub fn step(&mut self, phi: f64, eta: f64, theta: f64) -> Result<f64> {
        if !(0.0 <= eta && eta <= phi && phi <= 1.0) {
            return Err(Error::InvalidArgument(format!("need 0 <= eta <= phi <= 1, got eta={eta}, phi={phi}")));
        }
        if crate::engine::residual_angle(theta) == 0.0 || phi == 0.0 {
            return Ok(1.0);
        }
        let (c, s) = (theta.cos().abs(), theta.sin().abs());
        if c == 0.0 || s == 0.0 {
            return Ok(1.0);
        }
        let next: Vec<f64> = self
            .grid
            .iter()
            .map(|&t| {
                let branch = self.at(t / c) / c + self.at(t / s) / s;
                let merged = if eta > 0.0 { self.convolution(c, s, t) } else { 0.0 };
                (1.0 - phi) * self.at(t) + (phi - eta) * branch + eta * merged
            })
            .collect();
        let z = 2.0 * trapezoid(&self.grid, &next);
        if !(z > 0.0) {
            return Err(Error::InvariantViolation("density evolved to zero mass".into()));
        }
        self.density = next.into_iter().map(|d| d / z).collect();
        Ok(z)
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_shape_is_stable_without_merges() {
        let model = PowerLawModel::new(1.5, 1e-3).unwrap();
        let mut e = DensityEvolver::from_model(&model, 1024).unwrap();
        let before = e.density().to_vec();
        let ratio = e.step(0.5, 0.0, 0.4).unwrap();
        let m = model.m;
        let want = 1.0 - 0.5 + 0.5 * (0.4f64.cos().powf(m) + 0.4f64.sin().powf(m));
        assert!((ratio / want - 1.0).abs() < 0.02, "{ratio} {want}");
        // Away from the upper cutoff the shape is unchanged.
        for i in (0..400).step_by(50) {
            assert!((e.density()[i] / before[i] - 1.0).abs() < 0.02);
        }
        assert!((e.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clifford_is_identity() {
        let model = PowerLawModel::new(1.5, 1e-2).unwrap();
        let mut e = DensityEvolver::from_model(&model, 64).unwrap();
        assert_eq!(e.step(0.5, 0.2, std::f64::consts::FRAC_PI_2).unwrap(), 1.0);
    }
}
