//! Memory and runtime extrapolation from cheap coarse-threshold probe runs.
//!
//! The peak row count `N_max` follows an approximate power law in the
//! truncation threshold, so a straight line through `log N_max` against
//! `log delta` over a few coarse probes predicts finer thresholds.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::engine::{evolve, EngineConfig, SnapshotPolicy};
use crate::error::{Error, Result};
use crate::stats::{ols, LinearFit};
use crate::sum::PauliSum;

/// `||O||^2 / delta^2`, the largest row count compatible with truncation.
pub fn trivial_bound(norm: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        f64::INFINITY
    } else {
        norm * norm / (delta * delta)
    }
}

/// Probe schedule `delta_i = r^i * delta_0`, `i < count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub delta_0: f64,
    pub ratio: f64,
    pub count: usize,
    /// Wall-clock budget shared by all probes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_s: Option<f64>,
    pub workers: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            delta_0: 0.005,
            ratio: std::f64::consts::FRAC_1_SQRT_2,
            count: 3,
            budget_s: None,
            workers: crate::parallel::default_workers(),
        }
    }
}

impl ProbeConfig {
    pub fn deltas(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.ratio.powf(i as f64) * self.delta_0).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.count < 3 {
            return Err(Error::InvalidArgument(format!(
                "probe count {} is below the minimum of 3",
                self.count
            )));
        }
        if !(self.delta_0 > 0.0 && self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::InvalidArgument("need delta_0 > 0 and 0 < r < 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub delta: f64,
    pub n_max: usize,
    pub k_star: usize,
    pub norm_at_k_star: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub probes: Vec<Probe>,
    pub config: ProbeConfig,
    pub n_qubits: usize,
    pub circuit_gates: usize,
    pub observable_norm: f64,
}

impl ProbeSeries {
    /// Series built from externally measured points, in the given order.
    pub fn from_probes(probes: Vec<Probe>, n_qubits: usize, circuit_gates: usize, observable_norm: f64) -> Self {
        let config = ProbeConfig {
            delta_0: probes.first().map_or(0.0, |p| p.delta),
            ratio: match probes.as_slice() {
                [a, b, ..] => b.delta / a.delta,
                _ => 0.0,
            },
            count: probes.len(),
            budget_s: None,
            workers: 1,
        };
        ProbeSeries { probes, config, n_qubits, circuit_gates, observable_norm }
    }

    /// Any probe whose peak lies in the last 5% of the circuit.
    pub fn late_peak(&self) -> bool {
        let j = self.circuit_gates as f64;
        self.probes.iter().any(|p| p.k_star as f64 > 0.95 * j)
    }

    /// CSV with columns `delta,n_max,k_star,norm_at_k_star,runtime_s`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "delta,n_max,k_star,norm_at_k_star,runtime_s")?;
        for p in &self.probes {
            writeln!(w, "{:e},{},{},{:e},{:e}", p.delta, p.n_max, p.k_star, p.norm_at_k_star, p.runtime_s)?;
        }
        Ok(())
    }
}

/// Runs the probe schedule. A budget abort ends the series early; fewer
/// than two completed probes is an error.
pub fn run_probes(circuit: &Circuit, observable: &PauliSum, config: &ProbeConfig) -> Result<ProbeSeries> {
    config.validate()?;
    let start = Instant::now();
    let budget = config.budget_s.map(Duration::from_secs_f64);
    let mut probes = Vec::new();
    for delta in config.deltas() {
        let remaining = match budget {
            Some(b) => match b.checked_sub(start.elapsed()) {
                Some(r) => Some(r),
                None => break,
            },
            None => None,
        };
        let cfg = EngineConfig {
            delta,
            workers: config.workers.max(1),
            row_cap: crate::sum::DEFAULT_ROW_CAP,
            budget: remaining,
            snapshots: SnapshotPolicy::none(),
        };
        let t0 = Instant::now();
        match evolve(circuit, observable.clone(), &cfg) {
            Ok((_, log)) => probes.push(Probe {
                delta,
                n_max: log.n_max(),
                k_star: log.k_star(),
                norm_at_k_star: log.norm_at(log.k_star()),
                runtime_s: t0.elapsed().as_secs_f64(),
            }),
            Err(Error::BudgetExceeded { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    if probes.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} probe run(s) completed; at least 2 are needed",
            probes.len()
        )));
    }
    Ok(ProbeSeries {
        probes,
        config: config.clone(),
        n_qubits: circuit.n(),
        circuit_gates: circuit.len(),
        observable_norm: observable.raw_norm(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmaxPrediction {
    pub targets: Vec<f64>,
    pub n_max: Vec<f64>,
    /// Whether the trivial bound or the `4^n` ceiling replaced the line value.
    pub clamped: Vec<bool>,
    /// Fit of `ln N_max` against `ln delta`; `-slope` estimates `m*`.
    pub fit: LinearFit,
    pub low_confidence: bool,
}

/// Extends the `ln N_max` vs `ln delta` line to each target threshold.
pub fn predict_nmax(series: &ProbeSeries, targets: &[f64]) -> Result<NmaxPrediction> {
    if series.probes.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 probes".into()));
    }
    let min_delta = series.probes.iter().map(|p| p.delta).fold(f64::INFINITY, f64::min);
    if let Some(t) = targets.iter().find(|&&t| !(t > 0.0 && t < min_delta)) {
        return Err(Error::InvalidArgument(format!(
            "target delta {t} must lie in (0, {min_delta}), below every probe"
        )));
    }
    let x: Vec<f64> = series.probes.iter().map(|p| p.delta.ln()).collect();
    let y: Vec<f64> = series.probes.iter().map(|p| (p.n_max.max(1) as f64).ln()).collect();
    let fit = ols(&x, &y)?;
    let ceiling = 4f64.powi(series.n_qubits.min(1023) as i32);
    let mut n_max = Vec::new();
    let mut clamped = Vec::new();
    for &t in targets {
        let raw = fit.predict(t.ln()).exp();
        let cap = trivial_bound(series.observable_norm, t).min(ceiling);
        clamped.push(raw > cap);
        n_max.push(raw.min(cap));
    }
    Ok(NmaxPrediction {
        targets: targets.to_vec(),
        n_max,
        clamped,
        fit,
        low_confidence: series.late_peak(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimePrediction {
    pub targets: Vec<f64>,
    pub seconds: Vec<f64>,
    /// Fit of `ln t` against `ln(1/delta)` over the tail probes.
    pub fit: LinearFit,
    pub tail_points: usize,
    /// Runtime did not grow along the tail, so the series is not yet in
    /// its power-law regime.
    pub pre_asymptotic: bool,
}

/// Power-law runtime extrapolation from the last `tail_points` probes.
pub fn predict_runtime(series: &ProbeSeries, targets: &[f64], tail_points: usize) -> Result<RuntimePrediction> {
    let tail = &series.probes[series.probes.len().saturating_sub(tail_points)..];
    let pts: Vec<(f64, f64)> = tail.iter().map(|p| (p.delta, p.runtime_s)).collect();
    runtime_fit(&pts, targets, tail_points)
}

/// [`predict_runtime`] on bare `(delta, seconds)` points.
pub fn runtime_fit(points: &[(f64, f64)], targets: &[f64], tail_points: usize) -> Result<RuntimePrediction> {
    let tail = &points[points.len().saturating_sub(tail_points)..];
    if tail.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 points in the runtime tail".into()));
    }
    let x: Vec<f64> = tail.iter().map(|&(d, _)| (1.0 / d).ln()).collect();
    // Sub-nanosecond floor keeps the log finite for trivially cheap runs.
    let y: Vec<f64> = tail.iter().map(|&(_, t)| t.max(1e-9).ln()).collect();
    let fit = ols(&x, &y)?;
    Ok(RuntimePrediction {
        targets: targets.to_vec(),
        seconds: targets.iter().map(|&d| fit.predict((1.0 / d).ln()).exp()).collect(),
        fit,
        tail_points: tail.len(),
        pre_asymptotic: fit.slope <= 0.0,
    })
}

/// Combined memory and runtime forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourcePrediction {
    pub series: ProbeSeries,
    pub n_max: NmaxPrediction,
    pub runtime: RuntimePrediction,
    /// `N_max` from a supplied exponent, for comparison only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_route: Option<Vec<f64>>,
}

impl ResourcePrediction {
    pub fn new(series: ProbeSeries, targets: &[f64], tail_points: usize) -> Result<Self> {
        let n_max = predict_nmax(&series, targets)?;
        let runtime = predict_runtime(&series, targets, tail_points)?;
        Ok(ResourcePrediction { series, n_max, runtime, m_route: None })
    }

    /// Attaches the exponent-based estimate using the finest probe's norm.
    pub fn with_m_route(mut self, m_star: f64) -> Result<Self> {
        let norm = self.series.probes.last().map_or(1.0, |p| p.norm_at_k_star);
        self.m_route = Some(
            self.n_max
                .targets
                .iter()
                .map(|&d| nmax_from_exponent(m_star, d, norm))
                .collect::<Result<_>>()?,
        );
        Ok(self)
    }
}

/// `((2 - m)/m) ||O_k*||^2 / (delta^m (1 - delta^(2 - m)))`.
pub fn nmax_from_exponent(m: f64, delta: f64, norm: f64) -> Result<f64> {
    if !(m > 0.0 && m < 2.0) {
        return Err(Error::Singularity(format!("exponent {m} outside (0, 2)")));
    }
    Ok((2.0 - m) / m * norm * norm / (delta.powf(m) * (1.0 - delta.powf(2.0 - m))))
}

/// Predicted `ln(N_max(delta_1) / N_max(delta_2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPrediction {
    pub full: f64,
    /// Without the `1 - delta^(2 - m)` correction.
    pub small_delta: f64,
}

pub fn nmax_gap_formula(delta_1: f64, delta_2: f64, m_star: f64, norm_1: f64, norm_2: f64) -> Result<GapPrediction> {
    if !(m_star > 0.0 && m_star < 2.0) {
        return Err(Error::Singularity(format!("exponent {m_star} outside (0, 2)")));
    }
    for d in [delta_1, delta_2] {
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::InvalidArgument(format!("threshold {d} outside (0, 1)")));
        }
    }
    let small_delta = m_star * (delta_2 / delta_1).ln() + 2.0 * (norm_1 / norm_2).ln();
    let e = 2.0 - m_star;
    let full = small_delta + ((1.0 - delta_2.powf(e)) / (1.0 - delta_1.powf(e))).ln();
    Ok(GapPrediction { full, small_delta })
}
