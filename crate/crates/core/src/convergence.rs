//! Apparent-convergence protocol over a geometric sequence of truncation
//! thresholds `delta_n = r^n * delta_0`.
//!
//! Estimates are recomputed at ever finer thresholds until the trailing
//! window of `ell` estimates spans at most `eps_tol`, or a step costs more
//! than the per-step budget, or the step limit is reached.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::engine::{evolve, EngineConfig, SnapshotPolicy};
use crate::error::{Error, Result};
use crate::estimator::runtime_fit;
use crate::sum::{PauliSum, DEFAULT_ROW_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub delta_0: f64,
    pub ratio: f64,
    pub eps_tol: f64,
    /// Number of successive estimates that must agree.
    pub ell: usize,
    /// Per-step wall-clock budget in seconds.
    pub t_cpu_s: f64,
    pub max_steps: usize,
    /// Optional cap on the summed runtime of all steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cumulative_cap_s: Option<f64>,
    /// Probes used for the runtime extrapolation.
    pub tail_points: usize,
    /// Not serialized: reports must not depend on the thread count.
    #[serde(skip, default = "crate::parallel::default_workers")]
    pub workers: usize,
    pub row_cap: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            delta_0: 0.125,
            ratio: 0.5,
            eps_tol: 1e-2,
            ell: 3,
            t_cpu_s: 3600.0,
            max_steps: 30,
            cumulative_cap_s: None,
            tail_points: 4,
            workers: crate::parallel::default_workers(),
            row_cap: DEFAULT_ROW_CAP,
        }
    }
}

impl ConvergenceConfig {
    /// `r^n * delta_0`, computed directly rather than by repeated products.
    pub fn delta(&self, n: usize) -> f64 {
        self.ratio.powf(n as f64) * self.delta_0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.delta_0 > 0.0) {
            return bad("delta_0 must be positive");
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return bad("ratio must lie in (0, 1)");
        }
        if !(self.eps_tol > 0.0) {
            return bad("eps_tol must be positive");
        }
        if self.ell < 2 {
            return bad("ell must be at least 2");
        }
        if !(self.t_cpu_s > 0.0) || self.max_steps == 0 {
            return bad("t_cpu and max_steps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    ApparentlyConverged,
    BudgetExhausted,
    StepLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub n: usize,
    pub delta: f64,
    /// `None` when the step was cut off by the budget.
    pub estimate: Option<f64>,
    pub n_max: usize,
    pub k_star: usize,
    #[serde(skip)]
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: ConvergenceConfig,
    pub steps: Vec<Step>,
    pub status: Status,
    pub final_estimate: Option<f64>,
    /// `[min, max]` over the trailing window of estimates.
    pub window_range: Option<[f64; 2]>,
    /// `[min, max]` over every computed estimate.
    pub estimate_range: Option<[f64; 2]>,
    /// Convergence fired on exactly `ell` points right after a larger swing.
    pub local_minimum_risk: bool,
    /// `(delta, seconds)` for the next two thresholds; timing data.
    #[serde(skip)]
    pub extrapolated: Vec<(f64, f64)>,
}

impl ConvergenceReport {
    pub fn estimates(&self) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.estimate).collect()
    }

    pub fn total_runtime_s(&self) -> f64 {
        self.steps.iter().map(|s| s.runtime_s).sum()
    }

    pub fn final_delta(&self) -> Option<f64> {
        self.steps.last().map(|s| s.delta)
    }

    /// Deterministic report; wall-clock data is excluded.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Per-step runtimes and the runtime extrapolation.
    pub fn timings_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Timings {
            steps: Vec<StepTime>,
            total_s: f64,
            extrapolated: Vec<StepTime>,
        }
        #[derive(Serialize)]
        struct StepTime {
            delta: f64,
            seconds: f64,
        }
        let t = Timings {
            steps: self.steps.iter().map(|s| StepTime { delta: s.delta, seconds: s.runtime_s }).collect(),
            total_s: self.total_runtime_s(),
            extrapolated: self.extrapolated.iter().map(|&(delta, seconds)| StepTime { delta, seconds }).collect(),
        };
        Ok(serde_json::to_string_pretty(&t)? + "\n")
    }

    /// Plot table `log10_inv_delta,estimate,t_n`; aborted steps leave the
    /// estimate empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "log10_inv_delta,estimate,t_n")?;
        for s in &self.steps {
            let est = s.estimate.map(|e| format!("{e:e}")).unwrap_or_default();
            writeln!(w, "{:e},{},{:e}", (1.0 / s.delta).log10(), est, s.runtime_s)?;
        }
        Ok(())
    }
}

/// Window of the last `ell` steps when all completed and span at most `eps`.
fn converged_window(steps: &[Step], ell: usize, eps: f64) -> Option<Vec<f64>> {
    if steps.len() < ell {
        return None;
    }
    let window: Option<Vec<f64>> = steps[steps.len() - ell..].iter().map(|s| s.estimate).collect();
    let window = window?;
    (span(&window) <= eps).then_some(window)
}

fn span(xs: &[f64]) -> f64 {
    range(xs).map_or(0.0, |[lo, hi]| hi - lo)
}

fn range(xs: &[f64]) -> Option<[f64; 2]> {
    let first = *xs.first()?;
    Some(xs.iter().fold([first, first], |[lo, hi], &x| [lo.min(x), hi.max(x)]))
}

/// Runs the protocol. Engine resource errors come back as
/// [`Error::ProtocolAborted`] with the steps completed so far.
pub fn run_protocol(circuit: &Circuit, observable: &PauliSum, config: &ConvergenceConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let budget = Duration::from_secs_f64(config.t_cpu_s);
    let mut steps: Vec<Step> = Vec::new();
    let mut status = Status::StepLimit;
    for n in 0..config.max_steps {
        let delta = config.delta(n);
        let cfg = EngineConfig {
            delta,
            workers: config.workers.max(1),
            row_cap: config.row_cap,
            budget: Some(budget),
            snapshots: SnapshotPolicy::none(),
        };
        let t0 = Instant::now();
        let outcome = evolve(circuit, observable.clone(), &cfg);
        let runtime_s = t0.elapsed().as_secs_f64();
        let step = match outcome {
            Ok((sum, log)) => Step {
                n,
                delta,
                estimate: Some(sum.expectation()),
                n_max: log.n_max(),
                k_star: log.k_star(),
                runtime_s,
            },
            Err(Error::BudgetExceeded { partial, .. }) => Step {
                n,
                delta,
                estimate: None,
                n_max: partial.n_max(),
                k_star: partial.k_star(),
                runtime_s,
            },
            Err(e) => {
                let partial = finish(config, steps, Status::StepLimit);
                return Err(Error::ProtocolAborted { cause: Box::new(e), partial: Box::new(partial) });
            }
        };
        let aborted = step.estimate.is_none();
        steps.push(step);
        if converged_window(&steps, config.ell, config.eps_tol).is_some() {
            status = Status::ApparentlyConverged;
            break;
        }
        let cumulative: f64 = steps.iter().map(|s| s.runtime_s).sum();
        if aborted || runtime_s > config.t_cpu_s || config.cumulative_cap_s.is_some_and(|c| cumulative > c) {
            status = Status::BudgetExhausted;
            break;
        }
    }
    Ok(finish(config, steps, status))
}

fn finish(config: &ConvergenceConfig, steps: Vec<Step>, status: Status) -> ConvergenceReport {
    let estimates: Vec<f64> = steps.iter().filter_map(|s| s.estimate).collect();
    let window = converged_window(&steps, config.ell, config.eps_tol);
    let tail_start = steps.len().saturating_sub(config.ell);
    let tail: Vec<f64> = steps[tail_start..].iter().filter_map(|s| s.estimate).collect();
    let local_minimum_risk = window.is_some() && {
        let wider = steps.len().checked_sub(config.ell + 1).and_then(|i| steps[i].estimate);
        wider.is_some_and(|prev| span(&[&tail[..], &[prev]].concat()) > config.eps_tol)
    };
    let completed: Vec<(f64, f64)> = steps
        .iter()
        .filter(|s| s.estimate.is_some())
        .map(|s| (s.delta, s.runtime_s))
        .collect();
    let next = [config.delta(steps.len()), config.delta(steps.len() + 1)];
    let extrapolated = runtime_fit(&completed, &next, config.tail_points)
        .map(|p| next.iter().copied().zip(p.seconds).collect())
        .unwrap_or_default();
    ConvergenceReport {
        config: config.clone(),
        final_estimate: window.as_ref().and_then(|w| w.last().copied()),
        window_range: range(&tail),
        estimate_range: range(&estimates),
        local_minimum_risk,
        extrapolated,
        steps,
        status,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classification {
    Converged { value: f64, window: Vec<f64> },
    /// Guiding range `[min, max]` of all estimates and the projected cost
    /// `(delta, seconds)` of the next steps.
    Unconverged { range: [f64; 2], extrapolated_costs: Vec<(f64, f64)> },
}

/// Classifies a report by the window rule on its trailing estimates.
pub fn classify(report: &ConvergenceReport) -> Classification {
    match converged_window(&report.steps, report.config.ell, report.config.eps_tol) {
        Some(window) => Classification::Converged { value: *window.last().expect("ell >= 2"), window },
        None => Classification::Unconverged {
            range: range(&report.estimates()).unwrap_or([f64::NAN, f64::NAN]),
            extrapolated_costs: report.extrapolated.clone(),
        },
    }
}
