use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::model::{r_theta, PowerLawModel};
use crate::engine::{partition, residual_angle};
use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::sum::PauliSum;
use crate::trace::TraceLog;

/// Default `eta` above which a gate counts as a merge spike.
pub const DEFAULT_SPIKE_THRESHOLD: f64 = 0.2;

/// Survival factor of merge pairs at a residual angle; one at zero.
fn survival(model: &PowerLawModel, residual: f64) -> Result<f64> {
    let a = residual.abs();
    if a == 0.0 {
        Ok(1.0)
    } else {
        r_theta(model, a)
    }
}

/// One step of `N' = N (1 - phi + (phi - eta)(|cos|^m + |sin|^m) + eta r)`.
///
/// The branch factors use the full angle; the merge survival uses the
/// residual angle after quarter turns, for which it is defined.
pub fn predict_term_count_step(n_k: f64, phi: f64, eta: f64, theta: f64, model: &PowerLawModel) -> Result<f64> {
    if !(0.0 <= eta && eta <= phi && phi <= 1.0) {
        return Err(Error::InvalidArgument(format!("need 0 <= eta <= phi <= 1, got eta={eta}, phi={phi}")));
    }
    if phi == 0.0 {
        return Ok(n_k);
    }
    let m = model.m;
    let branch = theta.cos().abs().powf(m) + theta.sin().abs().powf(m);
    let r = if eta > 0.0 { survival(model, residual_angle(theta))? } else { 0.0 };
    Ok(n_k * (1.0 - phi + (phi - eta) * branch + eta * r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub measured: Vec<f64>,
    pub predicted: Vec<f64>,
    /// Root-mean-square of `ln(predicted / measured)` over all gates.
    pub rms_log_error: f64,
}

/// Runs the recurrence from the initial row count using the measured
/// `phi_k`, `eta_k` and angles of a trace, with a fixed exponent.
pub fn replay_term_counts(trace: &TraceLog, model: &PowerLawModel) -> Result<Replay> {
    if trace.gates.is_empty() {
        return Err(Error::InsufficientData("empty trace".into()));
    }
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut n = trace.initial_rows.max(trace.gates[0].n_before) as f64;
    let mut predicted = Vec::with_capacity(trace.gates.len());
    let mut measured = Vec::with_capacity(trace.gates.len());
    let mut sq = 0.0;
    for g in &trace.gates {
        let res = residual_angle(g.theta).abs();
        let r = match cache.get(&res.to_bits()) {
            Some(&r) => r,
            None => {
                let r = survival(model, res)?;
                cache.insert(res.to_bits(), r);
                r
            }
        };
        let m = model.m;
        let branch = g.theta.cos().abs().powf(m) + g.theta.sin().abs().powf(m);
        n *= 1.0 - g.phi + (g.phi - g.eta) * branch + g.eta * r;
        predicted.push(n);
        measured.push(g.n_after as f64);
        let e = (n.max(1e-300) / (g.n_after.max(1) as f64)).ln();
        sq += e * e;
    }
    Ok(Replay {
        rms_log_error: (sq / trace.gates.len() as f64).sqrt(),
        measured,
        predicted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaSpike {
    pub k: usize,
    pub eta: f64,
    pub theta: f64,
}

/// Gates with `eta_k >= threshold`, in gate order.
pub fn detect_eta_spikes(trace: &TraceLog, threshold: f64) -> Vec<EtaSpike> {
    trace
        .gates
        .iter()
        .filter(|g| g.eta >= threshold)
        .map(|g| EtaSpike { k: g.gate_index, eta: g.eta, theta: g.theta })
        .collect()
}

/// Empirical correlation between the coefficients of merge partners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeCorrelation {
    pub pairs: usize,
    /// Pearson correlation of `(c_P, c_P')`; `None` with fewer than 2 pairs.
    pub pearson: Option<f64>,
    /// Pearson correlation of `(ln|c_P|, ln|c_P'|)`.
    pub pearson_log_abs: Option<f64>,
}

/// Measures how strongly merge partners' coefficients co-vary before the
/// gate with generator `sigma`.
pub fn merge_pair_correlation(sum: &PauliSum, sigma: &PauliString) -> Result<MergeCorrelation> {
    let pairs = partition(sum, sigma)?.merge_pairs();
    let c = sum.coeffs();
    let xy: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (c[a as usize], c[b as usize])).collect();
    let logs: Vec<(f64, f64)> = xy.iter().map(|&(a, b)| (a.abs().ln(), b.abs().ln())).collect();
    Ok(MergeCorrelation { pairs: pairs.len(), pearson: pearson(&xy), pearson_log_abs: pearson(&logs) })
}

fn pearson(xy: &[(f64, f64)]) -> Option<f64> {
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in xy {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
