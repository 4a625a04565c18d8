//! Heisenberg propagation of a [`PauliSum`] through a circuit of Pauli
//! rotations with coefficient truncation.
//!
//! Conjugating an anticommuting row `P` by `exp(-i theta sigma / 2)` gives
//! `cos(theta) P + sin(theta) (i sigma P)`. Each gate first splits `theta`
//! into quarter turns and a residual in `[-pi/4, pi/4]`. The quarter turns
//! are folded into the two coefficients exactly, so a Clifford angle
//! relabels rows without branching.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::time::{Duration, Instant};

use crate::circuit::Circuit;
use crate::error::{ensure_qubits, Error, Result};
use crate::parallel::{chunked_sum, filter_indices, map_collect, with_workers, Exec};
use crate::pauli::{anticommutes, branch_sign, PauliString};
use crate::sum::{hash_key, PauliSum, SnapshotMeta, DEFAULT_ROW_CAP};
use crate::trace::{GateStats, Snapshot, TraceLog};

/// Split of the rows of a sum by commutation with a generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub comm: Vec<u32>,
    pub anti: Vec<u32>,
    /// Row holding `i sigma P` for each entry of `anti`, if present.
    pub partner: Vec<Option<u32>>,
}

impl Partition {
    /// Each unordered merge pair once, as `(lower, higher)` row indices.
    pub fn merge_pairs(&self) -> Vec<(u32, u32)> {
        self.anti
            .iter()
            .zip(&self.partner)
            .filter_map(|(&r, p)| p.filter(|&p| r < p).map(|p| (r, p)))
            .collect()
    }

    /// Anti rows whose branch partner is absent.
    pub fn unpaired(&self) -> Vec<u32> {
        self.anti
            .iter()
            .zip(&self.partner)
            .filter(|(_, p)| p.is_none())
            .map(|(&r, _)| r)
            .collect()
    }

    pub fn paired_count(&self) -> usize {
        self.partner.iter().filter(|p| p.is_some()).count()
    }
}

/// Partitions `sum` by commutation with `sigma` and looks up merge partners.
pub fn partition(sum: &PauliSum, sigma: &PauliString) -> Result<Partition> {
    ensure_qubits(sum.n(), sigma.n())?;
    let anti = anti_rows(Exec::Sequential, sum, sigma.words());
    let info = partner_info(Exec::Sequential, sum, &anti, sigma.words());
    let mut is_anti = vec![false; sum.len()];
    for &r in &anti {
        is_anti[r as usize] = true;
    }
    let comm = (0..sum.len() as u32).filter(|&r| !is_anti[r as usize]).collect();
    Ok(Partition {
        comm,
        anti,
        partner: info.iter().map(|i| i.partner).collect(),
    })
}

fn anti_rows(exec: Exec, sum: &PauliSum, sigma: &[u64]) -> Vec<u32> {
    filter_indices(exec, sum.len(), |r| anticommutes(sum.row_words(r), sigma))
}

#[derive(Clone, Copy)]
struct PartnerInfo {
    hash: u64,
    partner: Option<u32>,
    /// `i sigma P = sign * P'` with `P'` the Hermitian label of the partner key.
    sign: f64,
}

fn partner_info(exec: Exec, sum: &PauliSum, anti: &[u32], sigma: &[u64]) -> Vec<PartnerInfo> {
    let sigma_y = crate::pauli::y_count(sigma);
    map_collect(exec, anti, |&r| {
        let row = sum.row_words(r as usize);
        with_partner_key(row, sigma, |key| {
            let hash = hash_key(key);
            PartnerInfo {
                hash,
                partner: sum.find_row_hashed(hash, key),
                sign: branch_sign(row, sigma, sigma_y),
            }
        })
    })
}

#[inline]
fn with_partner_key<R>(row: &[u64], sigma: &[u64], f: impl FnOnce(&[u64]) -> R) -> R {
    const STACK: usize = 16;
    let s = row.len();
    if s <= STACK {
        let mut buf = [0u64; STACK];
        for i in 0..s {
            buf[i] = row[i] ^ sigma[i];
        }
        f(&buf[..s])
    } else {
        let buf: Vec<u64> = row.iter().zip(sigma).map(|(a, b)| a ^ b).collect();
        f(&buf)
    }
}

/// `(cos theta, sin theta)` with quarter turns taken exactly.
pub fn rotation_coefficients(theta: f64) -> (f64, f64) {
    let q = (theta / FRAC_PI_2).round();
    let rho = theta - q * FRAC_PI_2;
    let (qc, qs) = match (q as i64).rem_euclid(4) {
        0 => (1.0, 0.0),
        1 => (0.0, 1.0),
        2 => (-1.0, 0.0),
        _ => (0.0, -1.0),
    };
    let (s, c) = if rho == 0.0 { (0.0, 1.0) } else { rho.sin_cos() };
    (qc * c - qs * s, qs * c + qc * s)
}

/// Residual angle in `[-pi/4, pi/4]` after removing quarter turns.
pub fn residual_angle(theta: f64) -> f64 {
    theta - (theta / FRAC_PI_2).round() * FRAC_PI_2
}

/// Conjugates `sum` by `exp(-i theta sigma / 2)` and truncates at `delta`.
///
/// `gate_index` is recorded in the returned stats. On a capacity error the
/// sum is left unchanged.
pub fn apply_rotation(
    sum: &mut PauliSum,
    sigma: &PauliString,
    theta: f64,
    delta: f64,
    gate_index: usize,
) -> Result<GateStats> {
    apply_rotation_with(Exec::Sequential, sum, sigma, theta, delta, gate_index)
}

pub(crate) fn apply_rotation_with(
    exec: Exec,
    sum: &mut PauliSum,
    sigma: &PauliString,
    theta: f64,
    delta: f64,
    gate_index: usize,
) -> Result<GateStats> {
    ensure_qubits(sum.n(), sigma.n())?;
    if !theta.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite angle {theta}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("truncation threshold {delta} < 0")));
    }
    if !sigma.is_hermitian_form() {
        return Err(Error::InvalidArgument(format!("generator {sigma} is not Hermitian")));
    }
    let start = Instant::now();
    let sig = sigma.words();
    let n_before = sum.len();

    let anti = anti_rows(exec, sum, sig);
    let info = partner_info(exec, sum, &anti, sig);
    let paired = info.iter().filter(|i| i.partner.is_some()).count();
    let (a, b) = rotation_coefficients(theta);
    let mut truncated = 0usize;

    if b == 0.0 {
        if a != 1.0 {
            let coeffs = sum.coeffs_mut();
            for &r in &anti {
                coeffs[r as usize] *= a;
            }
        }
    } else {
        // Merged rows: (c_P, c_P') -> (a c_P - b s_P c_P', ...), read from old values.
        let old = sum.coeffs();
        let merged: Vec<f64> = map_collect(exec, &idx_pairs(&anti, &info), |&(r, k)| {
            let i = &info[k];
            let p = i.partner.expect("paired") as usize;
            a * old[r as usize] - b * i.sign * old[p]
        });
        let branches: Vec<f64> = anti
            .iter()
            .zip(&info)
            .filter(|(_, i)| i.partner.is_none())
            .map(|(&r, i)| b * i.sign * old[r as usize])
            .collect();

        if a == 0.0 {
            // Odd quarter turn: unpaired rows move to their partner label.
            let mut k = 0;
            for (&r, i) in anti.iter().zip(&info) {
                if i.partner.is_none() {
                    let row = sum.row_words(r as usize).to_vec();
                    with_partner_key(&row, sig, |key| sum.relabel_row(r as usize, key, i.hash));
                    sum.coeffs_mut()[r as usize] = branches[k];
                    k += 1;
                }
            }
        } else {
            let stored = branches.iter().filter(|v| keep(**v, delta)).count();
            if n_before + stored > sum.row_cap() {
                return Err(Error::CapacityExceeded { cap: sum.row_cap() });
            }
            let mut k = 0;
            for (&r, i) in anti.iter().zip(&info) {
                if i.partner.is_none() {
                    let v = branches[k];
                    k += 1;
                    sum.coeffs_mut()[r as usize] *= a;
                    if keep(v, delta) {
                        let row = sum.row_words(r as usize).to_vec();
                        with_partner_key(&row, sig, |key| sum.push_row_hashed(i.hash, key, v))?;
                    } else {
                        truncated += 1;
                    }
                }
            }
        }
        let coeffs = sum.coeffs_mut();
        let mut m = 0;
        for (&r, i) in anti.iter().zip(&info) {
            if i.partner.is_some() {
                coeffs[r as usize] = merged[m];
                m += 1;
            }
        }
    }

    truncated += sum.truncate_with(exec, delta);
    let norm_after = chunked_sum(exec, sum.coeffs(), |c| c * c).sqrt();
    let denom = n_before.max(1) as f64;
    Ok(GateStats {
        gate_index,
        theta,
        phi: anti.len() as f64 / denom,
        eta: paired as f64 / denom,
        n_before,
        n_after: sum.len(),
        truncated,
        norm_after,
        elapsed: start.elapsed(),
    })
}

#[inline]
fn keep(v: f64, delta: f64) -> bool {
    v != 0.0 && v.abs() >= delta
}

fn idx_pairs(anti: &[u32], info: &[PartnerInfo]) -> Vec<(u32, usize)> {
    anti.iter()
        .zip(info)
        .enumerate()
        .filter(|(_, (_, i))| i.partner.is_some())
        .map(|(k, (&r, _))| (r, k))
        .collect()
}

/// Which coefficient snapshots `evolve` keeps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SnapshotPolicy {
    /// Gate counts (states after `k` gates) to capture.
    pub at: BTreeSet<usize>,
    /// Capture after every multiple of this many gates.
    pub every: Option<usize>,
    /// Capture the state at the first gate reaching the peak row count.
    pub peak: bool,
}

impl SnapshotPolicy {
    pub fn none() -> Self {
        SnapshotPolicy::default()
    }

    /// End of every Trotter step of length `step_len` plus the running peak.
    pub fn trotter_and_peak(step_len: usize) -> Self {
        SnapshotPolicy {
            at: BTreeSet::new(),
            every: (step_len > 0).then_some(step_len),
            peak: true,
        }
    }

    fn wants(&self, k: usize) -> bool {
        self.at.contains(&k) || self.every.is_some_and(|e| k.is_multiple_of(e))
    }

    pub fn is_empty(&self) -> bool {
        self.at.is_empty() && self.every.is_none() && !self.peak
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub delta: f64,
    /// Worker threads; 1 runs the sequential path.
    pub workers: usize,
    pub row_cap: usize,
    /// Wall-clock budget for the whole evolution.
    pub budget: Option<Duration>,
    pub snapshots: SnapshotPolicy,
}

impl EngineConfig {
    pub fn new(delta: f64) -> Self {
        EngineConfig {
            delta,
            workers: crate::parallel::default_workers(),
            row_cap: DEFAULT_ROW_CAP,
            budget: None,
            snapshots: SnapshotPolicy::none(),
        }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn budget(mut self, budget: Option<Duration>) -> Self {
        self.budget = budget;
        self
    }
}

/// Propagates `observable` through every gate of `circuit` in list order.
///
/// Returns the evolved sum and its trace. A row-cap or budget abort yields
/// an error carrying the partial trace.
pub fn evolve(
    circuit: &Circuit,
    mut observable: PauliSum,
    cfg: &EngineConfig,
) -> Result<(PauliSum, TraceLog)> {
    ensure_qubits(circuit.n(), observable.n())?;
    if !(cfg.delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("truncation threshold {} < 0", cfg.delta)));
    }
    observable.set_row_cap(cfg.row_cap);
    let exec = Exec::for_workers(cfg.workers);
    with_workers(cfg.workers, move || {
        let start = Instant::now();
        let mut log = TraceLog::new(cfg.delta, &observable, circuit.len());
        let mut peak: Option<Snapshot> = None;
        let mut peak_rows = 0usize;
        for (j, gate) in circuit.gates().iter().enumerate() {
            let k = j + 1;
            let stats = match apply_rotation_with(
                exec,
                &mut observable,
                &gate.generator,
                gate.theta,
                cfg.delta,
                k,
            ) {
                Ok(s) => s,
                Err(Error::CapacityExceeded { cap }) => {
                    return Err(Error::RowCapExceeded {
                        cap,
                        gate: k,
                        partial: Box::new(log),
                    })
                }
                Err(e) => return Err(e),
            };
            let n_after = stats.n_after;
            log.gates.push(stats);
            let meta = SnapshotMeta { gate: k, delta: cfg.delta };
            if cfg.snapshots.wants(k) {
                log.snapshots.push(Snapshot { meta, sum: observable.clone() });
            }
            if cfg.snapshots.peak && (k == 1 || n_after > peak_rows) {
                peak_rows = n_after;
                peak = Some(Snapshot { meta, sum: observable.clone() });
            }
            if let Some(budget) = cfg.budget {
                if start.elapsed() > budget && k < circuit.len() {
                    return Err(Error::BudgetExceeded {
                        budget,
                        gate: k,
                        partial: Box::new(log),
                    });
                }
            }
        }
        if let Some(p) = peak {
            if !log.snapshots.iter().any(|s| s.meta.gate == p.meta.gate) {
                log.snapshots.push(p);
                log.snapshots.sort_by_key(|s| s.meta.gate);
            }
        }
        log.finalize()?;
        Ok((observable, log))
    })
}

/// `<0|O|0>` of an evolved sum.
pub fn expectation(sum: &PauliSum) -> f64 {
    sum.expectation()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Pauli;

    fn ps(label: &str, n: usize) -> PauliString {
        PauliString::parse(label, n).unwrap()
    }

    fn sum(n: usize, terms: &[(&str, f64)]) -> PauliSum {
        PauliSum::from_terms(n, terms.iter().map(|&(l, c)| (ps(l, n), c))).unwrap()
    }

    #[test]
    fn partition_examples() {
        let p = partition(&sum(1, &[("Z0", 1.0)]), &ps("X0", 1)).unwrap();
        assert!(p.comm.is_empty() && p.anti == [0] && p.merge_pairs().is_empty());
        let p = partition(&sum(1, &[("Z0", 1.0), ("Y0", 0.5)]), &ps("X0", 1)).unwrap();
        assert_eq!(p.merge_pairs(), [(0, 1)]);
        let p = partition(&sum(2, &[("Z0", 1.0)]), &ps("Z1", 2)).unwrap();
        assert!(p.anti.is_empty() && p.comm == [0]);
    }

    #[test]
    fn single_qubit_rotation() {
        let t = std::f64::consts::PI / 3.0;
        let mut s = sum(1, &[("Z0", 1.0)]);
        let st = apply_rotation(&mut s, &ps("X0", 1), t, 0.0, 1).unwrap();
        assert!((s.get(&ps("Z0", 1)).unwrap() - t.cos()).abs() < 1e-15);
        assert!((s.get(&ps("Y0", 1)).unwrap() - t.sin()).abs() < 1e-15);
        assert_eq!((st.phi, st.eta, st.n_after), (1.0, 0.0, 2));
    }

    #[test]
    fn quarter_turns_relabel() {
        for q in -5i32..=5 {
            let mut s = sum(1, &[("Z0", 1.0)]);
            apply_rotation(&mut s, &ps("X0", 1), q as f64 * FRAC_PI_2, 0.0, 1).unwrap();
            assert_eq!(s.len(), 1);
            assert_eq!(s.coeffs()[0].abs(), 1.0);
            s.check_index().unwrap();
        }
    }

    #[test]
    fn zero_angle_is_identity() {
        let mut s = sum(2, &[("Z0", 0.6), ("X1", 0.8)]);
        let before = s.clone();
        let st = apply_rotation(&mut s, &ps("X0", 2), 0.0, 0.1, 1).unwrap();
        assert_eq!(st.truncated, 0);
        assert_eq!(st.phi, 0.5);
        assert_eq!(s.coeffs(), before.coeffs());
    }

    #[test]
    fn merge_is_a_planar_rotation() {
        let mut s = sum(1, &[("Z0", 0.6), ("Y0", 0.8)]);
        let st = apply_rotation(&mut s, &ps("X0", 1), 0.3, 0.0, 1).unwrap();
        assert_eq!(st.eta, 1.0);
        assert_eq!(s.len(), 2);
        assert!((s.norm_sq() - 1.0).abs() < 1e-15);
        let z = 0.6 * 0.3f64.cos() - 0.8 * 0.3f64.sin();
        assert!((s.get(&ps("Z0", 1)).unwrap() - z).abs() < 1e-15);
    }

    #[test]
    fn branches_below_delta_are_counted() {
        let mut s = sum(1, &[("Z0", 1.0)]);
        let st = apply_rotation(&mut s, &ps("X0", 1), 0.01, 0.1, 1).unwrap();
        assert_eq!((st.n_after, st.truncated), (1, 1));
    }

    #[test]
    fn row_cap_leaves_sum_untouched() {
        let mut s = sum(1, &[("Z0", 1.0)]);
        s.set_row_cap(1);
        let err = apply_rotation(&mut s, &ps("X0", 1), 0.4, 0.0, 1).unwrap_err();
        assert!(matches!(err, Error::CapacityExceeded { cap: 1 }));
        assert_eq!(s.coeffs(), &[1.0]);
    }

    #[test]
    fn rotation_coefficients_match_trig() {
        for i in -40..40 {
            let t = i as f64 * 0.173;
            let (a, b) = rotation_coefficients(t);
            assert!((a - t.cos()).abs() < 1e-14 && (b - t.sin()).abs() < 1e-14);
            assert!(residual_angle(t).abs() <= std::f64::consts::FRAC_PI_4 + 1e-15);
        }
    }

    #[test]
    fn evolve_empty_circuit() {
        let s = sum(3, &[("Z1", 1.0)]);
        let (out, log) = evolve(&Circuit::new(3), s.clone(), &EngineConfig::new(0.0)).unwrap();
        assert_eq!(out.coeffs(), s.coeffs());
        assert!(log.gates.is_empty());
    }

    #[test]
    fn snapshots_and_budget() {
        let mut c = Circuit::new(2);
        for _ in 0..4 {
            c.push(PauliString::single(2, 0, Pauli::X).unwrap(), 0.3).unwrap();
            c.push_rzz(0, 1, 0.4).unwrap();
        }
        let mut cfg = EngineConfig::new(0.0).workers(1);
        cfg.snapshots = SnapshotPolicy::trotter_and_peak(2);
        let (_, log) = evolve(&c, sum(2, &[("Z0", 1.0)]), &cfg).unwrap();
        let gates: Vec<usize> = log.snapshots.iter().map(|s| s.meta.gate).collect();
        assert!(gates.contains(&2) && gates.contains(&8));
        assert!(gates.contains(&log.k_star()));
        cfg.budget = Some(Duration::ZERO);
        let err = evolve(&c, sum(2, &[("Z0", 1.0)]), &cfg).unwrap_err();
        assert_eq!(err.partial_trace().unwrap().gates.len(), 1);
    }
}
