//! Per-gate telemetry collected during propagation.

use std::io::{BufRead, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{PauliSum, SnapshotMeta};

/// Statistics for one applied gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateStats {
    /// Number of gates applied including this one (1-based).
    pub gate_index: usize,
    pub theta: f64,
    /// Fraction of rows anticommuting with the generator.
    pub phi: f64,
    /// Fraction of rows whose branch partner already exists.
    pub eta: f64,
    pub n_before: usize,
    pub n_after: usize,
    /// Rows dropped by truncation, counting branches that never got stored.
    pub truncated: usize,
    pub norm_after: f64,
    #[serde(with = "duration_ns")]
    pub elapsed: Duration,
}

/// Coefficient snapshot taken after a given number of gates.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub meta: SnapshotMeta,
    pub sum: PauliSum,
}

/// Telemetry of one `evolve` call.
#[derive(Debug, Clone, Default)]
pub struct TraceLog {
    pub delta: f64,
    pub initial_rows: usize,
    pub initial_norm: f64,
    /// Gates in the circuit, which may exceed `gates.len()` for aborted runs.
    pub circuit_len: usize,
    pub gates: Vec<GateStats>,
    pub snapshots: Vec<Snapshot>,
}

impl TraceLog {
    pub fn new(delta: f64, initial: &PauliSum, circuit_len: usize) -> Self {
        TraceLog {
            delta,
            initial_rows: initial.len(),
            initial_norm: initial.raw_norm(),
            circuit_len,
            gates: Vec::with_capacity(circuit_len),
            snapshots: Vec::new(),
        }
    }

    /// Peak row count over the run (`initial_rows` for an empty log).
    pub fn n_max(&self) -> usize {
        self.peak().0
    }

    /// Gate after which the peak row count was first reached (0 for an empty log).
    pub fn k_star(&self) -> usize {
        self.peak().1
    }

    fn peak(&self) -> (usize, usize) {
        let mut best = (self.initial_rows, 0);
        for (i, g) in self.gates.iter().enumerate() {
            if i == 0 || g.n_after > best.0 {
                best = (g.n_after, g.gate_index);
            }
        }
        if self.gates.is_empty() {
            (self.initial_rows, 0)
        } else {
            best
        }
    }

    /// Norm of the evolved observable after `k` gates.
    pub fn norm_at(&self, k: usize) -> f64 {
        if k == 0 {
            self.initial_norm
        } else {
            self.gates[k - 1].norm_after
        }
    }

    pub fn total_elapsed(&self) -> Duration {
        self.gates.iter().map(|g| g.elapsed).sum()
    }

    /// `||O||^2 / delta^2`; infinite at `delta = 0`.
    pub fn trivial_bound(&self) -> f64 {
        crate::estimator::trivial_bound(self.initial_norm, self.delta)
    }

    /// Verifies the peak row count against the trivial bound.
    pub fn finalize(&self) -> Result<()> {
        let bound = self.trivial_bound() * (1.0 + 1e-12);
        if self.n_max() as f64 > bound {
            return Err(Error::InvariantViolation(format!(
                "N_max = {} exceeds ||O||^2/delta^2 = {bound}",
                self.n_max()
            )));
        }
        Ok(())
    }

    /// Largest per-gate norm increase (negative when the norm always shrinks).
    pub fn max_norm_increase(&self) -> f64 {
        let mut prev = self.initial_norm;
        let mut worst = f64::NEG_INFINITY;
        for g in &self.gates {
            worst = worst.max(g.norm_after - prev);
            prev = g.norm_after;
        }
        worst
    }

    pub fn summary(&self, expectation: f64) -> TraceSummary {
        TraceSummary {
            delta: self.delta,
            gates: self.gates.len(),
            n_max: self.n_max(),
            k_star: self.k_star(),
            final_rows: self.gates.last().map_or(self.initial_rows, |g| g.n_after),
            final_norm: self.gates.last().map_or(self.initial_norm, |g| g.norm_after),
            final_expectation: expectation,
        }
    }

    /// One row per gate: `k,theta,phi,eta,n_before,n_after,truncated,norm,elapsed_ns`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,theta,phi,eta,n_before,n_after,truncated,norm,elapsed_ns")?;
        for g in &self.gates {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{},{},{},{:e},{}",
                g.gate_index,
                g.theta,
                g.phi,
                g.eta,
                g.n_before,
                g.n_after,
                g.truncated,
                g.norm_after,
                g.elapsed.as_nanos()
            )?;
        }
        Ok(())
    }

    /// Reads the gate table written by [`TraceLog::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut log = TraceLog::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('k') {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(Error::Parse(format!("trace line {}: expected 9 fields", i + 1)));
            }
            let bad = |what: &str| Error::Parse(format!("trace line {}: bad {what}", i + 1));
            let fl = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
            let int = |s: &str, what: &str| s.parse::<usize>().map_err(|_| bad(what));
            log.gates.push(GateStats {
                gate_index: int(f[0], "k")?,
                theta: fl(f[1], "theta")?,
                phi: fl(f[2], "phi")?,
                eta: fl(f[3], "eta")?,
                n_before: int(f[4], "n_before")?,
                n_after: int(f[5], "n_after")?,
                truncated: int(f[6], "truncated")?,
                norm_after: fl(f[7], "norm")?,
                elapsed: Duration::from_nanos(f[8].parse().map_err(|_| bad("elapsed_ns"))?),
            });
        }
        if let Some(g) = log.gates.first() {
            log.initial_rows = g.n_before;
        }
        log.circuit_len = log.gates.len();
        Ok(log)
    }
}

/// Deterministic summary of a run; wall-clock data is kept elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub delta: f64,
    pub gates: usize,
    pub n_max: usize,
    pub k_star: usize,
    pub final_rows: usize,
    pub final_norm: f64,
    pub final_expectation: f64,
}

mod duration_ns {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_nanos() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_nanos(u64::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(k: usize, n_after: usize, norm: f64) -> GateStats {
        GateStats {
            gate_index: k,
            theta: 0.1,
            phi: 0.5,
            eta: 0.0,
            n_before: 0,
            n_after,
            truncated: 0,
            norm_after: norm,
            elapsed: Duration::from_nanos(10),
        }
    }

    #[test]
    fn peak_tracks_first_maximum() {
        let mut log = TraceLog { initial_rows: 1, initial_norm: 1.0, delta: 0.1, ..Default::default() };
        assert_eq!((log.n_max(), log.k_star()), (1, 0));
        log.gates = vec![stats(1, 2, 1.0), stats(2, 5, 0.9), stats(3, 5, 0.9), stats(4, 3, 0.8)];
        assert_eq!((log.n_max(), log.k_star()), (5, 2));
        assert!(log.max_norm_increase() <= 0.0);
        log.finalize().unwrap();
        log.gates.push(stats(5, 101, 0.8));
        assert!(log.finalize().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let log = TraceLog { gates: vec![stats(1, 2, 1.0), stats(2, 4, 0.5)], ..TraceLog::default() };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let back = TraceLog::read_csv(&buf[..]).unwrap();
        assert_eq!(back.gates, log.gates);
    }
}
