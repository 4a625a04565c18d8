use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform-bin histogram. A value lands in bin `i` when
/// `edges[i] <= v < edges[i + 1]`; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
    pub absolute: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// Bins `coeffs` (or their magnitudes when `absolute`). In absolute mode the
/// range starts at `floor` when given (extended down to the smallest value
/// so nothing is dropped).
pub fn histogram(coeffs: &[f64], bins: usize, absolute: bool, floor: Option<f64>) -> Result<CoefficientHistogram> {
    if coeffs.is_empty() {
        return Err(Error::InsufficientData("histogram of an empty sample".into()));
    }
    if bins < 2 {
        return Err(Error::InvalidArgument("need at least 2 bins".into()));
    }
    let values: Vec<f64> = if absolute { coeffs.iter().map(|c| c.abs()).collect() } else { coeffs.to_vec() };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = match (absolute, floor) {
        (true, Some(f)) => f.min(min),
        _ => min,
    };
    let hi = if max > lo { max } else { lo + 1.0 };
    let width = hi - lo;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * (i as f64 / bins as f64)).collect();
    edges.push(hi);
    let mut counts = vec![0u64; bins];
    for &v in &values {
        let mut i = (((v - lo) / width) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize;
        while i > 0 && v < edges[i] {
            i -= 1;
        }
        while i + 1 < bins && v >= edges[i + 1] {
            i += 1;
        }
        counts[i] += 1;
    }
    Ok(CoefficientHistogram {
        edges,
        counts,
        total: values.len() as u64,
        absolute,
        gate: None,
        delta: None,
    })
}

impl CoefficientHistogram {
    /// `count / (total * width)` per bin.
    pub fn densities(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, e)| c as f64 / (self.total as f64 * (e[1] - e[0])))
            .collect()
    }

    /// CSV with columns `edge_lo,edge_hi,count,density`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "edge_lo,edge_hi,count,density")?;
        for ((e, c), d) in self.edges.windows(2).zip(&self.counts).zip(self.densities()) {
            writeln!(w, "{:e},{:e},{},{:e}", e[0], e[1], c, d)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let h = histogram(&[-1.0, 1.0], 2, false, None).unwrap();
        assert_eq!(h.counts, [1, 1]);
        let h = histogram(&[0.25; 7], 4, true, None).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 7);
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert!(histogram(&[], 4, false, None).is_err());
        assert!(histogram(&[1.0], 1, false, None).is_err());
    }

    #[test]
    fn absolute_floor() {
        let h = histogram(&[-0.5, 0.2, 1.0], 4, true, Some(0.0)).unwrap();
        assert_eq!(h.edges[0], 0.0);
        assert_eq!(h.counts, [1, 0, 1, 1]);
    }

    proptest! {
        #[test]
        fn counts_cover_samples(xs in prop::collection::vec(-1e3f64..1e3, 1..200), bins in 2usize..64, abs in any::<bool>()) {
            let h = histogram(&xs, bins, abs, None).unwrap();
            prop_assert_eq!(h.counts.iter().sum::<u64>(), xs.len() as u64);
            prop_assert!(h.edges.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
