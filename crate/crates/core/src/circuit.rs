//! Circuits of Pauli rotations and generators for the model families.
//!
//! A circuit is an ordered list of rotations `exp(-i theta sigma / 2)`.
//! List order is the order in which gates act on the observable during
//! Heisenberg propagation: gate 0 is applied to the observable first,
//! which makes it the last gate seen by the state `|0...0>`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256StarStar};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_qubits, Error, Result};
use crate::pauli::{canonical_real_coefficient, Pauli, PauliString};

/// One Pauli rotation `exp(-i theta sigma / 2)` with a Hermitian generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub generator: PauliString,
    pub theta: f64,
}

/// Provenance of a generated circuit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CircuitMetadata {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
    pub metadata: CircuitMetadata,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Circuit {
            n,
            gates: Vec::new(),
            metadata: CircuitMetadata::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Appends a rotation. A generator carrying a `-1` phase is folded into
    /// the angle; imaginary phases are rejected.
    pub fn push(&mut self, generator: PauliString, theta: f64) -> Result<()> {
        ensure_qubits(self.n, generator.n())?;
        if !theta.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite angle {theta}")));
        }
        let sign = canonical_real_coefficient(1.0, &generator).map_err(|_| {
            Error::InvalidArgument(format!("generator {generator} is not Hermitian"))
        })?;
        let generator = generator.with_alpha(generator.hermitian_alpha());
        self.gates.push(Gate {
            generator,
            theta: sign * theta,
        });
        Ok(())
    }

    /// Appends `exp(-i theta Z_i Z_j / 2)`.
    pub fn push_rzz(&mut self, i: usize, j: usize, theta: f64) -> Result<()> {
        let g = PauliString::from_sparse(self.n, &[(i, Pauli::Z), (j, Pauli::Z)])?;
        self.push(g, theta)
    }

    /// Appends `exp(-i theta X_q / 2)`.
    pub fn push_rx(&mut self, q: usize, theta: f64) -> Result<()> {
        self.push(PauliString::single(self.n, q, Pauli::X)?, theta)
    }

    pub fn to_json(&self) -> Result<String> {
        let wire = CircuitJson {
            n: self.n,
            gates: self
                .gates
                .iter()
                .map(|g| GateJson {
                    generator: g.generator.to_sparse_label(),
                    theta: g.theta,
                })
                .collect(),
            metadata: self.metadata.clone(),
        };
        Ok(serde_json::to_string_pretty(&wire)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: CircuitJson = serde_json::from_str(text)?;
        let mut c = Circuit::new(wire.n);
        for g in wire.gates {
            c.push(PauliString::parse(&g.generator, wire.n)?, g.theta)?;
        }
        c.metadata = wire.metadata;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct CircuitJson {
    n: usize,
    gates: Vec<GateJson>,
    #[serde(default)]
    metadata: CircuitMetadata,
}

#[derive(Serialize, Deserialize)]
struct GateJson {
    generator: String,
    theta: f64,
}

/// Undirected coupling graph with edges sorted by `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
}

const HEAVY_HEX_127: &str = include_str!("../data/ibm_heavy_hex_127.txt");

impl Topology {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut out = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidTopology(format!("self loop on qubit {a}")));
            }
            let (i, j) = (a.min(b), a.max(b));
            if j >= n {
                return Err(Error::InvalidTopology(format!(
                    "edge ({a}, {b}) out of range for {n} qubits"
                )));
            }
            out.push((i, j));
        }
        out.sort_unstable();
        if let Some(w) = out.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidTopology(format!("duplicate edge {:?}", w[0])));
        }
        Ok(Topology { n, edges: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Parses whitespace-separated `i j` lines; `#` starts a comment. The
    /// qubit count is `n` when given, else one past the largest index.
    pub fn parse(text: &str, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed: Option<Vec<usize>> = fields.iter().map(|f| f.parse().ok()).collect();
            match parsed.as_deref() {
                Some(&[i, j]) => edges.push((i, j)),
                _ => {
                    return Err(Error::InvalidTopology(format!(
                        "line {}: expected two qubit indices, got {raw:?}",
                        lineno + 1
                    )))
                }
            }
        }
        let n = match n {
            Some(n) => n,
            None => edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0),
        };
        Topology::new(n, edges)
    }

    pub fn load(path: impl AsRef<Path>, n: Option<usize>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, n)
    }

    /// Text form accepted by [`Topology::parse`].
    pub fn to_text(&self) -> String {
        self.edges.iter().map(|(i, j)| format!("{i} {j}\n")).collect()
    }

    /// Open-boundary `rows x cols` grid, qubit `r * cols + c`.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidTopology("grid dimensions must be positive".into()));
        }
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let q = r * cols + c;
                if c + 1 < cols {
                    edges.push((q, q + 1));
                }
                if r + 1 < rows {
                    edges.push((q, q + cols));
                }
            }
        }
        Topology::new(rows * cols, edges)
    }

    /// IBM Eagle 127-qubit heavy-hex coupling map.
    pub fn heavy_hex_127() -> Self {
        Topology::parse(HEAVY_HEX_127, Some(127)).expect("packaged topology is valid")
    }

    /// `ibm_heavy_hex_127` or `grid_RxC`.
    pub fn builtin(name: &str) -> Result<Self> {
        if name == "ibm_heavy_hex_127" {
            return Ok(Topology::heavy_hex_127());
        }
        if let Some(dims) = name.strip_prefix("grid_") {
            if let Some((r, c)) = dims.split_once('x') {
                if let (Ok(r), Ok(c)) = (r.parse(), c.parse()) {
                    return Topology::grid(r, c);
                }
            }
        }
        Err(Error::InvalidTopology(format!("unknown builtin topology {name:?}")))
    }
}

/// Single-qubit X angle schedule for kicked-Ising circuits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleSpec {
    Fixed(f64),
    /// One independent draw per (step, qubit) from `[low, high]`.
    UniformRandom { low: f64, high: f64, seed: u64 },
}

/// Reproducible angle source: xoshiro256** seeded through splitmix64.
///
/// The four state words are the first four splitmix64 outputs for the
/// seed; a uniform draw is `(next_u64 >> 11) * 2^-53`.
pub struct AngleRng(Xoshiro256StarStar);

impl AngleRng {
    pub fn new(seed: u64) -> Self {
        let mut sm = SplitMix64::seed_from_u64(seed);
        let mut state = [0u8; 32];
        for chunk in state.chunks_exact_mut(8) {
            chunk.copy_from_slice(&sm.next_u64().to_le_bytes());
        }
        AngleRng(Xoshiro256StarStar::from_seed(state))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.unit()
    }
}

/// Kicked transverse-field Ising circuit: per Trotter step all ZZ
/// rotations over the edges in canonical order, then X rotations on
/// qubits `0..n`.
pub fn kicked_ising(
    topology: &Topology,
    steps: usize,
    theta_zz: f64,
    theta_x: AngleSpec,
) -> Result<Circuit> {
    if topology.edges().is_empty() {
        return Err(Error::InvalidTopology("kicked Ising needs at least one edge".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("number of Trotter steps must be positive".into()));
    }
    let n = topology.n();
    let mut c = Circuit::new(n);
    let mut rng = match theta_x {
        AngleSpec::UniformRandom { seed, .. } => Some(AngleRng::new(seed)),
        AngleSpec::Fixed(_) => None,
    };
    for _ in 0..steps {
        for &(i, j) in topology.edges() {
            c.push_rzz(i, j, theta_zz)?;
        }
        for q in 0..n {
            let angle = match (theta_x, rng.as_mut()) {
                (AngleSpec::UniformRandom { low, high, .. }, Some(rng)) => rng.uniform(low, high),
                (AngleSpec::Fixed(v), _) => v,
                _ => unreachable!(),
            };
            c.push_rx(q, angle)?;
        }
    }
    let mut params = BTreeMap::new();
    params.insert("steps".into(), steps.into());
    params.insert("theta_zz".into(), theta_zz.into());
    params.insert("edges".into(), topology.edges().len().into());
    match theta_x {
        AngleSpec::Fixed(v) => {
            params.insert("theta_x".into(), v.into());
        }
        AngleSpec::UniformRandom { low, high, seed } => {
            params.insert("theta_x".into(), "uniform".into());
            params.insert("theta_x_low".into(), low.into());
            params.insert("theta_x_high".into(), high.into());
            c.metadata.seed = Some(seed);
        }
    }
    c.metadata.family = "kicked-ising".into();
    c.metadata.params = params;
    Ok(c)
}

/// Angle conventions for the first-order transverse-field Ising Trotter
/// circuit `H = J sum ZZ + h sum X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfimConvention {
    /// Coupling `J`.
    pub coupling: f64,
    /// Rotation angle per unit `dt * coefficient`.
    pub angle_scale: f64,
}

impl Default for TfimConvention {
    fn default() -> Self {
        TfimConvention {
            coupling: -1.0,
            angle_scale: 2.0,
        }
    }
}

/// First-order Trotter circuit on an open `rows x cols` grid: each step is
/// `RZZ(scale * dt * J)` on every edge followed by `RX(scale * dt * h)` on
/// every site.
pub fn tfim_trotter_grid(
    rows: usize,
    cols: usize,
    h: f64,
    t_total: f64,
    dt: f64,
    conv: TfimConvention,
) -> Result<Circuit> {
    if !(dt > 0.0) || !(t_total > 0.0) {
        return Err(Error::InvalidArgument("t and dt must be positive".into()));
    }
    let ratio = t_total / dt;
    let steps = ratio.round();
    if (steps * dt - t_total).abs() > 1e-9 || steps < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "dt = {dt} does not divide t = {t_total} into an integer number of steps"
        )));
    }
    let steps = steps as usize;
    let topo = Topology::grid(rows, cols)?;
    let zz = conv.angle_scale * dt * conv.coupling;
    let x = conv.angle_scale * dt * h;
    let mut c = Circuit::new(topo.n());
    for _ in 0..steps {
        for &(i, j) in topo.edges() {
            c.push_rzz(i, j, zz)?;
        }
        for q in 0..topo.n() {
            c.push_rx(q, x)?;
        }
    }
    let mut params = BTreeMap::new();
    params.insert("rows".into(), rows.into());
    params.insert("cols".into(), cols.into());
    params.insert("h".into(), h.into());
    params.insert("t".into(), t_total.into());
    params.insert("dt".into(), dt.into());
    params.insert("steps".into(), steps.into());
    params.insert("coupling".into(), conv.coupling.into());
    params.insert("angle_scale".into(), conv.angle_scale.into());
    c.metadata.family = "grid-ising".into();
    c.metadata.params = params;
    Ok(c)
}

/// `pi/2` in the form used by the generators (`theta_zz = -pi/2` is Clifford).
pub const QUARTER_TURN: f64 = PI / 2.0;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heavy_hex_shape() {
        let t = Topology::heavy_hex_127();
        assert_eq!(t.n(), 127);
        assert_eq!(t.edges().len(), 144);
        let mut deg = vec![0; 127];
        for &(i, j) in t.edges() {
            deg[i] += 1;
            deg[j] += 1;
        }
        assert!(deg.iter().all(|&d| (1..=3).contains(&d)));
        assert_eq!(Topology::builtin("ibm_heavy_hex_127").unwrap(), t);
    }

    #[test]
    fn topology_parsing() {
        let t = Topology::parse("0 1\n1 2", None).unwrap();
        assert_eq!((t.n(), t.edges()), (3, &[(0, 1), (1, 2)][..]));
        let t = Topology::parse("# c\n2 1\n\n0 1 # tail\n", None).unwrap();
        assert_eq!(t.edges(), &[(0, 1), (1, 2)]);
        assert!(Topology::parse("0 1\n1 0", None).is_err());
        assert!(Topology::parse("0 1 2", None).is_err());
        assert!(Topology::parse("0 x", None).is_err());
        assert!(Topology::parse("0 5", Some(3)).is_err());
        assert!(Topology::parse("1 1", None).is_err());
        assert!(Topology::builtin("torus").is_err());
    }

    #[test]
    fn grid_edges() {
        assert_eq!(Topology::grid(11, 11).unwrap().edges().len(), 220);
        assert_eq!(Topology::builtin("grid_1x2").unwrap().edges(), &[(0, 1)]);
    }

    #[test]
    fn kicked_ising_layout() {
        let t = Topology::parse("0 1", None).unwrap();
        let c = kicked_ising(&t, 1, -QUARTER_TURN, AngleSpec::Fixed(0.0)).unwrap();
        let labels: Vec<String> = c.gates().iter().map(|g| g.generator.to_sparse_label()).collect();
        assert_eq!(labels, ["Z0*Z1", "X0", "X1"]);
        assert_eq!(c.gates()[1].theta, 0.0);
        let hh = Topology::heavy_hex_127();
        let c = kicked_ising(&hh, 20, -QUARTER_TURN, AngleSpec::Fixed(0.3)).unwrap();
        assert_eq!(c.len(), 5420);
        assert!(kicked_ising(&Topology::new(3, []).unwrap(), 1, 0.0, AngleSpec::Fixed(0.0)).is_err());
    }

    #[test]
    fn random_angles_are_reproducible() {
        let t = Topology::grid(2, 3).unwrap();
        let spec = AngleSpec::UniformRandom { low: -PI / 4.0, high: PI / 4.0, seed: 7 };
        let a = kicked_ising(&t, 3, -QUARTER_TURN, spec).unwrap();
        let b = kicked_ising(&t, 3, -QUARTER_TURN, spec).unwrap();
        assert_eq!(a, b);
        let xs: Vec<f64> = a.gates().iter().filter(|g| g.generator.weight() == 1).map(|g| g.theta).collect();
        assert!(xs.iter().all(|x| x.abs() <= PI / 4.0));
        assert!(xs.windows(2).any(|w| w[0] != w[1]));
        let spec8 = AngleSpec::UniformRandom { low: -PI / 4.0, high: PI / 4.0, seed: 8 };
        assert_ne!(a, kicked_ising(&t, 3, -QUARTER_TURN, spec8).unwrap());
    }

    #[test]
    fn angle_stream_is_deterministic() {
        let mut rng = AngleRng::new(7);
        let first: Vec<u64> = (0..3).map(|_| rng.0.next_u64()).collect();
        let mut again = AngleRng::new(7);
        let second: Vec<u64> = (0..3).map(|_| again.0.next_u64()).collect();
        assert_eq!(first, second);
        let u = AngleRng::new(0).unit();
        assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn tfim_grid_steps() {
        let c = tfim_trotter_grid(11, 11, 3.044382, 0.92, 0.04, TfimConvention::default()).unwrap();
        assert_eq!(c.len(), 23 * (220 + 121));
        let c = tfim_trotter_grid(1, 2, 1.0, 0.1, 0.1, TfimConvention::default()).unwrap();
        let labels: Vec<String> = c.gates().iter().map(|g| g.generator.to_sparse_label()).collect();
        assert_eq!(labels, ["Z0*Z1", "X0", "X1"]);
        assert!((c.gates()[0].theta + 0.2).abs() < 1e-15);
        assert!(tfim_trotter_grid(2, 2, 1.0, 1.0, 0.3, TfimConvention::default()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = Topology::grid(2, 2).unwrap();
        let spec = AngleSpec::UniformRandom { low: -1.0, high: 1.0, seed: 3 };
        let c = kicked_ising(&t, 2, 0.37, spec).unwrap();
        let back = Circuit::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn negative_generators_flip_the_angle() {
        let mut c = Circuit::new(2);
        c.push(PauliString::parse("-Z0*Z1", 2).unwrap(), 0.4).unwrap();
        assert_eq!(c.gates()[0].theta, -0.4);
        assert!(c.gates()[0].generator.is_hermitian_form());
        assert!(c.push(PauliString::parse("iX0", 2).unwrap(), 0.4).is_err());
    }
}
