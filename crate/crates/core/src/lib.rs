//! Pauli propagation: Heisenberg-picture simulation of observables through
//! circuits of Pauli rotations, with coefficient truncation, coefficient
//! statistics, resource extrapolation and a convergence protocol.
//!
//! ```
//! use pauliprop::{circuit, engine, PauliString, PauliSum};
//!
//! let topo = circuit::Topology::grid(2, 2).unwrap();
//! let c = circuit::kicked_ising(&topo, 2, -std::f64::consts::FRAC_PI_2, circuit::AngleSpec::Fixed(0.3)).unwrap();
//! let obs = PauliSum::single(&PauliString::parse("Z0", 4).unwrap()).unwrap();
//! let (out, log) = engine::evolve(&c, obs, &engine::EngineConfig::new(1e-3)).unwrap();
//! assert_eq!(log.gates.len(), c.len());
//! assert!(out.expectation().abs() <= 1.0);
//! ```

pub mod analysis;
pub mod circuit;
pub mod convergence;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod parallel;
pub mod pauli;
pub mod quad;
pub mod stats;
pub mod sum;
pub mod trace;

pub use circuit::{Circuit, Gate, Topology};
pub use error::{Error, Result};
pub use pauli::{Pauli, PauliString};
pub use sum::PauliSum;
pub use trace::{GateStats, TraceLog};
