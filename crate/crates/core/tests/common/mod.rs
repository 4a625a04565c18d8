//! Dense state-vector reference used by the integration tests.
//!
//! Labels are interpreted character by character (qubit 0 first) with the
//! textbook single-qubit matrices; nothing here goes through the library's
//! bit encoding.

#![allow(dead_code)]

use num_complex::Complex64 as C;
use rand::{Rng, RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

pub fn apply_pauli(state: &[C], label: &[u8]) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); state.len()];
    for (b, &amp) in state.iter().enumerate() {
        let mut target = b;
        let mut phase = C::new(1.0, 0.0);
        for (q, &ch) in label.iter().enumerate() {
            let bit = (b >> q) & 1;
            match ch {
                b'I' => {}
                b'X' => target ^= 1 << q,
                b'Z' => {
                    if bit == 1 {
                        phase = -phase;
                    }
                }
                // Y|0> = i|1>, Y|1> = -i|0>
                b'Y' => {
                    target ^= 1 << q;
                    phase *= if bit == 0 { C::new(0.0, 1.0) } else { C::new(0.0, -1.0) };
                }
                _ => panic!("bad label {ch}"),
            }
        }
        out[target] += phase * amp;
    }
    out
}

/// `exp(-i theta sigma / 2) |psi>`.
pub fn apply_rotation(state: &[C], label: &[u8], theta: f64) -> Vec<C> {
    let p = apply_pauli(state, label);
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    state.iter().zip(&p).map(|(&a, &b)| a * c - C::new(0.0, s) * b).collect()
}

/// `<0| U^dag O U |0>` for `U = U_0 U_1 ... U_{J-1}` (gate 0 leftmost),
/// which is what Heisenberg propagation in list order computes.
pub fn heisenberg_expectation(n: usize, gates: &[(String, f64)], observable: &[(String, f64)]) -> f64 {
    let mut psi = vec![C::new(0.0, 0.0); 1 << n];
    psi[0] = C::new(1.0, 0.0);
    for (label, theta) in gates.iter().rev() {
        psi = apply_rotation(&psi, label.as_bytes(), *theta);
    }
    let mut total = C::new(0.0, 0.0);
    for (label, c) in observable {
        let p = apply_pauli(&psi, label.as_bytes());
        let e: C = psi.iter().zip(&p).map(|(a, b)| a.conj() * b).sum();
        total += e * *c;
    }
    assert!(total.im.abs() < 1e-9, "observable not Hermitian");
    total.re
}

pub fn rng(seed: u64) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(seed)
}

pub fn random_label<R: Rng>(rng: &mut R, n: usize, max_weight: usize) -> String {
    loop {
        let mut s = vec![b'I'; n];
        let w = rng.random_range(1..=max_weight.min(n));
        for _ in 0..w {
            let q = rng.random_range(0..n);
            s[q] = b"XYZ"[rng.random_range(0..3)];
        }
        if s.iter().any(|&c| c != b'I') {
            return String::from_utf8(s).unwrap();
        }
    }
}

/// Random gate list mixing Clifford and generic angles.
pub fn random_gates<R: Rng>(rng: &mut R, n: usize, count: usize) -> Vec<(String, f64)> {
    (0..count)
        .map(|_| {
            let label = random_label(rng, n, 3);
            let theta = match rng.random_range(0..4) {
                0 => rng.random_range(-4i32..=4) as f64 * std::f64::consts::FRAC_PI_2,
                _ => rng.random_range(-7.0..7.0),
            };
            (label, theta)
        })
        .collect()
}

pub fn random_observable<R: Rng>(rng: &mut R, n: usize, terms: usize) -> Vec<(String, f64)> {
    (0..terms)
        .map(|_| (random_label(rng, n, n), rng.random_range(-1.0..1.0)))
        .collect()
}
