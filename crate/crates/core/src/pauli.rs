//! Symplectic bit representation of n-qubit Pauli operators.
//!
//! A string is stored as `(-i)^alpha * ⊗_q Z^{z_q} X^{x_q}` with the z bits
//! packed into the first half of the word array and the x bits into the
//! second half. With this per-qubit ordering `ZX = iY`, so a Hermitian
//! string carrying `y` Y factors has `alpha = y (mod 4)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_qubits, Error, Result};

/// Number of 64-bit words holding one half (z or x) of an `n`-qubit string.
pub const fn words_per_half(n: usize) -> usize {
    n.div_ceil(64)
}

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// `(z, x)` bit pair.
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (false, true),
            Pauli::Y => (true, true),
            Pauli::Z => (true, false),
        }
    }

    pub fn from_bits(z: bool, x: bool) -> Self {
        match (z, x) {
            (false, false) => Pauli::I,
            (false, true) => Pauli::X,
            (true, true) => Pauli::Y,
            (true, false) => Pauli::Z,
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// An n-qubit Pauli operator with a phase `(-i)^alpha`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    words: Box<[u64]>,
    alpha: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString {
            n,
            words: vec![0; 2 * words_per_half(n)].into_boxed_slice(),
            alpha: 0,
        }
    }

    /// Hermitian string with the given letters on the given qubits.
    pub fn from_sparse(n: usize, terms: &[(usize, Pauli)]) -> Result<Self> {
        let mut p = PauliString::identity(n);
        for &(q, letter) in terms {
            if q >= n {
                return Err(Error::InvalidArgument(format!(
                    "qubit {q} out of range for {n} qubits"
                )));
            }
            if p.pauli_at(q) != Pauli::I {
                return Err(Error::InvalidArgument(format!("qubit {q} listed twice")));
            }
            p.set(q, letter);
        }
        p.alpha = p.hermitian_alpha();
        Ok(p)
    }

    pub fn single(n: usize, q: usize, letter: Pauli) -> Result<Self> {
        Self::from_sparse(n, &[(q, letter)])
    }

    /// Builds a string from raw packed words (z half then x half).
    pub fn from_words(n: usize, words: &[u64], alpha: u8) -> Result<Self> {
        let wph = words_per_half(n);
        if words.len() != 2 * wph {
            return Err(Error::InvalidArgument(format!(
                "expected {} words for {n} qubits, got {}",
                2 * wph,
                words.len()
            )));
        }
        let tail = n % 64;
        if tail != 0 {
            let mask = !((1u64 << tail) - 1);
            if words[wph - 1] & mask != 0 || words[2 * wph - 1] & mask != 0 {
                return Err(Error::InvalidArgument(
                    "padding bits beyond qubit count are set".into(),
                ));
            }
        }
        Ok(PauliString {
            n,
            words: words.into(),
            alpha: alpha & 3,
        })
    }

    /// Parses a dense (`IXYZ`, qubit 0 leftmost) or sparse (`X3*Z7`) label.
    ///
    /// An optional phase prefix `+`, `-`, `i`, `-i` is accepted. Without a
    /// prefix the result is the Hermitian operator named by the label.
    pub fn parse(label: &str, n: usize) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidLabel {
            label: label.to_string(),
            reason: reason.to_string(),
        };
        let trimmed = label.trim();
        let (extra, body) = split_phase_prefix(trimmed);
        if body.is_empty() {
            return Err(bad("empty label"));
        }
        let mut p = if body.chars().all(|c| "IXYZ".contains(c)) && body.len() == n {
            let mut p = PauliString::identity(n);
            for (q, c) in body.chars().enumerate() {
                p.set(q, Pauli::from_char(c).expect("checked alphabet"));
            }
            p
        } else if body == "I" {
            PauliString::identity(n)
        } else {
            let mut terms = Vec::new();
            for tok in body.split(['*', ' ']).filter(|t| !t.is_empty()) {
                let mut chars = tok.chars();
                let letter = chars
                    .next()
                    .and_then(Pauli::from_char)
                    .ok_or_else(|| bad("sparse token must start with I, X, Y or Z"))?;
                let q: usize = chars
                    .as_str()
                    .parse()
                    .map_err(|_| bad("sparse token needs a qubit index"))?;
                if letter != Pauli::I {
                    terms.push((q, letter));
                }
            }
            PauliString::from_sparse(n, &terms).map_err(|e| bad(&e.to_string()))?
        };
        p.alpha = (p.hermitian_alpha() + extra) & 3;
        Ok(p)
    }

    /// Parses a dense label, taking the qubit count from its length.
    pub fn parse_dense(label: &str) -> Result<Self> {
        let (_, body) = split_phase_prefix(label.trim());
        Self::parse(label, body.len())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> u8 {
        self.alpha
    }

    /// Same operator bits with a different phase exponent.
    pub fn with_alpha(&self, alpha: u8) -> Self {
        PauliString {
            alpha: alpha & 3,
            ..self.clone()
        }
    }

    /// Packed words: z half followed by x half.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn z_words(&self) -> &[u64] {
        &self.words[..self.words.len() / 2]
    }

    pub fn x_words(&self) -> &[u64] {
        &self.words[self.words.len() / 2..]
    }

    pub fn pauli_at(&self, q: usize) -> Pauli {
        let wph = self.words.len() / 2;
        let (w, b) = (q / 64, q % 64);
        let z = self.words[w] >> b & 1 == 1;
        let x = self.words[wph + w] >> b & 1 == 1;
        Pauli::from_bits(z, x)
    }

    fn set(&mut self, q: usize, letter: Pauli) {
        let wph = self.words.len() / 2;
        let (w, b) = (q / 64, q % 64);
        let (z, x) = letter.bits();
        self.words[w] = self.words[w] & !(1 << b) | (z as u64) << b;
        self.words[wph + w] = self.words[wph + w] & !(1 << b) | (x as u64) << b;
    }

    /// Number of Y factors.
    pub fn y_count(&self) -> u32 {
        y_count(&self.words)
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> u32 {
        let (z, x) = self.words.split_at(self.words.len() / 2);
        z.iter().zip(x).map(|(a, b)| (a | b).count_ones()).sum()
    }

    /// True when the x half is empty (a product of Z and I).
    pub fn is_z_type(&self) -> bool {
        self.x_words().iter().all(|&w| w == 0)
    }

    /// Phase exponent that makes this string the Hermitian label operator.
    pub fn hermitian_alpha(&self) -> u8 {
        (self.y_count() & 3) as u8
    }

    pub fn is_hermitian_form(&self) -> bool {
        self.alpha == self.hermitian_alpha()
    }

    /// Support as `(qubit, letter)` pairs in ascending qubit order.
    pub fn support(&self) -> Vec<(usize, Pauli)> {
        (0..self.n)
            .map(|q| (q, self.pauli_at(q)))
            .filter(|(_, p)| *p != Pauli::I)
            .collect()
    }

    pub fn to_dense_label(&self) -> String {
        let body: String = (0..self.n).map(|q| self.pauli_at(q).as_char()).collect();
        format!("{}{body}", self.phase_prefix())
    }

    pub fn to_sparse_label(&self) -> String {
        let support = self.support();
        let body = if support.is_empty() {
            "I".to_string()
        } else {
            support
                .iter()
                .map(|(q, p)| format!("{}{q}", p.as_char()))
                .collect::<Vec<_>>()
                .join("*")
        };
        format!("{}{body}", self.phase_prefix())
    }

    fn phase_prefix(&self) -> &'static str {
        match (self.alpha + 4 - self.hermitian_alpha()) & 3 {
            0 => "",
            1 => "-i",
            2 => "-",
            _ => "i",
        }
    }

    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        ensure_qubits(self.n, other.n)?;
        Ok(!anticommutes(&self.words, &other.words))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sparse_label())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({}, n={}, alpha={})", self, self.n, self.alpha)
    }
}

fn split_phase_prefix(s: &str) -> (u8, &str) {
    for (prefix, k) in [("-i", 1u8), ("+i", 3), ("i", 3), ("-", 2), ("+", 0)] {
        if let Some(rest) = s.strip_prefix(prefix) {
            return (k, rest);
        }
    }
    (0, s)
}

/// `true` iff `P` and `Q` commute.
pub fn commutes(p: &PauliString, q: &PauliString) -> Result<bool> {
    p.commutes(q)
}

/// Returns `sigma * p` with the phase tracked in `alpha`.
pub fn multiply_by_generator(p: &PauliString, sigma: &PauliString) -> Result<PauliString> {
    ensure_qubits(sigma.n, p.n)?;
    let words: Box<[u64]> = p
        .words
        .iter()
        .zip(sigma.words.iter())
        .map(|(a, b)| a ^ b)
        .collect();
    let alpha = product_alpha(&p.words, p.alpha, &sigma.words, sigma.alpha);
    Ok(PauliString {
        n: p.n,
        words,
        alpha,
    })
}

/// `<0...0| P |0...0>`.
pub fn expectation_on_zero(p: &PauliString) -> Result<f64> {
    if !p.is_z_type() {
        return Ok(0.0);
    }
    match p.alpha {
        0 => Ok(1.0),
        2 => Ok(-1.0),
        a => Err(Error::InvariantViolation(format!(
            "Z-type string {p} carries imaginary phase exponent {a}"
        ))),
    }
}

/// Real coefficient of the Hermitian label operator underlying `c * P`.
pub fn canonical_real_coefficient(c: f64, p: &PauliString) -> Result<f64> {
    match (p.alpha + 4 - p.hermitian_alpha()) & 3 {
        0 => Ok(c),
        2 => Ok(-c),
        _ if c.abs() <= 1e-12 => Ok(0.0),
        _ => Err(Error::InvariantViolation(format!(
            "coefficient {c} on {p:?} is not real"
        ))),
    }
}

// Raw word-slice helpers shared with the sum and engine hot loops. Slices
// hold the z half followed by the x half.

#[inline]
pub(crate) fn anticommutes(a: &[u64], b: &[u64]) -> bool {
    let h = a.len() / 2;
    let mut acc = 0u32;
    for i in 0..h {
        acc ^= (a[h + i] & b[i]).count_ones() ^ (a[i] & b[h + i]).count_ones();
    }
    acc & 1 == 1
}

#[inline]
pub(crate) fn y_count(w: &[u64]) -> u32 {
    let h = w.len() / 2;
    (0..h).map(|i| (w[i] & w[h + i]).count_ones()).sum()
}

/// Phase exponent of `sigma * p`.
#[inline]
pub(crate) fn product_alpha(p: &[u64], p_alpha: u8, sigma: &[u64], sigma_alpha: u8) -> u8 {
    let h = p.len() / 2;
    let cross: u32 = (0..h).map(|i| (p[i] & sigma[h + i]).count_ones()).sum();
    ((p_alpha as u32 + sigma_alpha as u32 + 2 * cross) & 3) as u8
}

/// Sign `s` with `i * sigma * P = s * P'`, where `P` and `sigma` are
/// Hermitian label strings that anticommute and `P'` is the Hermitian label
/// of `p XOR sigma`.
#[inline]
pub(crate) fn branch_sign(p: &[u64], sigma: &[u64], sigma_y: u32) -> f64 {
    let h = p.len() / 2;
    let mut cross = 0u32;
    let mut y_new = 0u32;
    let mut y_p = 0u32;
    for i in 0..h {
        cross += (p[i] & sigma[h + i]).count_ones();
        y_p += (p[i] & p[h + i]).count_ones();
        y_new += ((p[i] ^ sigma[i]) & (p[h + i] ^ sigma[h + i])).count_ones();
    }
    // alpha(i sigma P) = y_p + y_sigma + 2 cross - 1
    let k = (y_p + sigma_y + 2 * cross + 3).wrapping_sub(y_new) & 3;
    debug_assert!(k & 1 == 0, "i*sigma*P must be Hermitian");
    if k == 0 {
        1.0
    } else {
        -1.0
    }
}
