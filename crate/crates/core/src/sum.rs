//! Sparse Pauli-sum observable.
//!
//! Rows are kept in Hermitian label form with real coefficients, so the
//! phase of each row is a function of its bits (`alpha = #Y mod 4`). The
//! index is a hash table of row slots keyed by the packed bits; it never
//! stores a second copy of the key.

use std::io::{BufRead, Read, Write};

use hashbrown::HashTable;

use crate::error::{ensure_qubits, Error, Result};
use crate::parallel::{chunked_sum, Exec};
use crate::pauli::{canonical_real_coefficient, words_per_half, PauliString};

/// Default hard cap on the number of rows.
pub const DEFAULT_ROW_CAP: usize = 1 << 31;

const SNAPSHOT_MAGIC: &[u8; 8] = b"PPSNAP01";

#[inline]
pub(crate) fn hash_key(key: &[u64]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for &w in key {
        h = (h ^ w).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h ^= h >> 29;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 32)
}

/// Linear combination `sum_P c_P P` over distinct Pauli strings.
#[derive(Clone)]
pub struct PauliSum {
    n: usize,
    stride: usize,
    bits: Vec<u64>,
    coeffs: Vec<f64>,
    index: HashTable<u32>,
    row_cap: usize,
}

impl std::fmt::Debug for PauliSum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PauliSum")
            .field("n", &self.n)
            .field("rows", &self.len())
            .finish()
    }
}

impl PauliSum {
    pub fn new(n: usize) -> Self {
        PauliSum {
            n,
            stride: 2 * words_per_half(n),
            bits: Vec::new(),
            coeffs: Vec::new(),
            index: HashTable::new(),
            row_cap: DEFAULT_ROW_CAP,
        }
    }

    /// Sum of `(string, coefficient)` terms, accumulating duplicates.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, f64)>,
    {
        let mut sum = PauliSum::new(n);
        for (p, c) in terms {
            sum.insert_or_accumulate(&p, c)?;
        }
        Ok(sum)
    }

    /// Single-term observable `1.0 * p`.
    pub fn single(p: &PauliString) -> Result<Self> {
        Self::from_terms(p.n(), [(p.clone(), 1.0)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn row_cap(&self) -> usize {
        self.row_cap
    }

    pub fn set_row_cap(&mut self, cap: usize) {
        self.row_cap = cap.min(u32::MAX as usize);
    }

    /// Canonical real coefficients in row order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Packed bits of row `r`.
    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.bits[r * self.stride..(r + 1) * self.stride]
    }

    /// Phase exponent of row `r` (always the Hermitian one).
    pub fn phase(&self, r: usize) -> u8 {
        (crate::pauli::y_count(self.row_words(r)) & 3) as u8
    }

    pub fn row(&self, r: usize) -> PauliString {
        PauliString::from_words(self.n, self.row_words(r), self.phase(r))
            .expect("rows are well formed")
    }

    pub fn iter(&self) -> impl Iterator<Item = (PauliString, f64)> + '_ {
        (0..self.len()).map(|r| (self.row(r), self.coeffs[r]))
    }

    /// Real coefficient of the Hermitian label of `p`, if present.
    pub fn get(&self, p: &PauliString) -> Option<f64> {
        if p.n() != self.n {
            return None;
        }
        self.find_row(p.words()).map(|r| self.coeffs[r as usize])
    }

    /// Adds `c * p`; a row whose coefficient cancels to exactly zero is dropped.
    pub fn insert_or_accumulate(&mut self, p: &PauliString, c: f64) -> Result<()> {
        ensure_qubits(self.n, p.n())?;
        let c = canonical_real_coefficient(c, p)?;
        let key = p.words();
        let hash = hash_key(key);
        match self.find_row_hashed(hash, key) {
            Some(r) => {
                let r = r as usize;
                self.coeffs[r] += c;
                if self.coeffs[r] == 0.0 {
                    self.swap_remove_row(r);
                }
            }
            None if c != 0.0 => {
                self.push_row_hashed(hash, key, c)?;
            }
            None => {}
        }
        Ok(())
    }

    /// Drops every row with `|c| < delta` (and exact zeros). Returns the
    /// number of rows removed.
    pub fn truncate(&mut self, delta: f64) -> usize {
        self.truncate_with(Exec::Sequential, delta)
    }

    pub(crate) fn truncate_with(&mut self, exec: Exec, delta: f64) -> usize {
        let coeffs = &self.coeffs;
        let doomed = crate::parallel::filter_indices(exec, coeffs.len(), |r| {
            let c = coeffs[r];
            c.abs() < delta || c == 0.0
        });
        for &r in doomed.iter().rev() {
            self.swap_remove_row(r as usize);
        }
        doomed.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq_with(Exec::Sequential)
    }

    pub(crate) fn norm_sq_with(&self, exec: Exec) -> f64 {
        chunked_sum(exec, &self.coeffs, |c| c * c)
    }

    /// `(sum_P c_P^2)^{1/2}`.
    pub fn raw_norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `<0|O|0>`: the sum of coefficients over Z-type rows.
    pub fn expectation(&self) -> f64 {
        let h = self.stride / 2;
        let mut total = 0.0;
        for (r, &c) in self.coeffs.iter().enumerate() {
            let w = self.row_words(r);
            if w[h..].iter().all(|&x| x == 0) {
                total += c;
            }
        }
        total
    }

    // Low-level row access for the propagation engine.

    pub(crate) fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub(crate) fn find_row(&self, key: &[u64]) -> Option<u32> {
        self.find_row_hashed(hash_key(key), key)
    }

    #[inline]
    pub(crate) fn find_row_hashed(&self, hash: u64, key: &[u64]) -> Option<u32> {
        let (bits, stride) = (&self.bits, self.stride);
        self.index
            .find(hash, |&slot| {
                let s = slot as usize * stride;
                &bits[s..s + stride] == key
            })
            .copied()
    }

    /// Appends a row whose key is known to be absent.
    pub(crate) fn push_row_hashed(&mut self, hash: u64, key: &[u64], c: f64) -> Result<()> {
        if self.len() >= self.row_cap {
            return Err(Error::CapacityExceeded { cap: self.row_cap });
        }
        let slot = self.len() as u32;
        self.bits.extend_from_slice(key);
        self.coeffs.push(c);
        let (bits, stride) = (&self.bits, self.stride);
        self.index.insert_unique(hash, slot, |&s| {
            let s = s as usize * stride;
            hash_key(&bits[s..s + stride])
        });
        Ok(())
    }

    /// Replaces the key of row `r` with one known to be absent.
    pub(crate) fn relabel_row(&mut self, r: usize, new_key: &[u64], new_hash: u64) {
        let stride = self.stride;
        let old_hash = hash_key(self.row_words(r));
        if let Ok(entry) = self.index.find_entry(old_hash, |&s| s as usize == r) {
            entry.remove();
        }
        self.bits[r * stride..(r + 1) * stride].copy_from_slice(new_key);
        let bits = &self.bits;
        self.index.insert_unique(new_hash, r as u32, |&s| {
            let s = s as usize * stride;
            hash_key(&bits[s..s + stride])
        });
    }

    /// Removes row `r`, moving the last row into its slot.
    pub(crate) fn swap_remove_row(&mut self, r: usize) {
        let stride = self.stride;
        let last = self.len() - 1;
        let h = hash_key(self.row_words(r));
        if let Ok(entry) = self.index.find_entry(h, |&s| s as usize == r) {
            entry.remove();
        }
        if r != last {
            let hl = hash_key(self.row_words(last));
            if let Some(slot) = self.index.find_mut(hl, |&s| s as usize == last) {
                *slot = r as u32;
            }
            self.bits.copy_within(last * stride..(last + 1) * stride, r * stride);
            self.coeffs[r] = self.coeffs[last];
        }
        self.bits.truncate(last * stride);
        self.coeffs.pop();
    }

    /// Checks that the index is a bijection onto the rows.
    pub fn check_index(&self) -> Result<()> {
        if self.index.len() != self.len() {
            return Err(Error::InvariantViolation(format!(
                "index holds {} entries for {} rows",
                self.index.len(),
                self.len()
            )));
        }
        for r in 0..self.len() {
            if self.find_row(self.row_words(r)) != Some(r as u32) {
                return Err(Error::InvariantViolation(format!("row {r} not indexed")));
            }
        }
        Ok(())
    }

    /// CSV snapshot with a `pauli_label,coefficient` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "pauli_label,coefficient")?;
        for r in 0..self.len() {
            writeln!(w, "{},{:e}", self.row(r).to_sparse_label(), self.coeffs[r])?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, n: usize) -> Result<Self> {
        let mut sum = PauliSum::new(n);
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("pauli_label")) {
                continue;
            }
            let (label, coeff) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected label,coefficient", i + 1)))?;
            let c: f64 = coeff
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad coefficient {coeff:?}", i + 1)))?;
            sum.insert_or_accumulate(&PauliString::parse(label, n)?, c)?;
        }
        Ok(sum)
    }

    /// Binary snapshot: header, packed rows, then the coefficient array,
    /// all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W, meta: &SnapshotMeta) -> Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.stride as u32).to_le_bytes())?;
        w.write_all(&(meta.gate as u64).to_le_bytes())?;
        w.write_all(&meta.delta.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for word in &self.bits {
            w.write_all(&word.to_le_bytes())?;
        }
        for c in &self.coeffs {
            w.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<(Self, SnapshotMeta)> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Parse("not a binary Pauli snapshot".into()));
        }
        let n = read_u32(&mut r)? as usize;
        let stride = read_u32(&mut r)? as usize;
        if stride != 2 * words_per_half(n) {
            return Err(Error::Parse(format!("row stride {stride} inconsistent with n={n}")));
        }
        let gate = read_u64(&mut r)? as usize;
        let delta = f64::from_bits(read_u64(&mut r)?);
        let rows = read_u64(&mut r)? as usize;
        let mut bits = Vec::with_capacity(rows * stride);
        for _ in 0..rows * stride {
            bits.push(read_u64(&mut r)?);
        }
        let mut sum = PauliSum::new(n);
        for i in 0..rows {
            let c = f64::from_bits(read_u64(&mut r)?);
            let p = PauliString::from_words(n, &bits[i * stride..(i + 1) * stride], 0)?;
            let p = p.with_alpha(p.hermitian_alpha());
            sum.insert_or_accumulate(&p, c)?;
        }
        Ok((sum, SnapshotMeta { gate, delta }))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Provenance stored alongside a coefficient snapshot.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SnapshotMeta {
    /// Number of gates applied when the snapshot was taken.
    pub gate: usize,
    pub delta: f64,
}
