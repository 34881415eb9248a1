//! Exact arithmetic over Z_q: vectors, row-major matrices, centered lifts,
//! norms, and the MSB-first binary representation map `J`.

use std::fmt;

use rand::Rng;
use thiserror::Error;

/// Largest supported modulus (exclusive). Products of two residues then fit in `u64`.
pub const MAX_MODULUS: u64 = 1 << 31;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZqError {
    #[error("modulus {0} is not a prime in [2, 2^31)")]
    BadModulus(u64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u32, u32),
    #[error("entry {value} out of range for modulus {q}")]
    OutOfRange { value: u64, q: u32 },
    #[error("bit block {block} encodes {value}, which is not below q = {q}")]
    BlockOverflow { block: usize, value: u64, q: u32 },
    #[error("bit string contains a non-binary symbol at position {0}")]
    NotABit(usize),
}

/// A modulus `q` together with its bit width ⌈log₂ q⌉.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Modulus {
    q: u32,
    bits: u32,
}

impl Modulus {
    /// Prime modulus below 2^31.
    pub fn new(q: u64) -> Result<Self, ZqError> {
        if !(2..MAX_MODULUS).contains(&q) || !is_prime(q) {
            return Err(ZqError::BadModulus(q));
        }
        Ok(Self::build(q as u32))
    }

    /// Any modulus in [2, 2^31), prime or not. Only encoding helpers
    /// (lifts, `J`) are meaningful for composite moduli.
    pub fn new_composite(q: u64) -> Result<Self, ZqError> {
        if !(2..MAX_MODULUS).contains(&q) {
            return Err(ZqError::BadModulus(q));
        }
        Ok(Self::build(q as u32))
    }

    fn build(q: u32) -> Self {
        Self { q, bits: ceil_log2(q as u64) }
    }

    pub fn q(self) -> u32 {
        self.q
    }

    /// ⌈log₂ q⌉.
    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn reduce(self, v: i64) -> u32 {
        v.rem_euclid(self.q as i64) as u32
    }

    pub fn add(self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.q as u64) as u32
    }

    pub fn sub(self, a: u32, b: u32) -> u32 {
        ((a as u64 + self.q as u64 - b as u64) % self.q as u64) as u32
    }

    pub fn mul(self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.q as u64) as u32
    }

    pub fn neg(self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    /// Representative of `a` in (−q/2, q/2].
    pub fn lift(self, a: u32) -> i64 {
        let a = a as i64;
        let q = self.q as i64;
        if 2 * a > q {
            a - q
        } else {
            a
        }
    }

    /// Multiplicative inverse, if one exists.
    pub fn inv(self, a: u32) -> Option<u32> {
        let (mut r0, mut r1) = (self.q as i64, (a % self.q) as i64);
        let (mut t0, mut t1) = (0i64, 1i64);
        while r1 != 0 {
            let k = r0 / r1;
            (r0, r1) = (r1, r0 - k * r1);
            (t0, t1) = (t1, t0 - k * t1);
        }
        (r0 == 1).then(|| self.reduce(t0))
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> u32 {
        rng.gen_range(0..self.q)
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.q)
    }
}

pub fn ceil_log2(v: u64) -> u32 {
    if v <= 1 {
        0
    } else {
        64 - (v - 1).leading_zeros()
    }
}

pub fn is_prime(v: u64) -> bool {
    if v < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= v {
        if v.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// A vector over Z_q with entries in [0, q).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ZqVector {
    entries: Vec<u32>,
    modulus: Modulus,
}

impl ZqVector {
    pub fn new(entries: Vec<u32>, modulus: Modulus) -> Result<Self, ZqError> {
        if let Some(&bad) = entries.iter().find(|&&v| v >= modulus.q) {
            return Err(ZqError::OutOfRange { value: bad as u64, q: modulus.q });
        }
        Ok(Self { entries, modulus })
    }

    /// Reduces arbitrary integers mod q.
    pub fn from_signed(values: &[i64], modulus: Modulus) -> Self {
        Self { entries: values.iter().map(|&v| modulus.reduce(v)).collect(), modulus }
    }

    pub fn zero(len: usize, modulus: Modulus) -> Self {
        Self { entries: vec![0; len], modulus }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, modulus: Modulus, rng: &mut R) -> Self {
        Self { entries: (0..len).map(|_| modulus.sample(rng)).collect(), modulus }
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0)
    }

    fn check_peer(&self, other: &Self) -> Result<(), ZqError> {
        if self.modulus != other.modulus {
            return Err(ZqError::ModulusMismatch(self.modulus.q, other.modulus.q));
        }
        if self.len() != other.len() {
            return Err(ZqError::Dimension { expected: self.len(), got: other.len() });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, ZqError> {
        self.check_peer(other)?;
        let m = self.modulus;
        let entries = self.entries.iter().zip(&other.entries).map(|(&a, &b)| m.add(a, b)).collect();
        Ok(Self { entries, modulus: m })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, ZqError> {
        self.check_peer(other)?;
        let m = self.modulus;
        let entries = self.entries.iter().zip(&other.entries).map(|(&a, &b)| m.sub(a, b)).collect();
        Ok(Self { entries, modulus: m })
    }

    /// `c · self` for a signed scalar `c`.
    pub fn scale(&self, c: i64) -> Self {
        let m = self.modulus;
        let c = m.reduce(c);
        Self { entries: self.entries.iter().map(|&a| m.mul(a, c)).collect(), modulus: m }
    }

    pub fn neg(&self) -> Self {
        let m = self.modulus;
        Self { entries: self.entries.iter().map(|&a| m.neg(a)).collect(), modulus: m }
    }

    /// Entrywise representatives in (−q/2, q/2].
    pub fn centered_lift(&self) -> Vec<i64> {
        self.entries.iter().map(|&a| self.modulus.lift(a)).collect()
    }

    /// Exact squared ℓ₂ norm of the centered lift.
    pub fn norm_sq(&self) -> u64 {
        self.entries
            .iter()
            .map(|&a| {
                let l = self.modulus.lift(a);
                (l * l) as u64
            })
            .sum()
    }

    pub fn euclidean_norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// Largest absolute centered coordinate.
    pub fn max_abs(&self) -> u64 {
        self.entries.iter().map(|&a| self.modulus.lift(a).unsigned_abs()).max().unwrap_or(0)
    }
}

impl fmt::Display for ZqVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in &self.entries {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
            first = false;
        }
        Ok(())
    }
}

/// Row-major `rows × cols` matrix over Z_q.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZqMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u32>,
    modulus: Modulus,
}

impl ZqMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<u32>, modulus: Modulus) -> Result<Self, ZqError> {
        if data.len() != rows * cols {
            return Err(ZqError::Dimension { expected: rows * cols, got: data.len() });
        }
        if let Some(&bad) = data.iter().find(|&&v| v >= modulus.q) {
            return Err(ZqError::OutOfRange { value: bad as u64, q: modulus.q });
        }
        Ok(Self { rows, cols, data, modulus })
    }

    pub fn zero(rows: usize, cols: usize, modulus: Modulus) -> Self {
        Self { rows, cols, data: vec![0; rows * cols], modulus }
    }

    pub fn identity(n: usize, modulus: Modulus) -> Self {
        let mut m = Self::zero(n, n, modulus);
        for i in 0..n {
            m.data[i * n + i] = 1 % modulus.q;
        }
        m
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, modulus: Modulus, rng: &mut R) -> Self {
        Self { rows, cols, data: (0..rows * cols).map(|_| modulus.sample(rng)).collect(), modulus }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i * self.cols + j] = v % self.modulus.q;
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> ZqVector {
        ZqVector { entries: (0..self.rows).map(|i| self.get(i, j)).collect(), modulus: self.modulus }
    }
}

/// `A·x mod q`, with 64-bit accumulation.
pub fn mat_vec_mul(a: &ZqMatrix, x: &ZqVector) -> Result<ZqVector, ZqError> {
    if a.modulus != x.modulus {
        return Err(ZqError::ModulusMismatch(a.modulus.q, x.modulus.q));
    }
    if a.cols != x.len() {
        return Err(ZqError::Dimension { expected: a.cols, got: x.len() });
    }
    let q = a.modulus.q as u64;
    let entries = (0..a.rows)
        .map(|i| {
            let acc = a.row(i).iter().zip(&x.entries).fold(0u64, |acc, (&aij, &xj)| (acc + aij as u64 * xj as u64) % q);
            acc as u32
        })
        .collect();
    Ok(ZqVector { entries, modulus: a.modulus })
}

/// A string over {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<u8>,
}

impl BitString {
    pub fn new(bits: Vec<u8>) -> Result<Self, ZqError> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(ZqError::NotABit(pos));
        }
        Ok(Self { bits })
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![0; len] }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self { bits: (0..len).map(|_| rng.gen_range(0..2u8)).collect() }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// `J(x)`: each coordinate written MSB-first in ⌈log₂ q⌉ bits, blocks in index order.
pub fn j_encode(x: &ZqVector) -> BitString {
    let w = x.modulus.bits as usize;
    let mut bits = Vec::with_capacity(w * x.len());
    for &v in &x.entries {
        for i in (0..w).rev() {
            bits.push(((v >> i) & 1) as u8);
        }
    }
    BitString { bits }
}

/// Inverse of [`j_encode`] for an `n`-coordinate vector.
pub fn j_decode(d: &BitString, modulus: Modulus, n: usize) -> Result<ZqVector, ZqError> {
    let w = modulus.bits as usize;
    if d.len() != n * w {
        return Err(ZqError::Dimension { expected: n * w, got: d.len() });
    }
    let mut entries = Vec::with_capacity(n);
    for (block, chunk) in d.bits.chunks(w.max(1)).enumerate().take(n) {
        let value = chunk.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        if value >= modulus.q as u64 {
            return Err(ZqError::BlockOverflow { block, value, q: modulus.q });
        }
        entries.push(value as u32);
    }
    Ok(ZqVector { entries, modulus })
}

/// `Σ d_i (u_i ⊕ v_i) mod 2`.
pub fn bit_dot_xor(d: &BitString, u: &BitString, v: &BitString) -> Result<u8, ZqError> {
    if u.len() != d.len() {
        return Err(ZqError::Dimension { expected: d.len(), got: u.len() });
    }
    if v.len() != d.len() {
        return Err(ZqError::Dimension { expected: d.len(), got: v.len() });
    }
    Ok(d.bits.iter().zip(&u.bits).zip(&v.bits).fold(0u8, |acc, ((&di, &ui), &vi)| acc ^ (di & (ui ^ vi))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(v: u64) -> Modulus {
        Modulus::new_composite(v).unwrap()
    }

    fn vec_of(vals: &[u32], m: Modulus) -> ZqVector {
        ZqVector::new(vals.to_vec(), m).unwrap()
    }

    #[test]
    fn modulus_rejects_composites_and_counts_bits() {
        assert!(Modulus::new(8).is_err());
        assert!(Modulus::new(1).is_err());
        assert!(Modulus::new(1 << 31).is_err());
        let m = Modulus::new(521).unwrap();
        assert_eq!(m.bits(), 10);
        assert_eq!(Modulus::new(7).unwrap().bits(), 3);
        assert_eq!(q(8).bits(), 3);
        assert_eq!(q(9).bits(), 4);
        assert_eq!(Modulus::new(2).unwrap().bits(), 1);
    }

    #[test]
    fn mat_vec_mul_examples() {
        let m7 = Modulus::new(7).unwrap();
        let a = ZqMatrix::new(1, 2, vec![2, 3], m7).unwrap();
        assert_eq!(mat_vec_mul(&a, &vec_of(&[3, 4], m7)).unwrap().entries(), &[4]);

        let x = vec_of(&[1, 5, 6], m7);
        assert_eq!(mat_vec_mul(&ZqMatrix::identity(3, m7), &x).unwrap(), x);
        assert!(mat_vec_mul(&ZqMatrix::zero(2, 3, m7), &x).unwrap().is_zero());
        assert_eq!(mat_vec_mul(&a, &x), Err(ZqError::Dimension { expected: 2, got: 3 }));
    }

    #[test]
    fn lift_and_norm_examples() {
        assert_eq!(vec_of(&[6], q(7)).centered_lift(), vec![-1]);
        assert_eq!(vec_of(&[4], q(8)).centered_lift(), vec![4]);
        assert_eq!(vec_of(&[0, 0, 0], q(7)).centered_lift(), vec![0, 0, 0]);
        assert_eq!(ZqVector::zero(4, q(7)).euclidean_norm(), 0.0);
        assert!((vec_of(&[6, 1], q(7)).euclidean_norm() - 2f64.sqrt()).abs() < 1e-15);
        assert!((vec_of(&[5, 12], q(13)).euclidean_norm() - 26f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lift_is_a_bijection_onto_the_half_open_interval() {
        for qq in [2u64, 7, 8, 13, 16] {
            let m = q(qq);
            let mut seen: Vec<i64> = (0..qq as u32).map(|a| m.lift(a)).collect();
            seen.sort_unstable();
            let lo = -((qq as i64 - 1) / 2);
            let expected: Vec<i64> = (lo..lo + qq as i64).collect();
            assert_eq!(seen, expected, "q = {qq}");
            for a in 0..qq as u32 {
                assert_eq!(m.reduce(m.lift(a)), a);
            }
        }
    }

    #[test]
    fn j_examples() {
        assert_eq!(j_encode(&vec_of(&[5], q(8))).bits(), &[1, 0, 1]);
        assert!(j_encode(&ZqVector::zero(3, q(13))).is_zero());
        let bad = BitString::new(vec![1, 1, 1, 1]).unwrap();
        assert!(matches!(j_decode(&bad, q(13), 1), Err(ZqError::BlockOverflow { .. })));
    }

    #[test]
    fn j_round_trip_exhaustive_small_moduli() {
        for qq in 2..=16u64 {
            let m = q(qq);
            for n in 1..=2usize {
                let total = (qq as usize).pow(n as u32);
                for idx in 0..total {
                    let vals: Vec<u32> =
                        (0..n).map(|j| ((idx / (qq as usize).pow(j as u32)) % qq as usize) as u32).collect();
                    let x = vec_of(&vals, m);
                    let enc = j_encode(&x);
                    assert_eq!(enc.len(), n * m.bits() as usize);
                    assert_eq!(j_decode(&enc, m, n).unwrap(), x);
                }
            }
        }
    }

    #[test]
    fn bit_dot_xor_examples() {
        let b = |v: &[u8]| BitString::new(v.to_vec()).unwrap();
        assert_eq!(bit_dot_xor(&b(&[1, 1, 0]), &b(&[1, 0, 1]), &b(&[0, 0, 1])).unwrap(), 1);
        assert_eq!(bit_dot_xor(&b(&[0, 0, 0]), &b(&[1, 0, 1]), &b(&[0, 1, 1])).unwrap(), 0);
        assert_eq!(bit_dot_xor(&b(&[1, 1, 1]), &b(&[1, 0, 1]), &b(&[1, 0, 1])).unwrap(), 0);
        assert!(bit_dot_xor(&b(&[1, 1]), &b(&[1, 0, 1]), &b(&[1, 0, 1])).is_err());
    }

    #[test]
    fn inverse_mod_prime() {
        let m = Modulus::new(521).unwrap();
        for a in 1..521 {
            assert_eq!(m.mul(a, m.inv(a).unwrap()), 1);
        }
        assert_eq!(m.inv(0), None);
    }

    proptest! {
        #[test]
        fn mat_vec_mul_is_linear(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6) {
            let m = Modulus::new(521).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = ZqMatrix::random(rows, cols, m, &mut rng);
            let x = ZqVector::random(cols, m, &mut rng);
            let y = ZqVector::random(cols, m, &mut rng);
            let lhs = mat_vec_mul(&a, &x.add(&y).unwrap()).unwrap();
            let rhs = mat_vec_mul(&a, &x).unwrap().add(&mat_vec_mul(&a, &y).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn norm_is_negation_invariant_off_the_boundary(vals in proptest::collection::vec(0u32..13, 1..8)) {
            let m = q(13);
            let x = vec_of(&vals, m);
            prop_assert_eq!(x.norm_sq(), x.neg().norm_sq());
        }

        #[test]
        fn j_round_trip(vals in proptest::collection::vec(0u32..521, 1..5)) {
            let m = Modulus::new(521).unwrap();
            let x = vec_of(&vals, m);
            prop_assert_eq!(j_decode(&j_encode(&x), m, x.len()).unwrap(), x);
        }
    }
}
