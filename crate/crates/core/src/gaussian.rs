//! Truncated discrete Gaussians over Z_q^m and the statistical-distance
//! toolbox used to check the Hellinger bounds.
//!
//! The one-dimensional factor is `e^{−π x²/B²}` restricted to centered lifts
//! with `|x| ≤ B`; the m-dimensional density is the product of normalized
//! factors, further restricted to the ball `‖x‖ ≤ B√m` and renormalized.
//! Every point of the box `[−B, B]^m` already lies in that ball, so the
//! intersection is the box itself and the product is exactly normalized.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::zq::{Modulus, ZqVector};

/// Largest exact table materialized by default.
pub const DEFAULT_TABLE_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("Gaussian width must be positive and finite, got {0}")]
    BadWidth(f64),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("exact table would hold {size} points, above the cap of {cap}")]
    TableTooLarge { size: u128, cap: usize },
    #[error("squared Hellinger distance {0} is outside [0, 1]")]
    H2OutOfRange(f64),
}

/// Compensated summation.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// `D_{Z_q^m, B}` with exact point evaluation and seeded sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGaussian {
    modulus: Modulus,
    width: f64,
    dim: usize,
    /// Centered lifts in the 1-D support, ascending.
    lifts: Vec<i64>,
    /// Normalized 1-D probabilities aligned with `lifts`.
    probs: Vec<f64>,
    cdf: Vec<f64>,
    /// 1-D probability indexed by residue; zero off the support.
    by_residue: Vec<f64>,
}

impl TruncatedGaussian {
    pub fn new(modulus: Modulus, width: f64, dim: usize) -> Result<Self, GaussianError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(GaussianError::BadWidth(width));
        }
        if dim == 0 {
            return Err(GaussianError::ZeroDimension);
        }
        let q = modulus.q() as i64;
        let lo = -((q - 1) / 2);
        let lifts: Vec<i64> = (lo..=q / 2).filter(|&x| (x.abs() as f64) <= width).collect();
        let weights: Vec<f64> =
            lifts.iter().map(|&x| (-std::f64::consts::PI * (x * x) as f64 / (width * width)).exp()).collect();
        let z = kahan_sum(weights.iter().copied());
        let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        let mut by_residue = vec![0.0; modulus.q() as usize];
        for (&x, &p) in lifts.iter().zip(&probs) {
            by_residue[modulus.reduce(x) as usize] = p;
        }
        Ok(Self { modulus, width, dim, lifts, probs, cdf, by_residue })
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(lift, probability)` pairs of the 1-D factor.
    pub fn coordinate_table(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.lifts.iter().copied().zip(self.probs.iter().copied())
    }

    /// Largest |lift| in the 1-D support.
    pub fn coordinate_bound(&self) -> u64 {
        self.lifts.last().map_or(0, |&x| x.unsigned_abs())
    }

    /// 1-D probability of residue `r`.
    pub fn coordinate_prob(&self, r: u32) -> f64 {
        self.by_residue[r as usize]
    }

    /// Whether residue `r` lies in the 1-D support.
    pub fn coordinate_in_support(&self, r: u32) -> bool {
        self.by_residue[r as usize] > 0.0
    }

    /// `(B√m)²`.
    pub fn ball_radius_sq(&self) -> f64 {
        self.width * self.width * self.dim as f64
    }

    pub fn contains(&self, x: &ZqVector) -> bool {
        x.len() == self.dim && x.entries().iter().all(|&r| self.coordinate_in_support(r))
    }

    /// Density at `x`; zero off the support or on a length mismatch.
    pub fn density_eval(&self, x: &ZqVector) -> f64 {
        if x.len() != self.dim || x.modulus() != self.modulus {
            return 0.0;
        }
        self.density_of_residues(x.entries())
    }

    pub fn density_of_residues(&self, residues: &[u32]) -> f64 {
        residues.iter().map(|&r| self.by_residue[r as usize]).product()
    }

    /// Inverse-CDF sampling, one coordinate at a time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ZqVector {
        let entries = (0..self.dim)
            .map(|_| {
                let u: f64 = rng.gen();
                let idx = self.cdf.partition_point(|&c| c <= u).min(self.lifts.len() - 1);
                self.modulus.reduce(self.lifts[idx])
            })
            .collect();
        ZqVector::new(entries, self.modulus).expect("residues are reduced")
    }

    /// Number of support points, `|1-D support|^m`.
    pub fn support_size(&self) -> u128 {
        (self.lifts.len() as u128).checked_pow(self.dim as u32).unwrap_or(u128::MAX)
    }

    /// Exact density table, refused above `cap` points.
    pub fn table(&self, cap: usize) -> Result<Density, GaussianError> {
        self.shifted_table(&vec![0; self.dim], cap)
    }

    fn shifted_table(&self, shift: &[u32], cap: usize) -> Result<Density, GaussianError> {
        let size = self.support_size();
        if size > cap as u128 {
            return Err(GaussianError::TableTooLarge { size, cap });
        }
        let k = self.lifts.len();
        let mut idx = vec![0usize; self.dim];
        let mut map = BTreeMap::new();
        loop {
            let point: Vec<u32> =
                idx.iter().zip(shift).map(|(&i, &s)| self.modulus.add(self.modulus.reduce(self.lifts[i]), s)).collect();
            let p: f64 = idx.iter().map(|&i| self.probs[i]).product();
            map.insert(point, p);
            let mut j = 0;
            loop {
                if j == self.dim {
                    return Ok(Density { map });
                }
                idx[j] += 1;
                if idx[j] < k {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }

    /// Table of `D + shift`, i.e. `x ↦ D(x − shift)`.
    pub fn shifted_density(&self, shift: &ZqVector, cap: usize) -> Result<Density, GaussianError> {
        if shift.len() != self.dim {
            return Err(GaussianError::Dimension { expected: self.dim, got: shift.len() });
        }
        self.shifted_table(shift.entries(), cap)
    }
}

/// A finite probability table keyed by residue tuples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Density {
    map: BTreeMap<Vec<u32>, f64>,
}

impl Density {
    /// Builds a table from raw pairs, summing duplicates and dropping zeros.
    pub fn from_pairs<I: IntoIterator<Item = (Vec<u32>, f64)>>(pairs: I) -> Self {
        let mut map: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (k, v) in pairs {
            *map.entry(k).or_insert(0.0) += v;
        }
        map.retain(|_, v| *v != 0.0);
        Self { map }
    }

    pub fn prob(&self, point: &[u32]) -> f64 {
        self.map.get(point).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        kahan_sum(self.map.values().copied())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> + '_ {
        self.map.iter().map(|(k, &v)| (k, v))
    }

    /// Point of maximal probability (first in lexicographic order on ties).
    pub fn mode(&self) -> Option<&Vec<u32>> {
        let mut best: Option<(&Vec<u32>, f64)> = None;
        for (k, &v) in &self.map {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        best.map(|(k, _)| k)
    }

    /// `point -> probability` lines in lexicographic point order.
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            let point: Vec<String> = k.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{} -> {v}", point.join(" "));
        }
        out
    }
}

/// `H²(f₀, f₁) = 1 − Σ √(f₀ f₁)`.
pub fn hellinger_sq(f0: &Density, f1: &Density) -> f64 {
    if f0.map == f1.map {
        return 0.0;
    }
    let overlap = kahan_sum(f0.map.iter().filter_map(|(k, &a)| f1.map.get(k).map(|&b| (a * b).sqrt())));
    (1.0 - overlap).clamp(0.0, 1.0)
}

/// `½ Σ |f₀ − f₁|`.
pub fn tv_distance(f0: &Density, f1: &Density) -> f64 {
    let left = f0.map.iter().map(|(k, &a)| (a - f1.prob(k)).abs());
    let right = f1.map.iter().filter(|(k, _)| !f0.map.contains_key(*k)).map(|(_, &b)| b);
    (0.5 * kahan_sum(left.chain(right))).clamp(0.0, 1.0)
}

/// Trace distance between the two superpositions with squared Hellinger
/// distance `h2`: `√(1 − (1 − h2)²)`.
pub fn trace_distance_from_h2(h2: f64) -> Result<f64, GaussianError> {
    if !(0.0..=1.0).contains(&h2) {
        return Err(GaussianError::H2OutOfRange(h2));
    }
    let overlap = 1.0 - h2;
    Ok((1.0 - overlap * overlap).max(0.0).sqrt())
}

/// `1 − e^{−2π√m‖e‖/B}`, the bound on `H²(D, D + e)` for `‖e‖ ≤ B√m`.
pub fn hellinger_shift_bound(width: f64, m: usize, shift_norm: f64) -> f64 {
    1.0 - (-2.0 * std::f64::consts::PI * (m as f64).sqrt() * shift_norm / width).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(v: u64) -> Modulus {
        Modulus::new(v).unwrap()
    }

    fn point_mass(p: Vec<u32>) -> Density {
        Density::from_pairs([(p, 1.0)])
    }

    #[test]
    fn one_dimensional_table_at_q7_b1() {
        let g = TruncatedGaussian::new(q(7), 1.0, 1).unwrap();
        let table: Vec<(i64, f64)> = g.coordinate_table().collect();
        let ep = (-std::f64::consts::PI).exp();
        let z = 1.0 + 2.0 * ep;
        assert_eq!(table.iter().map(|t| t.0).collect::<Vec<_>>(), vec![-1, 0, 1]);
        assert!((table[0].1 - ep / z).abs() < 1e-15);
        assert!((table[1].1 - 1.0 / z).abs() < 1e-15);
        assert!((table[2].1 - ep / z).abs() < 1e-15);
    }

    #[test]
    fn support_and_normalization() {
        let g = TruncatedGaussian::new(q(97), 5.0, 2).unwrap();
        let t = g.table(DEFAULT_TABLE_CAP).unwrap();
        assert_eq!(t.len(), 121);
        assert!((t.total() - 1.0).abs() < 1e-12);
        for (p, _) in t.iter() {
            let v = ZqVector::new(p.clone(), q(97)).unwrap();
            assert!(v.norm_sq() as f64 <= g.ball_radius_sq());
        }
        let outside = ZqVector::new(vec![6, 0], q(97)).unwrap();
        assert_eq!(g.density_eval(&outside), 0.0);

        let wide = TruncatedGaussian::new(q(7), 10.0, 1).unwrap();
        let tw = wide.table(DEFAULT_TABLE_CAP).unwrap();
        assert_eq!(tw.len(), 7);
        assert_eq!(tw.mode(), Some(&vec![0]));
    }

    #[test]
    fn narrow_width_pins_zero() {
        let g = TruncatedGaussian::new(q(521), 0.3, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(g.sample(&mut rng).is_zero());
        }
    }

    #[test]
    fn sampling_matches_the_table() {
        let g = TruncatedGaussian::new(q(7), 1.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let zeros = (0..draws).filter(|_| g.sample(&mut rng).is_zero()).count();
        let expected = g.coordinate_prob(0);
        assert!((zeros as f64 / draws as f64 - expected).abs() < 0.01);
    }

    #[test]
    fn sampling_is_deterministic_under_a_seed() {
        let g = TruncatedGaussian::new(q(521), 4.0, 10).unwrap();
        let a: Vec<_> = {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            (0..20).map(|_| g.sample(&mut rng)).collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b: Vec<_> = (0..20).map(|_| g.sample(&mut rng)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distance_examples() {
        let uniform = Density::from_pairs([(vec![0], 0.5), (vec![1], 0.5)]);
        let at0 = point_mass(vec![0]);
        assert!((hellinger_sq(&uniform, &at0) - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
        assert!((tv_distance(&uniform, &at0) - 0.5).abs() < 1e-15);
        assert_eq!(hellinger_sq(&at0, &at0), 0.0);
        assert_eq!(hellinger_sq(&at0, &point_mass(vec![1])), 1.0);
        assert_eq!(tv_distance(&at0, &point_mass(vec![1])), 1.0);
        assert_eq!(tv_distance(&uniform, &uniform), 0.0);
    }

    #[test]
    fn trace_distance_examples() {
        assert_eq!(trace_distance_from_h2(0.0).unwrap(), 0.0);
        assert_eq!(trace_distance_from_h2(1.0).unwrap(), 1.0);
        assert!((trace_distance_from_h2(0.5).unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(trace_distance_from_h2(1.5).is_err());
        assert!(trace_distance_from_h2(-0.1).is_err());
    }

    #[test]
    fn shifts_relocate_the_mode_and_compose() {
        let m97 = q(97);
        let g = TruncatedGaussian::new(m97, 5.0, 2).unwrap();
        let zero = ZqVector::zero(2, m97);
        assert_eq!(g.shifted_density(&zero, DEFAULT_TABLE_CAP).unwrap(), g.table(DEFAULT_TABLE_CAP).unwrap());
        let e = ZqVector::from_signed(&[3, -2], m97);
        let shifted = g.shifted_density(&e, DEFAULT_TABLE_CAP).unwrap();
        assert_eq!(shifted.mode(), Some(&e.entries().to_vec()));
        // Shifting the shifted table back by −e gives the original.
        let back = Density::from_pairs(
            shifted
                .iter()
                .map(|(p, v)| (ZqVector::new(p.clone(), m97).unwrap().sub(&e).unwrap().entries().to_vec(), v)),
        );
        assert!(tv_distance(&back, &g.table(DEFAULT_TABLE_CAP).unwrap()) < 1e-15);
    }

    #[test]
    fn shift_bound_basics() {
        assert_eq!(hellinger_shift_bound(5.0, 2, 0.0), 0.0);
        let mut prev = 0.0;
        for i in 1..50 {
            let b = hellinger_shift_bound(5.0, 2, i as f64 * 0.1);
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn table_cap_is_enforced() {
        let g = TruncatedGaussian::new(q(521), 5.0, 40).unwrap();
        assert!(matches!(g.table(DEFAULT_TABLE_CAP), Err(GaussianError::TableTooLarge { .. })));
    }

    #[test]
    fn canonical_text_is_sorted() {
        let g = TruncatedGaussian::new(q(7), 1.0, 1).unwrap();
        let text = g.table(DEFAULT_TABLE_CAP).unwrap().to_canonical_text();
        let points: Vec<&str> = text.lines().map(|l| l.split(" -> ").next().unwrap()).collect();
        assert_eq!(points, vec!["0", "1", "6"]);
    }
}
