//! Gadget trapdoors: `GenTrap` and `Invert` for LWE samples `v = As + e`.
//!
//! Layout (m × n, tall): the first `n̄ = m − n·k` rows are a uniform block
//! `Ā`, the remaining `n·k` rows are `G − R̄·Ā` with `R̄ ∈ {−1,0,1}^{nk × n̄}`
//! and `G` the gadget block whose row `j·k + i` is `base^i · e_j`. Then
//! `v_bot + R̄·v_top = G·s + (e_bot + R̄·e_top)`, and each coordinate of `s`
//! is decoded from its `k` noisy multiples `base^i·s_j`.
//!
//! For moduli too small for the gadget block, an exhaustive layout decodes
//! by nearest-vector search within half the minimum distance of the q-ary
//! lattice generated by `A`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::codec::{CodecError, TextReader, TextWriter};
use crate::zq::{mat_vec_mul, Modulus, ZqError, ZqMatrix, ZqVector};

pub const DEFAULT_GADGET_BASE: u32 = 2;

/// Largest `q^n` searched by exhaustive decoding.
pub const EXHAUSTIVE_CAP: u64 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrapdoorError {
    #[error("m = {m} is too small for the gadget layout: need at least {required} rows")]
    TooFewRows { m: usize, required: usize },
    #[error("gadget base must be at least 2, got {0}")]
    BadBase(u32),
    #[error("q^n = {size} exceeds the exhaustive-search cap {cap}")]
    SearchTooLarge { size: u128, cap: u64 },
    #[error("decode failure at coordinate {coordinate}: {reason}")]
    DecodeFailure { coordinate: usize, reason: String },
    #[error("input has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    Zq(#[from] ZqError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Digit expansion parameters of the gadget block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GadgetParams {
    base: u32,
    digits: usize,
}

impl GadgetParams {
    pub fn new(base: u32, modulus: Modulus) -> Result<Self, TrapdoorError> {
        if base < 2 {
            return Err(TrapdoorError::BadBase(base));
        }
        let mut digits = 1;
        let mut pow = base as u64;
        while pow < modulus.q() as u64 {
            pow *= base as u64;
            digits += 1;
        }
        Ok(Self { base, digits })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn digits(&self) -> usize {
        self.digits
    }

    /// `(1, base, base², …) mod q`.
    pub fn row(&self, modulus: Modulus) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.digits);
        let mut p = 1 % modulus.q();
        for _ in 0..self.digits {
            out.push(p);
            p = modulus.mul(p, self.base);
        }
        out
    }

    /// Per-row syndrome error bound `⌊(q−1)/(4·base)⌋` under which a digit
    /// decode is guaranteed correct and unique.
    pub fn decode_bound(&self, modulus: Modulus) -> u64 {
        (modulus.q() as u64 - 1) / (4 * self.base as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Gadget {
        gadget: GadgetParams,
        n_bar: usize,
        /// `(n·k) × n̄` row-major entries of `R̄`.
        r: Vec<i8>,
    },
    Exhaustive {
        /// Squared minimum distance of the q-ary lattice `{Ax}`.
        min_distance_sq: u64,
    },
}

/// Trapdoor for a matrix `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapdoorKey {
    a: ZqMatrix,
    layout: Layout,
}

/// Fewest rows the gadget layout accepts: `n·k` gadget rows plus `n̄ ≥ n`.
pub fn min_gadget_rows(n: usize, modulus: Modulus, base: u32) -> Result<usize, TrapdoorError> {
    Ok(n * GadgetParams::new(base, modulus)?.digits() + n)
}

pub fn gen_trap<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    modulus: Modulus,
    rng: &mut R,
) -> Result<(ZqMatrix, TrapdoorKey), TrapdoorError> {
    gen_trap_with_base(n, m, modulus, DEFAULT_GADGET_BASE, rng)
}

pub fn gen_trap_with_base<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    modulus: Modulus,
    base: u32,
    rng: &mut R,
) -> Result<(ZqMatrix, TrapdoorKey), TrapdoorError> {
    let gadget = GadgetParams::new(base, modulus)?;
    let required = min_gadget_rows(n, modulus, base)?;
    if m < required {
        return Err(TrapdoorError::TooFewRows { m, required });
    }
    let k = gadget.digits();
    let n_bar = m - n * k;
    let a_bar = ZqMatrix::random(n_bar, n, modulus, rng);
    let r: Vec<i8> = (0..n * k * n_bar).map(|_| rng.gen_range(-1i8..=1)).collect();
    let g_row = gadget.row(modulus);

    let mut a = ZqMatrix::zero(m, n, modulus);
    for i in 0..n_bar {
        for j in 0..n {
            a.set(i, j, a_bar.get(i, j));
        }
    }
    for row in 0..n * k {
        let (coord, digit) = (row / k, row % k);
        for j in 0..n {
            // (R̄·Ā)[row][j]
            let mut acc: i64 = 0;
            for c in 0..n_bar {
                acc += r[row * n_bar + c] as i64 * a_bar.get(c, j) as i64;
            }
            let g = if j == coord { g_row[digit] as i64 } else { 0 };
            a.set(n_bar + row, j, modulus.reduce(g - acc));
        }
    }
    let key = TrapdoorKey { a: a.clone(), layout: Layout::Gadget { gadget, n_bar, r } };
    Ok((a, key))
}

/// Uniform `A` whose trapdoor is exhaustive bounded-distance decoding.
pub fn gen_trap_exhaustive<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    modulus: Modulus,
    rng: &mut R,
) -> Result<(ZqMatrix, TrapdoorKey), TrapdoorError> {
    search_size(n, modulus)?;
    loop {
        let a = ZqMatrix::random(m, n, modulus, rng);
        let min_distance_sq = lattice_min_distance_sq(&a)?;
        // A zero distance means A has a kernel and nothing decodes uniquely.
        if min_distance_sq > 0 {
            let key = TrapdoorKey { a: a.clone(), layout: Layout::Exhaustive { min_distance_sq } };
            return Ok((a, key));
        }
    }
}

fn search_size(n: usize, modulus: Modulus) -> Result<u64, TrapdoorError> {
    let size = (modulus.q() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > EXHAUSTIVE_CAP as u128 {
        return Err(TrapdoorError::SearchTooLarge { size, cap: EXHAUSTIVE_CAP });
    }
    Ok(size as u64)
}

/// Visits every `x ∈ Z_q^n` in odometer order.
pub fn for_each_vector(n: usize, q: u32, mut f: impl FnMut(&[u32])) {
    let mut x = vec![0u32; n];
    loop {
        f(&x);
        let mut j = 0;
        loop {
            if j == n {
                return;
            }
            x[j] += 1;
            if x[j] < q {
                break;
            }
            x[j] = 0;
            j += 1;
        }
    }
}

/// Squared centered norm of `z − A·x`, abandoning once it exceeds `limit`.
/// Returns `None` when abandoned.
pub fn residual_norm_sq_within(a: &ZqMatrix, z: &[u32], x: &[u32], limit: u64) -> Option<u64> {
    let m = a.modulus();
    let q = m.q() as u64;
    let mut acc = 0u64;
    for (i, &zi) in z.iter().enumerate() {
        let ax = a.row(i).iter().zip(x).fold(0u64, |s, (&aij, &xj)| (s + aij as u64 * xj as u64) % q);
        let l = m.lift(m.sub(zi, ax as u32));
        acc += (l * l) as u64;
        if acc > limit {
            return None;
        }
    }
    Some(acc)
}

/// `min_{x ≠ 0} ‖A·x‖²` by exhaustive search.
pub fn lattice_min_distance_sq(a: &ZqMatrix) -> Result<u64, TrapdoorError> {
    search_size(a.cols(), a.modulus())?;
    let zero = vec![0u32; a.rows()];
    let mut best = u64::MAX;
    for_each_vector(a.cols(), a.modulus().q(), |x| {
        if x.iter().any(|&v| v != 0) {
            if let Some(d) = residual_norm_sq_within(a, &zero, x, best) {
                best = best.min(d);
            }
        }
    });
    Ok(best)
}

impl TrapdoorKey {
    pub fn matrix(&self) -> &ZqMatrix {
        &self.a
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Checks `A_bot + R̄·A_top ≡ G (mod q)` for gadget keys and the stored
    /// minimum distance for exhaustive keys.
    pub fn verify_relation(&self) -> bool {
        let modulus = self.a.modulus();
        let n = self.a.cols();
        match &self.layout {
            Layout::Gadget { gadget, n_bar, r } => {
                let k = gadget.digits();
                if self.a.rows() != n_bar + n * k || r.len() != n * k * n_bar {
                    return false;
                }
                if r.iter().any(|v| !(-1..=1).contains(v)) {
                    return false;
                }
                let g_row = gadget.row(modulus);
                (0..n * k).all(|row| {
                    (0..n).all(|j| {
                        let mut acc = self.a.get(n_bar + row, j) as i64;
                        for c in 0..*n_bar {
                            acc += r[row * n_bar + c] as i64 * self.a.get(c, j) as i64;
                        }
                        let g = if j == row / k { g_row[row % k] } else { 0 };
                        modulus.reduce(acc) == g
                    })
                })
            }
            Layout::Exhaustive { min_distance_sq } => lattice_min_distance_sq(&self.a) == Ok(*min_distance_sq),
        }
    }

    /// An ℓ₂ radius within which every error decodes: `β / max_r √(1 + ‖R̄_r‖²)`
    /// for gadget keys (Cauchy–Schwarz on the syndrome rows), `λ₁/2` otherwise.
    pub fn guaranteed_radius(&self) -> f64 {
        match &self.layout {
            Layout::Gadget { gadget, n_bar, r } => {
                let beta = gadget.decode_bound(self.a.modulus()) as f64;
                let worst = r
                    .chunks(*n_bar.max(&1))
                    .map(|row| row.iter().map(|&v| (v as i64 * v as i64) as f64).sum::<f64>())
                    .fold(0.0, f64::max);
                beta / (1.0 + worst).sqrt()
            }
            Layout::Exhaustive { min_distance_sq } => (*min_distance_sq as f64).sqrt() / 2.0,
        }
    }

    pub fn write_text(&self, w: &mut TextWriter) {
        w.matrix("A", self.a.rows(), self.a.cols(), self.a.data());
        match &self.layout {
            Layout::Gadget { gadget, n_bar, r } => {
                w.field("layout", "gadget");
                w.field("base", gadget.base());
                w.field("n_bar", n_bar);
                w.matrix("R", self.a.cols() * gadget.digits(), *n_bar, r);
            }
            Layout::Exhaustive { min_distance_sq } => {
                w.field("layout", "exhaustive");
                w.field("min_distance_sq", min_distance_sq);
            }
        }
    }

    pub fn read_text(r: &mut TextReader<'_>, modulus: Modulus) -> Result<Self, TrapdoorError> {
        let (rows, cols, data) = r.matrix::<u32>("A")?;
        let a = ZqMatrix::new(rows, cols, data, modulus)?;
        let layout = match r.field("layout")? {
            "gadget" => {
                let base: u32 = r.parse("base")?;
                let gadget = GadgetParams::new(base, modulus)?;
                let n_bar: usize = r.parse("n_bar")?;
                let (rr, rc, entries) = r.matrix::<i8>("R")?;
                if rr != cols * gadget.digits() || rc != n_bar {
                    return Err(r.error("R has the wrong shape").into());
                }
                Layout::Gadget { gadget, n_bar, r: entries }
            }
            "exhaustive" => Layout::Exhaustive { min_distance_sq: r.parse("min_distance_sq")? },
            other => return Err(r.error(format!("unknown layout `{other}`")).into()),
        };
        let key = Self { a, layout };
        if !key.verify_relation() {
            return Err(r.error("trapdoor relation does not hold").into());
        }
        Ok(key)
    }
}

/// Recovers `(s, e)` from `v = A·s + e`. Any returned pair satisfies
/// `A·s + e = v` and lies within the layout's decoding region; noise outside
/// it yields an error rather than a guess.
pub fn invert(t: &TrapdoorKey, v: &ZqVector) -> Result<(ZqVector, ZqVector), TrapdoorError> {
    let a = &t.a;
    if v.len() != a.rows() {
        return Err(TrapdoorError::Length { expected: a.rows(), got: v.len() });
    }
    let s = match &t.layout {
        Layout::Gadget { gadget, n_bar, r } => decode_gadget(a, *gadget, *n_bar, r, v)?,
        Layout::Exhaustive { min_distance_sq } => decode_exhaustive(a, *min_distance_sq, v)?,
    };
    let e = v.sub(&mat_vec_mul(a, &s)?)?;
    Ok((s, e))
}

fn decode_gadget(
    a: &ZqMatrix,
    gadget: GadgetParams,
    n_bar: usize,
    r: &[i8],
    v: &ZqVector,
) -> Result<ZqVector, TrapdoorError> {
    let modulus = a.modulus();
    let n = a.cols();
    let k = gadget.digits();
    let vals = v.entries();
    let (top, bottom) = vals.split_at(n_bar);
    let syndrome: Vec<u32> = (0..n * k)
        .map(|row| {
            let mut acc = bottom[row] as i64;
            for (c, &tc) in top.iter().enumerate() {
                acc += r[row * n_bar + c] as i64 * tc as i64;
            }
            modulus.reduce(acc)
        })
        .collect();
    let beta = gadget.decode_bound(modulus);
    let g_row = gadget.row(modulus);
    let mut s = Vec::with_capacity(n);
    for j in 0..n {
        let w = &syndrome[j * k..(j + 1) * k];
        let sj = decode_digits(w, gadget.base(), modulus)
            .map_err(|reason| TrapdoorError::DecodeFailure { coordinate: j, reason })?;
        for (i, &wi) in w.iter().enumerate() {
            let err = modulus.lift(modulus.sub(wi, modulus.mul(g_row[i], sj)));
            if err.unsigned_abs() > beta {
                return Err(TrapdoorError::DecodeFailure {
                    coordinate: j,
                    reason: format!("syndrome row {i} misses by {err}, bound is {beta}"),
                });
            }
        }
        s.push(sj);
    }
    Ok(ZqVector::new(s, modulus)?)
}

/// Recovers `x` from noisy `w_i ≈ base^i·x (mod q)`, reading the phase
/// `x/q` one base-digit at a time from the finest row down.
fn decode_digits(w: &[u32], base: u32, modulus: Modulus) -> Result<u32, String> {
    let q = modulus.q() as f64;
    let b = base as f64;
    let circ = |d: f64| {
        let f = d.rem_euclid(1.0);
        f.min(1.0 - f)
    };
    let mut phase = w[w.len() - 1] as f64 / q;
    for i in (0..w.len() - 1).rev() {
        let target = w[i] as f64 / q;
        let (best, dist) = (0..base)
            .map(|j| {
                let c = (phase + j as f64) / b;
                (c, circ(c - target))
            })
            .fold((0.0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
        if dist >= 0.5 / b {
            return Err(format!("digit {i} is ambiguous"));
        }
        phase = best;
    }
    Ok(((phase * q).round() as u64 % modulus.q() as u64) as u32)
}

fn decode_exhaustive(a: &ZqMatrix, min_distance_sq: u64, v: &ZqVector) -> Result<ZqVector, TrapdoorError> {
    let mut best: Option<(u64, Vec<u32>)> = None;
    let mut limit = u64::MAX;
    for_each_vector(a.cols(), a.modulus().q(), |x| {
        if let Some(d) = residual_norm_sq_within(a, v.entries(), x, limit) {
            if d < limit {
                limit = d;
                best = Some((d, x.to_vec()));
            }
        }
    });
    let (d, x) = best.expect("search space is non-empty");
    // Unique only strictly inside half the minimum distance.
    if 4 * d >= min_distance_sq {
        return Err(TrapdoorError::DecodeFailure {
            coordinate: 0,
            reason: format!("nearest point at squared distance {d} is not within λ₁/2 (λ₁² = {min_distance_sq})"),
        });
    }
    Ok(ZqVector::new(x, a.modulus())?)
}

/// Result of [`calibrate_ct`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// `q / (threshold · √(n·⌈log₂ q⌉))`.
    pub c_t: f64,
    /// Largest error norm decoded in every trial.
    pub threshold_norm: f64,
    pub trials: usize,
}

/// Measures the smallest constant `C` such that every trial decodes all
/// errors of norm up to `q/(C·√(n·⌈log₂ q⌉))`. Each trial draws a fresh key
/// and a random error direction, then bisects on the error norm.
pub fn calibrate_ct<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    modulus: Modulus,
    trials: usize,
    rng: &mut R,
) -> Result<Calibration, TrapdoorError> {
    let trials = trials.max(100);
    let mut threshold = f64::INFINITY;
    for _ in 0..trials {
        let (a, key) = gen_trap(n, m, modulus, rng)?;
        let s = ZqVector::random(n, modulus, rng);
        let u: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let len = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let base = mat_vec_mul(&a, &s)?;
        let decodes = |rho: f64| -> bool {
            let e: Vec<i64> = u.iter().map(|x| (rho * x / len).round() as i64).collect();
            let e = ZqVector::from_signed(&e, modulus);
            let v = base.add(&e).expect("same shape");
            matches!(invert(&key, &v), Ok((s2, e2)) if s2 == s && e2 == e)
        };
        let (mut lo, mut hi) = (0.0f64, modulus.q() as f64 * (m as f64).sqrt());
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if decodes(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        threshold = threshold.min(lo);
    }
    let logq = modulus.bits() as f64;
    Ok(Calibration {
        c_t: modulus.q() as f64 / (threshold * (n as f64 * logq).sqrt()),
        threshold_norm: threshold,
        trials,
    })
}
