//! Honest quantum prover as an analytic sampler, plus classical cheaters.
//!
//! After `Y` is measured the prover's `BX` register holds
//! `Σ_{b,x} √D_{B_P}(ỹ − Ax − b·t) |b⟩|x⟩` (normalized). [`exact_residual`]
//! computes that support by scanning every `(b, x)` with public data only.
//! When `B_P/B_V` is small the exact residual is generally not a clean claw;
//! [`idealized_claw`] takes, per branch, the nearest preimage instead, which
//! is the residual in the regime where noise flooding holds. The honest
//! prover measures the exact residual on a generation challenge. On a test
//! challenge it runs RED on the idealized claw, except when `J(x)` is short
//! enough to run RED and the Hadamard measurement on the exact residual in
//! the sparse oracle.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::gaussian::Density;
use crate::ntcf::{NtcfError, NtcfKey};
use crate::trapdoor::for_each_vector;
use crate::zq::{bit_dot_xor, j_encode, BitString, Modulus, ZqError, ZqVector};

/// Longest `J(x)` for which test answers come from the sparse oracle.
pub const ORACLE_TEST_BITS: usize = 12;

/// Largest `κ·q^n` scanned for a residual.
pub const SCAN_CAP: u64 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProverError {
    #[error("residual scan over {size} labels exceeds the cap {cap}")]
    ScanTooLarge { size: u128, cap: u64 },
    #[error("residual is not a claw: {0}")]
    NotAClaw(String),
    #[error("no image has been committed")]
    NoImage,
    #[error(transparent)]
    Ntcf(#[from] NtcfError),
    #[error(transparent)]
    Zq(#[from] ZqError),
    #[error("oracle: {0}")]
    Oracle(String),
}

impl From<crate::oracle::OracleError> for ProverError {
    fn from(e: crate::oracle::OracleError) -> Self {
        ProverError::Oracle(e.to_string())
    }
}

/// Which residual [`samp_and_measure`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampMode {
    Exact,
    Idealized,
}

/// Post-measurement `BX` state for image `ỹ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualState {
    pub image: ZqVector,
    /// `(b, x, amplitude)` sorted by `(b, x)`; amplitudes are real and
    /// normalized.
    pub support: Vec<(u32, ZqVector, f64)>,
}

impl ResidualState {
    fn from_weights(image: ZqVector, weights: Vec<(u32, ZqVector, f64)>) -> Self {
        let total: f64 = weights.iter().map(|w| w.2).sum();
        let mut support: Vec<_> = weights.into_iter().map(|(b, x, w)| (b, x, (w / total).sqrt())).collect();
        support.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        Self { image, support }
    }

    pub fn probabilities(&self) -> impl Iterator<Item = (u32, &ZqVector, f64)> + '_ {
        self.support.iter().map(|(b, x, a)| (*b, x, a * a))
    }

    /// `(x_0, …, x_{κ−1})` if the support is one point per branch with equal
    /// weights and constant consecutive differences.
    pub fn claw(&self, kappa: u32) -> Result<Vec<ZqVector>, ProverError> {
        if self.support.len() != kappa as usize {
            return Err(ProverError::NotAClaw(format!("{} support points for κ = {kappa}", self.support.len())));
        }
        let w0 = self.support[0].2;
        let mut xs = Vec::with_capacity(kappa as usize);
        for (i, (b, x, a)) in self.support.iter().enumerate() {
            if *b != i as u32 {
                return Err(ProverError::NotAClaw(format!("branch {i} missing")));
            }
            if (a - w0).abs() > 1e-9 {
                return Err(ProverError::NotAClaw("unequal amplitudes".into()));
            }
            xs.push(x.clone());
        }
        if let Some(step) = xs.get(1).map(|x1| xs[0].sub(x1)).transpose()? {
            if !xs.windows(2).all(|w| w[0].sub(&w[1]).as_ref() == Ok(&step)) {
                return Err(ProverError::NotAClaw("differences are not constant".into()));
            }
        }
        Ok(xs)
    }
}

fn scan_size(key: &NtcfKey) -> Result<(), ProverError> {
    let p = &key.params;
    let size = (p.q.q() as u128).checked_pow(p.n as u32).unwrap_or(u128::MAX) * p.kappa as u128;
    if size > SCAN_CAP as u128 {
        return Err(ProverError::ScanTooLarge { size, cap: SCAN_CAP });
    }
    Ok(())
}

/// Per-branch targets `ỹ − b·t`.
fn branch_targets(key: &NtcfKey, y: &ZqVector) -> Result<Vec<Vec<u32>>, ProverError> {
    (0..key.kappa()).map(|b| Ok(y.sub(&key.t.scale(b as i64))?.entries().to_vec())).collect()
}

/// Streams `A·x` row by row so scans can stop early.
struct LazyProduct<'a> {
    key: &'a NtcfKey,
    x: &'a [u32],
    rows: Vec<u32>,
}

impl<'a> LazyProduct<'a> {
    fn new(key: &'a NtcfKey, x: &'a [u32]) -> Self {
        Self { key, x, rows: Vec::with_capacity(key.params.m) }
    }

    fn row(&mut self, i: usize) -> u32 {
        let q = self.key.params.q.q() as u64;
        while self.rows.len() <= i {
            let r = self.rows.len();
            let v = self.key.a.row(r).iter().zip(self.x).fold(0u64, |s, (&a, &x)| (s + a as u64 * x as u64) % q);
            self.rows.push(v as u32);
        }
        self.rows[i]
    }
}

/// The exact residual: every `(b, x)` with `ỹ − Ax − b·t` in the noise
/// support, weighted by `D_{B_P}`.
pub fn exact_residual(key: &NtcfKey, y: &ZqVector) -> Result<ResidualState, ProverError> {
    scan_size(key)?;
    let g = key.image_noise()?;
    let q = key.params.q;
    let targets = branch_targets(key, y)?;
    let mut weights = Vec::new();
    let mut r = vec![0u32; key.params.m];
    for_each_vector(key.params.n, q.q(), |x| {
        let mut ax = LazyProduct::new(key, x);
        for (b, z) in targets.iter().enumerate() {
            let inside = z.iter().enumerate().all(|(i, &zi)| {
                r[i] = q.sub(zi, ax.row(i));
                g.coordinate_in_support(r[i])
            });
            if inside {
                let xv = ZqVector::new(x.to_vec(), q).expect("residues");
                weights.push((b as u32, xv, g.density_of_residues(&r)));
            }
        }
    });
    if weights.is_empty() {
        return Err(ProverError::NotAClaw("image has no preimage".into()));
    }
    Ok(ResidualState::from_weights(y.clone(), weights))
}

/// The idealized claw: for each branch the unique nearest `x` to `ỹ − b·t`.
/// Fails on ties or when the nearest points do not form a claw.
pub fn idealized_claw(key: &NtcfKey, y: &ZqVector) -> Result<ResidualState, ProverError> {
    scan_size(key)?;
    let q = key.params.q;
    let kappa = key.kappa() as usize;
    let targets = branch_targets(key, y)?;
    let mut best = vec![u64::MAX; kappa];
    let mut best_x = vec![Vec::new(); kappa];
    let mut tie = vec![false; kappa];
    for_each_vector(key.params.n, q.q(), |x| {
        let mut ax = LazyProduct::new(key, x);
        for (b, z) in targets.iter().enumerate() {
            let mut acc = 0u64;
            let mut alive = true;
            for (i, &zi) in z.iter().enumerate() {
                let l = q.lift(q.sub(zi, ax.row(i)));
                acc += (l * l) as u64;
                if acc > best[b] {
                    alive = false;
                    break;
                }
            }
            if alive {
                if acc == best[b] {
                    tie[b] = true;
                } else {
                    best[b] = acc;
                    best_x[b] = x.to_vec();
                    tie[b] = false;
                }
            }
        }
    });
    if let Some(b) = tie.iter().position(|&t| t) {
        return Err(ProverError::NotAClaw(format!("branch {b} has two nearest preimages")));
    }
    let weights =
        best_x.into_iter().enumerate().map(|(b, x)| (b as u32, ZqVector::new(x, q).expect("residues"), 1.0)).collect();
    let state = ResidualState::from_weights(y.clone(), weights);
    state.claw(key.kappa())?;
    Ok(state)
}

/// Classical part of SAMP: `b`, `x` uniform, `e₀ ← D_{B_P}`,
/// `ỹ = Ax + e₀ + b·t`. Returns `(ỹ, b, x)`.
pub fn sample_image<R: Rng + ?Sized>(key: &NtcfKey, rng: &mut R) -> Result<(ZqVector, u32, ZqVector), ProverError> {
    let p = &key.params;
    let b = rng.gen_range(0..p.kappa);
    let x = ZqVector::random(p.n, p.q, rng);
    let e0 = key.image_noise()?.sample(rng);
    let y = key.center(b, &x)?.add(&e0)?;
    Ok((y, b, x))
}

/// SAMP followed by the `Y` measurement.
pub fn samp_and_measure<R: Rng + ?Sized>(
    key: &NtcfKey,
    rng: &mut R,
    mode: SampMode,
) -> Result<(ZqVector, ResidualState), ProverError> {
    let (y, _, _) = sample_image(key, rng)?;
    let residual = match mode {
        SampMode::Exact => exact_residual(key, &y)?,
        SampMode::Idealized => idealized_claw(key, &y)?,
    };
    Ok((y, residual))
}

/// Exact distribution of the measured image `ỹ`, by summing over every
/// `(b, x, e₀)`.
pub fn image_distribution(key: &NtcfKey, cap: usize) -> Result<Density, ProverError> {
    let p = &key.params;
    let g = key.image_noise()?;
    let table = g.table(cap).map_err(NtcfError::from)?;
    let size = (p.q.q() as u128).pow(p.n as u32) * p.kappa as u128 * table.len() as u128;
    if size > cap as u128 {
        return Err(ProverError::ScanTooLarge { size, cap: cap as u64 });
    }
    let uniform = 1.0 / (p.kappa as f64 * (p.q.q() as f64).powi(p.n as i32));
    let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for b in 0..p.kappa {
        for_each_vector(p.n, p.q.q(), |x| {
            let xv = ZqVector::new(x.to_vec(), p.q).expect("residues");
            let center = key.center(b, &xv).expect("dimensions match");
            for (e0, pe) in table.iter() {
                let y: Vec<u32> = center.entries().iter().zip(e0).map(|(&c, &e)| p.q.add(c, e)).collect();
                *acc.entry(y).or_default() += uniform * pe;
            }
        });
    }
    Ok(Density::from_pairs(acc))
}

/// Joint law of `(ỹ, b̂, x̂)` for the image measurement followed by a
/// computational-basis measurement of `BX`; labels are `ỹ ‖ b ‖ x`.
pub fn exact_joint_distribution(key: &NtcfKey, cap: usize) -> Result<Density, ProverError> {
    joint_with(key, cap, exact_residual)
}

/// As [`exact_joint_distribution`] with a caller-supplied residual map, so
/// tests can inject faults.
pub fn joint_with(
    key: &NtcfKey,
    cap: usize,
    residual: impl Fn(&NtcfKey, &ZqVector) -> Result<ResidualState, ProverError>,
) -> Result<Density, ProverError> {
    let images = image_distribution(key, cap)?;
    let mut pairs = Vec::new();
    for (y, py) in images.iter() {
        let yv = ZqVector::new(y.clone(), key.params.q)?;
        for (b, x, pr) in residual(key, &yv)?.probabilities() {
            let mut label = y.clone();
            label.push(b);
            label.extend_from_slice(x.entries());
            pairs.push((label, py * pr));
        }
    }
    Ok(Density::from_pairs(pairs))
}

/// Computational-basis measurement of `BX`.
pub fn preimage_measure<R: Rng + ?Sized>(r: &ResidualState, rng: &mut R) -> (u32, ZqVector) {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (b, x, p) in r.probabilities() {
        acc += p;
        if u < acc {
            return (b, x.clone());
        }
    }
    let (b, x, _) = r.support.last().expect("residual support is non-empty");
    (*b, x.clone())
}

/// Two-point state `(|0, x̄₀⟩ + |1, x̄₁⟩)/√2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DcpState {
    pub x0: ZqVector,
    pub x1: ZqVector,
}

impl DcpState {
    /// `s̄ = x̄₀ − x̄₁`.
    pub fn s_bar(&self) -> ZqVector {
        self.x0.sub(&self.x1).expect("same shape")
    }

    /// `s̃ = x̄₁ − x̄₀`, the shift in `|0, x⟩ + |1, x + s̃⟩`.
    pub fn shift(&self) -> ZqVector {
        self.x1.sub(&self.x0).expect("same shape")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedFailure {
    /// `|b′| = 0` was measured.
    ZeroShift,
    /// `|b′| = r` has a single preimage (even κ, `r = ⌈(κ−1)/2⌉`).
    Singleton { shift: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RedOutcome {
    Success { b_hat_prime: u32, state: DcpState },
    Failure(RedFailure),
}

/// Every measurement branch of RED on a claw, as `(probability, outcome)`,
/// one entry per distinct `|b′|`.
pub fn red_branches(r: &ResidualState, kappa: u32) -> Result<Vec<(f64, RedOutcome)>, ProverError> {
    let xs = r.claw(kappa)?;
    let f = (kappa - 1) / 2;
    let mut out: BTreeMap<u32, (f64, RedOutcome)> = BTreeMap::new();
    for b in 0..kappa {
        let shift = b.abs_diff(f);
        let entry = out.entry(shift).or_insert_with(|| (0.0, red_outcome(&xs, f, shift)));
        entry.0 += 1.0 / kappa as f64;
    }
    Ok(out.into_values().collect())
}

fn red_outcome(xs: &[ZqVector], f: u32, shift: u32) -> RedOutcome {
    if shift == 0 {
        return RedOutcome::Failure(RedFailure::ZeroShift);
    }
    let hi = f + shift;
    match f.checked_sub(shift) {
        Some(lo) if (hi as usize) < xs.len() => RedOutcome::Success {
            b_hat_prime: shift,
            state: DcpState { x0: xs[lo as usize].clone(), x1: xs[hi as usize].clone() },
        },
        _ => RedOutcome::Failure(RedFailure::Singleton { shift }),
    }
}

/// RED: shift labels by `⌊(κ−1)/2⌋`, measure `|b′|`, keep the two partners.
pub fn red<R: Rng + ?Sized>(r: &ResidualState, kappa: u32, rng: &mut R) -> Result<RedOutcome, ProverError> {
    let xs = r.claw(kappa)?;
    let b = rng.gen_range(0..kappa);
    let f = (kappa - 1) / 2;
    Ok(red_outcome(&xs, f, b.abs_diff(f)))
}

/// `b̂′` values a successful RED can output; `{0}` for κ = 2, which skips
/// RED and uses the claw directly.
pub fn valid_b_prime(kappa: u32) -> Vec<u32> {
    if kappa == 2 {
        return vec![0];
    }
    let top = kappa / 2;
    (1..=top).filter(|&r| !(kappa.is_multiple_of(2) && r == top)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquationResponse {
    pub c: u8,
    pub d: BitString,
}

/// Exact law of the `Ψ⁽⁴⁾` measurement: `d` uniform and
/// `c = d·(J(x̄₀) ⊕ J(x̄₁))`.
pub fn equation_measure<R: Rng + ?Sized>(state: &DcpState, rng: &mut R) -> EquationResponse {
    let (j0, j1) = (j_encode(&state.x0), j_encode(&state.x1));
    let d = BitString::random(j0.len(), rng);
    let c = bit_dot_xor(&d, &j0, &j1).expect("equal lengths");
    EquationResponse { c, d }
}

/// Reply to a test challenge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestAnswer {
    Equation { b_prime: u32, c: u8, d: BitString },
    RedFailure,
}

/// The three callbacks a protocol driver needs from any prover.
pub trait Prover {
    fn on_key(&mut self, key: &NtcfKey) -> Result<ZqVector, ProverError>;
    fn on_generation(&mut self) -> Result<(u32, ZqVector), ProverError>;
    fn on_test(&mut self) -> Result<TestAnswer, ProverError>;
}

impl<P: Prover + ?Sized> Prover for Box<P> {
    fn on_key(&mut self, key: &NtcfKey) -> Result<ZqVector, ProverError> {
        (**self).on_key(key)
    }

    fn on_generation(&mut self) -> Result<(u32, ZqVector), ProverError> {
        (**self).on_generation()
    }

    fn on_test(&mut self) -> Result<TestAnswer, ProverError> {
        (**self).on_test()
    }
}

/// Honest prover; knows only the public key.
pub struct HonestProver<R> {
    rng: R,
    pending: Option<(NtcfKey, ZqVector)>,
}

impl<R: Rng> HonestProver<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, pending: None }
    }
}

impl<R: Rng> Prover for HonestProver<R> {
    fn on_key(&mut self, key: &NtcfKey) -> Result<ZqVector, ProverError> {
        scan_size(key)?;
        let (y, _, _) = sample_image(key, &mut self.rng)?;
        self.pending = Some((key.clone(), y.clone()));
        Ok(y)
    }

    fn on_generation(&mut self) -> Result<(u32, ZqVector), ProverError> {
        let (key, y) = self.pending.take().ok_or(ProverError::NoImage)?;
        Ok(preimage_measure(&exact_residual(&key, &y)?, &mut self.rng))
    }

    fn on_test(&mut self) -> Result<TestAnswer, ProverError> {
        let (key, y) = self.pending.take().ok_or(ProverError::NoImage)?;
        if key.params.bit_len() <= ORACLE_TEST_BITS {
            return oracle_test_answer(&key, &exact_residual(&key, &y)?, &mut self.rng);
        }
        let claw = idealized_claw(&key, &y)?;
        let kappa = key.kappa();
        let (b_prime, state) = if kappa == 2 {
            let xs = claw.claw(2)?;
            (0, DcpState { x0: xs[0].clone(), x1: xs[1].clone() })
        } else {
            match red(&claw, kappa, &mut self.rng)? {
                RedOutcome::Success { b_hat_prime, state } => (b_hat_prime, state),
                RedOutcome::Failure(_) => return Ok(TestAnswer::RedFailure),
            }
        };
        let EquationResponse { c, d } = equation_measure(&state, &mut self.rng);
        Ok(TestAnswer::Equation { b_prime, c, d })
    }
}

/// RED (skipped for κ = 2) followed by `J`, Hadamard and measurement of
/// `B` and `X`, all on the sparse oracle starting from `r`.
pub fn oracle_test_answer<R: Rng + ?Sized>(
    key: &NtcfKey,
    r: &ResidualState,
    rng: &mut R,
) -> Result<TestAnswer, ProverError> {
    use crate::oracle::{bx_registers, RegisterKind, RegisterSpec, SparseState};
    let amps = r.support.iter().map(|(b, x, a)| {
        let mut label = vec![*b];
        label.extend_from_slice(x.entries());
        (label, num_complex::Complex64::new(*a, 0.0))
    });
    let mut st = SparseState::from_amplitudes(bx_registers(key)?, amps)?;
    let kappa = key.kappa();
    let one_bit = Some(RegisterKind::Bits { width: 1 });
    let b_prime = if kappa == 2 {
        st.relabel_register("B", one_bit, |v| v.get("B").to_vec())?;
        0
    } else {
        let f = (kappa - 1) / 2;
        let absm = Modulus::new_composite(kappa as u64)?;
        st.compute_register(RegisterSpec::modular("R", absm, 1), |v| vec![v.get("B")[0].abs_diff(f)])?;
        let shift = st.measure_register("R", rng)?[0];
        if !valid_b_prime(kappa).contains(&shift) {
            return Ok(TestAnswer::RedFailure);
        }
        st.discard_register("R")?;
        st.relabel_register("B", one_bit, |v| vec![u32::from(v.get("B")[0] > f)])?;
        shift
    };
    st.apply_j_encoding("X")?;
    st.apply_hadamard_bits("B")?;
    st.apply_hadamard_bits("X")?;
    let c = st.measure_register("B", rng)?[0] as u8;
    let d = st.measure_register("X", rng)?.into_iter().map(|v| v as u8).collect();
    Ok(TestAnswer::Equation { b_prime, c, d: BitString::new(d)? })
}

fn guess_equation<R: Rng + ?Sized>(key: &NtcfKey, rng: &mut R) -> TestAnswer {
    let choices = valid_b_prime(key.kappa());
    let b_prime = choices[rng.gen_range(0..choices.len())];
    let c = rng.gen_range(0..2u8);
    let d = BitString::random(key.params.bit_len(), rng);
    TestAnswer::Equation { b_prime, c, d }
}

/// Classical cheater that commits to `(b, x)` and guesses the equation.
pub struct CheatCommitProver<R> {
    rng: R,
    committed: Option<(NtcfKey, u32, ZqVector)>,
}

pub fn cheat_commit_prover<R: Rng>(rng: R) -> CheatCommitProver<R> {
    CheatCommitProver { rng, committed: None }
}

impl<R: Rng> Prover for CheatCommitProver<R> {
    fn on_key(&mut self, key: &NtcfKey) -> Result<ZqVector, ProverError> {
        let (y, b, x) = sample_image(key, &mut self.rng)?;
        self.committed = Some((key.clone(), b, x));
        Ok(y)
    }

    fn on_generation(&mut self) -> Result<(u32, ZqVector), ProverError> {
        let (_, b, x) = self.committed.take().ok_or(ProverError::NoImage)?;
        Ok((b, x))
    }

    fn on_test(&mut self) -> Result<TestAnswer, ProverError> {
        let (key, _, _) = self.committed.take().ok_or(ProverError::NoImage)?;
        Ok(guess_equation(&key, &mut self.rng))
    }
}

/// Classical cheater that sends a uniform image and uniform answers.
pub struct CheatRandomProver<R> {
    rng: R,
    key: Option<NtcfKey>,
}

impl<R: Rng> CheatRandomProver<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, key: None }
    }
}

impl<R: Rng> Prover for CheatRandomProver<R> {
    fn on_key(&mut self, key: &NtcfKey) -> Result<ZqVector, ProverError> {
        self.key = Some(key.clone());
        Ok(ZqVector::random(key.params.m, key.params.q, &mut self.rng))
    }

    fn on_generation(&mut self) -> Result<(u32, ZqVector), ProverError> {
        let key = self.key.take().ok_or(ProverError::NoImage)?;
        let b = self.rng.gen_range(0..key.kappa());
        Ok((b, ZqVector::random(key.params.n, key.params.q, &mut self.rng)))
    }

    fn on_test(&mut self) -> Result<TestAnswer, ProverError> {
        let key = self.key.take().ok_or(ProverError::NoImage)?;
        Ok(guess_equation(&key, &mut self.rng))
    }
}

/// A uniform claw residual `(1/√κ) Σ_b |b⟩|x₀ − b·s⟩`.
pub fn claw_residual(image: ZqVector, x0: &ZqVector, s: &ZqVector, kappa: u32) -> ResidualState {
    let weights = (0..kappa).map(|b| (b, x0.sub(&s.scale(b as i64)).expect("same shape"), 1.0)).collect();
    ResidualState::from_weights(image, weights)
}

/// Oracle-side RED on a `(B, X)` claw state: compute `|b − F|`, project onto
/// `shift`, drop the helper register and relabel `F − shift ↦ 0`,
/// `F + shift ↦ 1`. Returns the outcome probability and the relabeled state.
pub fn oracle_red(
    state: &crate::oracle::SparseState,
    kappa: u32,
    shift: u32,
) -> Result<(f64, crate::oracle::SparseState), crate::oracle::OracleError> {
    use crate::oracle::{RegisterKind, RegisterSpec};
    let f = (kappa - 1) / 2;
    let mut st = state.clone();
    let absm = Modulus::new_composite(kappa as u64)?;
    st.compute_register(RegisterSpec::modular("R", absm, 1), |v| vec![v.get("B")[0].abs_diff(f)])?;
    let p = st.project("R", &[shift])?;
    st.discard_register("R")?;
    st.relabel_register("B", Some(RegisterKind::Bits { width: 1 }), |v| vec![u32::from(v.get("B")[0] > f)])?;
    Ok((p, st))
}

/// `(B: 1 bit, X)` oracle state for a prover-side [`DcpState`].
pub fn dcp_to_oracle(state: &DcpState, q: Modulus) -> Result<crate::oracle::SparseState, crate::oracle::OracleError> {
    crate::oracle::dcp_state(q, &state.x0, &state.x1)
}

/// Convenience for tests and the CLI: a seeded image and both residuals.
pub fn residuals_for<R: Rng + ?Sized>(
    key: &NtcfKey,
    rng: &mut R,
) -> Result<(ZqVector, ResidualState, Result<ResidualState, ProverError>), ProverError> {
    let (y, _, _) = sample_image(key, rng)?;
    let exact = exact_residual(key, &y)?;
    let ideal = idealized_claw(key, &y);
    Ok((y, exact, ideal))
}
