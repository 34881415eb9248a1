//! LWE to DCP and LWE to EDCP pipelines, with desk-scale solver oracles
//! that close the loop back to the LWE secret.
//!
//! The solvers read secrets off explicit sparse supports. They stand in for
//! a DCP/EDCP solver, which is what the reductions assume, and do no
//! quantum work themselves.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::codec::TextWriter;
use crate::gaussian::Density;
use crate::ntcf::{gen, NtcfKey};
use crate::params::{c_t_for, NtcfParams, ParamsError};
use crate::prover::{
    exact_residual, image_distribution, red, samp_and_measure, DcpState, ProverError, RedOutcome, ResidualState,
    SampMode,
};
use crate::zq::{mat_vec_mul, ZqMatrix, ZqVector};

/// Non-claw residuals discarded per requested state before giving up.
pub const MAX_DISCARDS: usize = 10_000;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error(transparent)]
    Prover(#[from] ProverError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("{discarded} residuals in a row were not clean claws")]
    NoCleanClaw { discarded: usize },
    #[error("EDCP state weights are not uniform")]
    NonUniform,
}

/// `(A, t = As + e)` together with the parameters that bound `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct LweInstance {
    pub a: ZqMatrix,
    pub t: ZqVector,
    pub params: NtcfParams,
}

impl LweInstance {
    pub fn from_key(key: &NtcfKey) -> Self {
        Self { a: key.a.clone(), t: key.t.clone(), params: key.params.clone() }
    }

    /// A fresh instance with its planted secret.
    pub fn planted<R: Rng + ?Sized>(params: &NtcfParams, rng: &mut R) -> Result<(Self, ZqVector), ReductionError> {
        let (key, td) = gen(params, rng).map_err(ProverError::from)?;
        Ok((Self::from_key(&key), td.s))
    }

    /// The NTCF key over this instance for `kappa` branches. `B_P` is kept
    /// and `C_T` rederived from it.
    pub fn key_for(&self, kappa: u32) -> Result<NtcfKey, ReductionError> {
        let mut p = self.params.clone();
        if p.kappa != kappa {
            p.kappa = kappa;
            p.c_t = c_t_for(p.q, p.n, p.m, kappa, p.b_p);
        }
        p.ensure_valid()?;
        Ok(NtcfKey { params: p, a: self.a.clone(), t: self.t.clone() })
    }

    /// `‖t − As‖` under centered lifts.
    pub fn residual_norm(&self, s: &ZqVector) -> f64 {
        match mat_vec_mul(&self.a, s).and_then(|v| self.t.sub(&v)) {
            Ok(r) => r.euclidean_norm(),
            Err(_) => f64::INFINITY,
        }
    }

    /// `‖t − As‖ ≤ B_V·√m`.
    pub fn verify(&self, s: &ZqVector) -> bool {
        self.residual_norm(s) <= self.params.b_v * (self.params.m as f64).sqrt() + 1e-9
    }
}

/// A uniform EDCP state `Σ_j |j⟩|x₀ − j·s⟩` with explicit support.
#[derive(Debug, Clone, PartialEq)]
pub struct EdcpState {
    /// `(j, x_j, weight)`; weights sum to 1.
    pub support: Vec<(u32, ZqVector, f64)>,
}

impl EdcpState {
    fn from_residual(r: ResidualState) -> Self {
        Self { support: r.probabilities().map(|(b, x, p)| (b, x.clone(), p)).collect() }
    }

    pub fn kappa(&self) -> u32 {
        self.support.len() as u32
    }

    fn to_residual(&self) -> ResidualState {
        let image = ZqVector::zero(0, self.support[0].1.modulus());
        let support = self.support.iter().map(|(j, x, w)| (*j, x.clone(), w.sqrt())).collect();
        ResidualState { image, support }
    }

    /// `x_j − x_{j+1}` if it is the same for every `j`.
    pub fn step(&self) -> Option<ZqVector> {
        let step = self.support[0].1.sub(&self.support.get(1)?.1).ok()?;
        self.support.windows(2).all(|w| w[0].1.sub(&w[1].1).as_ref() == Ok(&step)).then_some(step)
    }
}

/// Draws one residual and keeps it only if it is a clean κ-point claw.
fn clean_claw<R: Rng + ?Sized>(key: &NtcfKey, mode: SampMode, rng: &mut R) -> Result<ResidualState, ReductionError> {
    for _ in 0..MAX_DISCARDS {
        match samp_and_measure(key, rng, mode) {
            Ok((_, r)) if r.claw(key.kappa()).is_ok() => return Ok(r),
            Ok(_) | Err(ProverError::NotAClaw(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(ReductionError::NoCleanClaw { discarded: MAX_DISCARDS })
}

/// `count` DCP states `|0, x⟩ + |1, x + s̃⟩` with `s̃ = −s`, from the κ = 2
/// prover pipeline.
pub fn lwe_to_dcp<R: Rng + ?Sized>(
    inst: &LweInstance,
    count: usize,
    mode: SampMode,
    rng: &mut R,
) -> Result<Vec<DcpState>, ReductionError> {
    let key = inst.key_for(2)?;
    (0..count)
        .map(|_| {
            let r = clean_claw(&key, mode, rng)?;
            let xs = r.claw(2)?;
            Ok(DcpState { x0: xs[0].clone(), x1: xs[1].clone() })
        })
        .collect()
}

/// `ell` uniform EDCP states over `{(b, x₀ − b·s)}_{b<κ}`.
pub fn lwe_to_edcp<R: Rng + ?Sized>(
    inst: &LweInstance,
    ell: usize,
    kappa: u32,
    mode: SampMode,
    rng: &mut R,
) -> Result<Vec<EdcpState>, ReductionError> {
    let key = inst.key_for(kappa)?;
    (0..ell).map(|_| Ok(EdcpState::from_residual(clean_claw(&key, mode, rng)?))).collect()
}

/// RED on an EDCP state. The resulting DCP secret is `2b̂′·s`.
pub fn red_edcp_to_dcp<R: Rng + ?Sized>(state: &EdcpState, rng: &mut R) -> Result<RedOutcome, ReductionError> {
    let w0 = state.support[0].2;
    if state.support.iter().any(|(_, _, w)| (w - w0).abs() > 1e-9) {
        return Err(ReductionError::NonUniform);
    }
    Ok(red(&state.to_residual(), state.kappa(), rng)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub candidate: Option<ZqVector>,
    pub consumed: usize,
    pub success: bool,
    pub detail: String,
}

impl SolverReport {
    fn failure(consumed: usize, detail: impl Into<String>) -> Self {
        Self { candidate: None, consumed, success: false, detail: detail.into() }
    }

    pub fn to_text(&self) -> String {
        let mut w = TextWriter::new();
        w.field("success", self.success).field("consumed", self.consumed);
        match &self.candidate {
            Some(c) => w.vector("candidate", c.entries()),
            None => w.field("candidate", "none"),
        };
        w.field("detail", &self.detail);
        w.finish()
    }
}

impl fmt::Display for SolverReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn unanimous(values: impl IntoIterator<Item = Option<ZqVector>>) -> SolverReport {
    let mut seen: Option<ZqVector> = None;
    let mut consumed = 0;
    for v in values {
        consumed += 1;
        let Some(v) = v else {
            return SolverReport::failure(consumed, format!("state {} has no constant step", consumed - 1));
        };
        match &seen {
            Some(s) if *s != v => {
                return SolverReport::failure(consumed, format!("state {} disagrees with state 0", consumed - 1))
            }
            Some(_) => {}
            None => seen = Some(v),
        }
    }
    match seen {
        Some(s) => SolverReport { candidate: Some(s), consumed, success: true, detail: "all states agree".into() },
        None => SolverReport::failure(0, "no states"),
    }
}

/// Desk DCP solver: reads `s̃ = x₁ − x₀` from every state and succeeds iff
/// all agree.
pub fn solve_dcp_desk(states: &[DcpState]) -> SolverReport {
    unanimous(states.iter().map(|st| Some(st.shift())))
}

/// Desk EDCP solver: reads `s = x_j − x_{j+1}` from every state.
pub fn solve_edcp(states: &[EdcpState]) -> SolverReport {
    unanimous(states.iter().map(EdcpState::step))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionPath {
    Dcp,
    Edcp { kappa: u32 },
}

/// Runs a pipeline and its solver, then checks the recovered secret against
/// the instance. `corrupt` replaces the last state with a shifted copy so
/// the solver should notice.
pub fn end_to_end_recover<R: Rng + ?Sized>(
    inst: &LweInstance,
    path: ReductionPath,
    count: usize,
    mode: SampMode,
    corrupt: bool,
    rng: &mut R,
) -> Result<SolverReport, ReductionError> {
    let mut report = match path {
        ReductionPath::Dcp => {
            let mut states = lwe_to_dcp(inst, count, mode, rng)?;
            if corrupt {
                if let Some(last) = states.last_mut() {
                    last.x1 = last.x1.add(&unit(&last.x1)).expect("same shape");
                }
            }
            let mut r = solve_dcp_desk(&states);
            r.candidate = r.candidate.map(|s_tilde| s_tilde.neg());
            r
        }
        ReductionPath::Edcp { kappa } => {
            let mut states = lwe_to_edcp(inst, count, kappa, mode, rng)?;
            if corrupt {
                if let Some((_, x, _)) = states.last_mut().and_then(|st| st.support.last_mut()) {
                    *x = x.add(&unit(x)).expect("same shape");
                }
            }
            solve_edcp(&states)
        }
    };
    if let Some(s) = &report.candidate {
        let norm = inst.residual_norm(s);
        if !inst.verify(s) {
            report.success = false;
            report.detail = format!("candidate fails verification: ‖t − As‖ = {norm:.3}");
        } else {
            report.detail = format!("{}; ‖t − As‖ = {norm:.3}", report.detail);
        }
    }
    Ok(report)
}

fn unit(like: &ZqVector) -> ZqVector {
    let mut e = vec![0i64; like.len()];
    e[0] = 1;
    ZqVector::from_signed(&e, like.modulus())
}

/// Exact law of the clean claws the exact pipeline emits, keyed by
/// `x₀‖x₁‖…‖x_{κ−1}`: the image law restricted to images whose residual is
/// a clean claw, renormalized.
pub fn clean_claw_distribution(key: &NtcfKey, cap: usize) -> Result<Density, ReductionError> {
    let images = image_distribution(key, cap)?;
    let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (y, p) in images.iter() {
        let y = ZqVector::new(y.clone(), key.params.q).expect("residues");
        let r = exact_residual(key, &y)?;
        if let Ok(xs) = r.claw(key.kappa()) {
            let label = xs.iter().flat_map(|x| x.entries().iter().copied()).collect();
            *acc.entry(label).or_default() += p;
        }
    }
    let total: f64 = acc.values().sum();
    Ok(Density::from_pairs(acc.into_iter().map(|(k, v)| (k, v / total))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desk_instance(seed: u64) -> (LweInstance, ZqVector, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (inst, s) = LweInstance::planted(&NtcfParams::desk(3), &mut rng).unwrap();
        (inst, s, rng)
    }

    #[test]
    fn dcp_states_carry_minus_s() {
        let (inst, s, mut rng) = desk_instance(1);
        let states = lwe_to_dcp(&inst, 5, SampMode::Idealized, &mut rng).unwrap();
        assert_eq!(states.len(), 5);
        for st in &states {
            assert_eq!(st.shift(), s.neg());
        }
        assert!(lwe_to_dcp(&inst, 0, SampMode::Idealized, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn edcp_states_step_by_s() {
        let (inst, s, mut rng) = desk_instance(2);
        for kappa in [3, 5] {
            let states = lwe_to_edcp(&inst, 4, kappa, SampMode::Idealized, &mut rng).unwrap();
            for st in &states {
                assert_eq!(st.kappa(), kappa);
                assert_eq!(st.step(), Some(s.clone()));
            }
        }
    }

    #[test]
    fn solver_flags_inconsistency() {
        let (inst, s, mut rng) = desk_instance(3);
        let ok = end_to_end_recover(&inst, ReductionPath::Dcp, 3, SampMode::Idealized, false, &mut rng).unwrap();
        assert!(ok.success, "{ok}");
        assert_eq!(ok.candidate, Some(s.clone()));
        let bad = end_to_end_recover(&inst, ReductionPath::Dcp, 3, SampMode::Idealized, true, &mut rng).unwrap();
        assert!(!bad.success);
        assert!(bad.detail.contains("disagrees"));
        let single = solve_dcp_desk(&lwe_to_dcp(&inst, 1, SampMode::Idealized, &mut rng).unwrap());
        assert!(single.success);
    }

    #[test]
    fn wrong_candidate_fails_verification() {
        let (inst, s, _) = desk_instance(4);
        assert!(inst.verify(&s));
        assert!(!inst.verify(&s.add(&unit(&s)).unwrap()));
    }

    #[test]
    fn red_rejects_non_uniform_states() {
        let (inst, _, mut rng) = desk_instance(5);
        let mut st = lwe_to_edcp(&inst, 1, 3, SampMode::Idealized, &mut rng).unwrap().remove(0);
        st.support[0].2 = 0.5;
        st.support[1].2 = 0.25;
        st.support[2].2 = 0.25;
        assert!(matches!(red_edcp_to_dcp(&st, &mut rng), Err(ReductionError::NonUniform)));
    }
}
