//! Verifier state machine for one round at a time.

use rand::Rng;

use super::message::{Challenge, Message, Verdict};
use super::ProtocolError;
use crate::ntcf::{gen, Claw, NtcfKey, NtcfTrapdoor};
use crate::params::NtcfParams;
use crate::prover::valid_b_prime;
use crate::zq::{bit_dot_xor, j_encode, BitString, ZqVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    AwaitImage,
    AwaitChallenge,
    AwaitGeneration,
    AwaitEquation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundOutcome {
    pub verdict: Verdict,
    pub reason: String,
}

impl RoundOutcome {
    fn new(verdict: Verdict, reason: impl Into<String>) -> Self {
        Self { verdict, reason: reason.into() }
    }

    pub fn message(&self) -> Message {
        Message::RoundResult { verdict: self.verdict, reason: self.reason.clone() }
    }
}

struct Round {
    key: NtcfKey,
    td: NtcfTrapdoor,
    image: Option<ZqVector>,
    claw: Option<Claw>,
}

pub struct Verifier<R> {
    params: NtcfParams,
    rng: R,
    reuse_key: bool,
    forced: Option<Challenge>,
    cached: Option<(NtcfKey, NtcfTrapdoor)>,
    phase: Phase,
    round: Option<Round>,
}

impl<R: Rng> Verifier<R> {
    pub fn new(params: NtcfParams, rng: R) -> Result<Self, ProtocolError> {
        params.ensure_valid().map_err(|e| ProtocolError::Config(e.to_string()))?;
        Ok(Self { params, rng, reuse_key: false, forced: None, cached: None, phase: Phase::Idle, round: None })
    }

    /// Keeps one key for the whole session instead of one per round.
    pub fn reuse_key(mut self, on: bool) -> Self {
        self.reuse_key = on;
        self
    }

    /// Always issues `c` instead of a coin flip.
    pub fn force_challenge(mut self, c: Option<Challenge>) -> Self {
        self.forced = c;
        self
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn params(&self) -> &NtcfParams {
        &self.params
    }

    fn unexpected(&self, got: &str) -> ProtocolError {
        ProtocolError::UnexpectedMessage { phase: format!("{:?}", self.phase), got: got.into() }
    }

    /// Step 1: fresh key (or the cached one); the trapdoor stays here.
    pub fn new_round(&mut self) -> Result<Message, ProtocolError> {
        if self.phase != Phase::Idle {
            return Err(self.unexpected("new round"));
        }
        let (key, td) = match (&self.cached, self.reuse_key) {
            (Some(pair), true) => pair.clone(),
            _ => {
                let pair = gen(&self.params, &mut self.rng).map_err(|e| ProtocolError::Config(e.to_string()))?;
                if self.reuse_key {
                    self.cached = Some(pair.clone());
                }
                pair
            }
        };
        let msg = Message::Key(key.clone());
        self.round = Some(Round { key, td, image: None, claw: None });
        self.phase = Phase::AwaitImage;
        Ok(msg)
    }

    /// Step 3: invert every branch. A decode failure rejects the round.
    pub fn receive_image(&mut self, y: ZqVector) -> Result<Option<RoundOutcome>, ProtocolError> {
        if self.phase != Phase::AwaitImage {
            return Err(self.unexpected("image"));
        }
        let round = self.round.as_mut().expect("round exists while awaiting image");
        let p = &round.key.params;
        if y.len() != p.m || y.modulus() != p.q {
            return Err(ProtocolError::Payload(format!("image must lie in Z_{}^{}", p.q.q(), p.m)));
        }
        match round.td.claw_enumerate(&round.key, &y) {
            Ok(claw) => {
                round.claw = Some(claw);
                round.image = Some(y);
                self.phase = Phase::AwaitChallenge;
                Ok(None)
            }
            Err(e) => Ok(Some(self.finish(Verdict::Reject, format!("image does not decode: {e}")))),
        }
    }

    /// Step 4: uniform challenge.
    pub fn challenge(&mut self) -> Result<Challenge, ProtocolError> {
        if self.phase != Phase::AwaitChallenge {
            return Err(self.unexpected("challenge request"));
        }
        let c =
            self.forced.unwrap_or_else(|| if self.rng.gen::<bool>() { Challenge::Generation } else { Challenge::Test });
        self.phase = match c {
            Challenge::Generation => Phase::AwaitGeneration,
            Challenge::Test => Phase::AwaitEquation,
        };
        Ok(c)
    }

    fn finish(&mut self, verdict: Verdict, reason: impl Into<String>) -> RoundOutcome {
        self.phase = Phase::Idle;
        self.round = None;
        RoundOutcome::new(verdict, reason)
    }

    /// Generation round: `b̂ < κ` and `chk(k, b̂, x̂, ỹ) = 1`.
    pub fn check_generation(&mut self, b: u32, x: ZqVector) -> Result<RoundOutcome, ProtocolError> {
        if self.phase != Phase::AwaitGeneration {
            return Err(self.unexpected("preimage"));
        }
        let round = self.round.as_ref().expect("round exists");
        let p = &round.key.params;
        if x.len() != p.n || x.modulus() != p.q {
            return Err(ProtocolError::Payload(format!("preimage must lie in Z_{}^{}", p.q.q(), p.n)));
        }
        if b >= p.kappa {
            return Ok(self.finish(Verdict::Reject, format!("b = {b} is outside 0..{}", p.kappa)));
        }
        let y = round.image.as_ref().expect("image received");
        if round.key.chk(b, &x, y) {
            Ok(self.finish(Verdict::Accept, "preimage passes chk"))
        } else {
            Ok(self.finish(Verdict::Reject, "preimage fails chk"))
        }
    }

    /// Test round: rebuild `x̄₀`, `x̄₁` from the cached claw and `b̂′`, then
    /// check `c = d·(J(x̄₀) ⊕ J(x̄₁))` with `d ≠ 0`.
    pub fn check_equation(&mut self, b_prime: u32, c: u8, d: BitString) -> Result<RoundOutcome, ProtocolError> {
        if self.phase != Phase::AwaitEquation {
            return Err(self.unexpected("equation"));
        }
        let round = self.round.as_ref().expect("round exists");
        let p = &round.key.params;
        if d.len() != p.bit_len() {
            return Err(ProtocolError::Payload(format!("d has {} bits, expected {}", d.len(), p.bit_len())));
        }
        if !valid_b_prime(p.kappa).contains(&b_prime) {
            return Ok(self.finish(Verdict::Reject, format!("b' = {b_prime} is not a valid RED outcome")));
        }
        if d.is_zero() {
            return Ok(self.finish(Verdict::Retry, "d is all-zero"));
        }
        let (x0, x1) = reconstruct(round, b_prime);
        let expected = bit_dot_xor(&d, &j_encode(&x0), &j_encode(&x1)).expect("lengths checked");
        if c == expected {
            Ok(self.finish(Verdict::Accept, "equation holds"))
        } else {
            Ok(self.finish(Verdict::Reject, "equation fails"))
        }
    }

    /// The prover's RED came up empty; the round is redone.
    pub fn red_failure(&mut self) -> Result<RoundOutcome, ProtocolError> {
        if self.phase != Phase::AwaitEquation {
            return Err(self.unexpected("red-failure"));
        }
        Ok(self.finish(Verdict::Retry, "RED failure"))
    }

    /// Dispatches a prover message; returns the verifier's next message.
    pub fn handle(&mut self, msg: Message) -> Result<Message, ProtocolError> {
        match msg {
            Message::Image(y) => match self.receive_image(y)? {
                Some(outcome) => Ok(outcome.message()),
                None => Ok(Message::Challenge(self.challenge()?)),
            },
            Message::PreimageResp { b, x } => Ok(self.check_generation(b, x)?.message()),
            Message::EquationResp { b_prime, c, d } => Ok(self.check_equation(b_prime, c, d)?.message()),
            Message::RedFailure => Ok(self.red_failure()?.message()),
            other => Err(self.unexpected(other.name())),
        }
    }
}

/// `x̄₀ = x₀ − ⌊(κ−1)/2⌋·s + b̂′·s`, `x̄₁ = x̄₀ − 2b̂′·s`; for κ = 2 the claw
/// itself.
fn reconstruct(round: &Round, b_prime: u32) -> (ZqVector, ZqVector) {
    let claw = round.claw.as_ref().expect("claw cached");
    let s = &round.td.s;
    let kappa = round.key.params.kappa;
    if kappa == 2 {
        return (claw.xs[0].clone(), claw.xs[1].clone());
    }
    let f = ((kappa - 1) / 2) as i64;
    let x0 = claw.xs[0].sub(&s.scale(f)).and_then(|v| v.add(&s.scale(b_prime as i64))).expect("same shape");
    let x1 = x0.sub(&s.scale(2 * b_prime as i64)).expect("same shape");
    (x0, x1)
}
