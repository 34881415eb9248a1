//! Prover endpoint, links and the multi-round driver.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Instant;

use rand::Rng;

use super::message::{frame_decode, frame_encode, read_frame, write_frame, Challenge, Message, Verdict};
use super::transcript::Transcript;
use super::verifier::Verifier;
use super::ProtocolError;
use crate::ntcf::NtcfKey;
use crate::params::NtcfParams;
use crate::prover::{Prover, TestAnswer};

/// Consecutive retried rounds tolerated before a session aborts.
pub const DEFAULT_RETRY_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ProverPhase {
    AwaitKey,
    AwaitChallenge,
    AwaitResult,
}

/// Wraps a [`Prover`] in the message-level state machine.
pub struct ProverEndpoint<P> {
    prover: P,
    phase: ProverPhase,
    key: Option<NtcfKey>,
}

impl<P: Prover> ProverEndpoint<P> {
    pub fn new(prover: P) -> Self {
        Self { prover, phase: ProverPhase::AwaitKey, key: None }
    }

    pub fn into_inner(self) -> P {
        self.prover
    }

    /// Handles one verifier message and returns the reply, if any.
    pub fn respond(&mut self, msg: Message) -> Result<Option<Message>, ProtocolError> {
        let unexpected = |phase: ProverPhase, got: &Message| ProtocolError::UnexpectedMessage {
            phase: format!("{phase:?}"),
            got: got.name().into(),
        };
        match (self.phase, msg) {
            (ProverPhase::AwaitKey, Message::Key(key)) => {
                let y = self.prover.on_key(&key)?;
                self.key = Some(key);
                self.phase = ProverPhase::AwaitChallenge;
                Ok(Some(Message::Image(y)))
            }
            (ProverPhase::AwaitChallenge, Message::Challenge(c)) => {
                self.phase = ProverPhase::AwaitResult;
                let reply = match c {
                    Challenge::Generation => {
                        let (b, x) = self.prover.on_generation()?;
                        Message::PreimageResp { b, x }
                    }
                    Challenge::Test => match self.prover.on_test()? {
                        TestAnswer::Equation { b_prime, c, d } => Message::EquationResp { b_prime, c, d },
                        TestAnswer::RedFailure => Message::RedFailure,
                    },
                };
                Ok(Some(reply))
            }
            // A rejected image ends the round before any challenge.
            (ProverPhase::AwaitChallenge | ProverPhase::AwaitResult, Message::RoundResult { .. }) => {
                self.phase = ProverPhase::AwaitKey;
                self.key = None;
                Ok(None)
            }
            (phase, other) => Err(unexpected(phase, &other)),
        }
    }
}

/// Verifier-side view of a connection to the prover.
pub trait Link {
    /// Sends `msg`; returns the prover's reply when one is expected.
    fn request(&mut self, msg: &Message) -> Result<Option<Message>, ProtocolError>;
}

/// Same-process link. Every message still goes through encode and decode.
pub struct InProcessLink<P> {
    endpoint: ProverEndpoint<P>,
}

impl<P: Prover> InProcessLink<P> {
    pub fn new(prover: P) -> Self {
        Self { endpoint: ProverEndpoint::new(prover) }
    }
}

impl<P: Prover> Link for InProcessLink<P> {
    fn request(&mut self, msg: &Message) -> Result<Option<Message>, ProtocolError> {
        let delivered = frame_decode(&frame_encode(msg))?;
        match self.endpoint.respond(delivered)? {
            Some(reply) => Ok(Some(frame_decode(&frame_encode(&reply))?)),
            None => Ok(None),
        }
    }
}

pub struct TcpLink {
    stream: TcpStream,
}

impl TcpLink {
    pub fn connect(addr: &str) -> Result<Self, ProtocolError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self { stream })
    }
}

impl Link for TcpLink {
    fn request(&mut self, msg: &Message) -> Result<Option<Message>, ProtocolError> {
        write_frame(&mut self.stream, msg)?;
        if !msg.expects_reply() {
            return Ok(None);
        }
        read_frame(&mut self.stream)?.map(Some).ok_or(ProtocolError::Closed)
    }
}

/// Serves verifier frames from `stream` until it closes.
pub fn serve<S: Read + Write, P: Prover>(
    stream: &mut S,
    endpoint: &mut ProverEndpoint<P>,
) -> Result<(), ProtocolError> {
    while let Some(msg) = read_frame(stream)? {
        if let Some(reply) = endpoint.respond(msg)? {
            write_frame(stream, &reply)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub rounds: usize,
    pub retry_cap: usize,
    pub reuse_key: bool,
    /// Forces every challenge; `None` flips a fair coin.
    pub challenge: Option<Challenge>,
}

impl SessionConfig {
    pub fn new(rounds: usize) -> Self {
        Self { rounds, retry_cap: DEFAULT_RETRY_CAP, reuse_key: false, challenge: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionStats {
    /// Rounds that reached accept or reject.
    pub rounds: usize,
    pub accepted: usize,
    /// Rounds started, including retried ones.
    pub attempts: usize,
    pub gen_rounds: usize,
    pub gen_passes: usize,
    pub test_rounds: usize,
    pub test_passes: usize,
    pub image_rejects: usize,
    pub red_retries: usize,
    pub zero_d_retries: usize,
}

impl SessionStats {
    pub fn preimage_rate(&self) -> f64 {
        ratio(self.gen_passes, self.gen_rounds)
    }

    pub fn equation_rate(&self) -> f64 {
        ratio(self.test_passes, self.test_rounds)
    }

    pub fn accept_rate(&self) -> f64 {
        ratio(self.accepted, self.rounds)
    }

    pub fn to_text(&self) -> String {
        format!(
            "rounds={}\naccepted={}\nattempts={}\ngen_rounds={}\ngen_passes={}\ntest_rounds={}\ntest_passes={}\n\
             image_rejects={}\nred_retries={}\nzero_d_retries={}\n",
            self.rounds,
            self.accepted,
            self.attempts,
            self.gen_rounds,
            self.gen_passes,
            self.test_rounds,
            self.test_passes,
            self.image_rejects,
            self.red_retries,
            self.zero_d_retries
        )
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone)]
pub struct SessionReport {
    pub stats: SessionStats,
    pub transcripts: Vec<Transcript>,
}

impl SessionReport {
    /// A session accepts iff every completed round accepted.
    pub fn accepted(&self) -> bool {
        self.stats.rounds > 0 && self.stats.accepted == self.stats.rounds
    }

    pub fn exit_code(&self) -> i32 {
        if self.accepted() {
            0
        } else {
            1
        }
    }
}

/// Runs `config.rounds` non-retried rounds against whatever sits behind
/// `link`.
pub fn run_protocol<R: Rng, L: Link>(
    params: &NtcfParams,
    verifier_rng: R,
    link: &mut L,
    config: &SessionConfig,
) -> Result<SessionReport, ProtocolError> {
    if config.rounds == 0 {
        return Err(ProtocolError::ZeroRounds);
    }
    let mut verifier =
        Verifier::new(params.clone(), verifier_rng)?.reuse_key(config.reuse_key).force_challenge(config.challenge);
    let mut stats = SessionStats::default();
    let mut transcripts = Vec::new();
    let mut consecutive = 0;
    while stats.rounds < config.rounds {
        stats.attempts += 1;
        let started = Instant::now();
        let mut t = Transcript::new(stats.attempts);
        let key = verifier.new_round()?;
        t.push(&key);
        let image = link.request(&key)?.ok_or(ProtocolError::Closed)?;
        t.push(&image);
        let mut next = verifier.handle(image)?;
        t.push(&next);
        let mut challenge = None;
        if let Message::Challenge(c) = next {
            challenge = Some(c);
            let answer = link.request(&next)?.ok_or(ProtocolError::Closed)?;
            t.push(&answer);
            next = verifier.handle(answer)?;
            t.push(&next);
        }
        link.request(&next)?;
        t.elapsed = started.elapsed();
        transcripts.push(t);

        let Message::RoundResult { verdict, reason } = next else {
            unreachable!("verifier ends every round with a result")
        };
        if verdict == Verdict::Retry {
            if reason.contains("RED") {
                stats.red_retries += 1;
            } else {
                stats.zero_d_retries += 1;
            }
            consecutive += 1;
            if consecutive > config.retry_cap {
                return Err(ProtocolError::RetryCapExceeded { consecutive, last_reason: reason });
            }
            continue;
        }
        consecutive = 0;
        stats.rounds += 1;
        let pass = verdict == Verdict::Accept;
        stats.accepted += pass as usize;
        match challenge {
            Some(Challenge::Generation) => {
                stats.gen_rounds += 1;
                stats.gen_passes += pass as usize;
            }
            Some(Challenge::Test) => {
                stats.test_rounds += 1;
                stats.test_passes += pass as usize;
            }
            None => stats.image_rejects += 1,
        }
    }
    Ok(SessionReport { stats, transcripts })
}

/// Runs a session over loopback TCP: the prover serves on `addr` from its
/// own thread and the verifier connects to it.
pub fn run_over_tcp<R, P>(
    params: &NtcfParams,
    verifier_rng: R,
    prover: P,
    config: &SessionConfig,
    addr: &str,
) -> Result<SessionReport, ProtocolError>
where
    R: Rng,
    P: Prover + Send + 'static,
{
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?.to_string();
    let server = thread::spawn(move || -> Result<(), ProtocolError> {
        let (mut stream, _) = listener.accept()?;
        stream.set_nodelay(true)?;
        serve(&mut stream, &mut ProverEndpoint::new(prover))
    });
    let report = {
        let mut link = TcpLink::connect(&local)?;
        run_protocol(params, verifier_rng, &mut link, config)
    };
    let served = server.join().map_err(|_| ProtocolError::Config("prover thread panicked".into()))?;
    // The prover's own error explains a verifier-side `Closed`.
    match (report, served) {
        (Ok(r), Ok(())) => Ok(r),
        (_, Err(e)) | (Err(e), _) => Err(e),
    }
}
