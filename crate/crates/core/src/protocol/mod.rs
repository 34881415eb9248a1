//! Interactive proof of quantumness: message types, framing, both
//! endpoints, transports and the multi-round driver.

mod message;
mod session;
mod transcript;
mod verifier;

use thiserror::Error;

pub use message::{
    frame_decode, frame_encode, read_frame, write_frame, Challenge, FrameError, Message, Verdict, MAX_FRAME,
};
pub use session::{
    run_over_tcp, run_protocol, serve, InProcessLink, Link, ProverEndpoint, SessionConfig, SessionReport, SessionStats,
    TcpLink, DEFAULT_RETRY_CAP,
};
pub use transcript::{transcripts_to_text, Transcript, TRANSCRIPT_HEADER};
pub use verifier::{Phase, RoundOutcome, Verifier};

use crate::prover::ProverError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("message `{got}` is not valid in phase {phase}")]
    UnexpectedMessage { phase: String, got: String },
    #[error("bad payload: {0}")]
    Payload(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("prover failed: {0}")]
    Prover(#[from] ProverError),
    #[error("peer closed the connection")]
    Closed,
    #[error("{consecutive} consecutive retries (last: {last_reason}); giving up")]
    RetryCapExceeded { consecutive: usize, last_reason: String },
    #[error("session needs at least one round")]
    ZeroRounds,
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl ProtocolError {
    /// Process exit code for a failed session.
    pub fn exit_code(&self) -> i32 {
        2
    }
}
