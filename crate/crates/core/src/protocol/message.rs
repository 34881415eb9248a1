//! Protocol messages and their wire frames.
//!
//! Frame: 4-byte big-endian payload length, 1-byte tag, then the payload in
//! canonical text.

use std::fmt;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::codec::{CodecError, TextReader, TextWriter};
use crate::ntcf::NtcfKey;
use crate::zq::{BitString, Modulus, ZqVector};

/// Frames above this size are refused before allocation.
pub const MAX_FRAME: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Challenge {
    Generation,
    Test,
}

impl fmt::Display for Challenge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Challenge::Generation => "G",
            Challenge::Test => "T",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject,
    /// Round discarded (RED failure or `d = 0`); a fresh round follows.
    Retry,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
            Verdict::Retry => "retry",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Key(NtcfKey),
    Image(ZqVector),
    Challenge(Challenge),
    PreimageResp { b: u32, x: ZqVector },
    EquationResp { b_prime: u32, c: u8, d: BitString },
    RedFailure,
    RoundResult { verdict: Verdict, reason: String },
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame length mismatch: header says {expected} payload bytes, found {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("unknown message tag {0}")]
    BadTag(u8),
    #[error("payload is not UTF-8")]
    Utf8,
    #[error("malformed payload: {0}")]
    Payload(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl From<CodecError> for FrameError {
    fn from(e: CodecError) -> Self {
        FrameError::Payload(e.to_string())
    }
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Message::Key(_) => 1,
            Message::Image(_) => 2,
            Message::Challenge(_) => 3,
            Message::PreimageResp { .. } => 4,
            Message::EquationResp { .. } => 5,
            Message::RedFailure => 6,
            Message::RoundResult { .. } => 7,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Message::Key(_) => "key",
            Message::Image(_) => "image",
            Message::Challenge(_) => "challenge",
            Message::PreimageResp { .. } => "preimage",
            Message::EquationResp { .. } => "equation",
            Message::RedFailure => "red-failure",
            Message::RoundResult { .. } => "round-result",
        }
    }

    /// Canonical text payload.
    pub fn payload(&self) -> String {
        let mut w = TextWriter::new();
        match self {
            Message::Key(k) => return k.to_text(),
            Message::Image(y) => {
                w.field("q", y.modulus().q()).vector("y", y.entries());
            }
            Message::Challenge(c) => {
                w.field("challenge", c);
            }
            Message::PreimageResp { b, x } => {
                w.field("q", x.modulus().q()).field("b", b).vector("x", x.entries());
            }
            Message::EquationResp { b_prime, c, d } => {
                w.field("b_prime", b_prime).field("c", c).vector("d", d.bits());
            }
            Message::RedFailure => {}
            Message::RoundResult { verdict, reason } => {
                w.field("verdict", verdict).field("reason", reason.replace('\n', " "));
            }
        }
        w.finish()
    }

    pub fn from_payload(tag: u8, payload: &str) -> Result<Self, FrameError> {
        if tag == 1 {
            return NtcfKey::from_text(payload).map(Message::Key).map_err(|e| FrameError::Payload(e.to_string()));
        }
        let mut r = TextReader::new(payload);
        let msg = match tag {
            2 => {
                let q = modulus(&mut r)?;
                Message::Image(vector(&mut r, "y", q)?)
            }
            3 => Message::Challenge(match r.field("challenge")? {
                "G" => Challenge::Generation,
                "T" => Challenge::Test,
                other => return Err(FrameError::Payload(format!("unknown challenge `{other}`"))),
            }),
            4 => {
                let q = modulus(&mut r)?;
                let b = r.parse("b")?;
                Message::PreimageResp { b, x: vector(&mut r, "x", q)? }
            }
            5 => {
                let b_prime = r.parse("b_prime")?;
                let c: u8 = r.parse("c")?;
                if c > 1 {
                    return Err(FrameError::Payload(format!("c = {c} is not a bit")));
                }
                let d = BitString::new(r.vector("d")?).map_err(|e| FrameError::Payload(e.to_string()))?;
                Message::EquationResp { b_prime, c, d }
            }
            6 => Message::RedFailure,
            7 => {
                let verdict = match r.field("verdict")? {
                    "accept" => Verdict::Accept,
                    "reject" => Verdict::Reject,
                    "retry" => Verdict::Retry,
                    other => return Err(FrameError::Payload(format!("unknown verdict `{other}`"))),
                };
                Message::RoundResult { verdict, reason: r.field("reason")?.to_string() }
            }
            other => return Err(FrameError::BadTag(other)),
        };
        r.finish()?;
        Ok(msg)
    }

    /// Whether the receiving party answers this message.
    pub fn expects_reply(&self) -> bool {
        matches!(self, Message::Key(_) | Message::Challenge(_))
    }
}

fn modulus(r: &mut TextReader<'_>) -> Result<Modulus, FrameError> {
    Modulus::new(r.parse("q")?).map_err(|e| FrameError::Payload(e.to_string()))
}

fn vector(r: &mut TextReader<'_>, name: &str, q: Modulus) -> Result<ZqVector, FrameError> {
    ZqVector::new(r.vector(name)?, q).map_err(|e| FrameError::Payload(e.to_string()))
}

pub fn frame_encode(msg: &Message) -> Vec<u8> {
    let payload = msg.payload();
    let mut out = Vec::with_capacity(5 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.push(msg.tag());
    out.extend_from_slice(payload.as_bytes());
    out
}

/// Decodes exactly one frame occupying all of `bytes`.
pub fn frame_decode(bytes: &[u8]) -> Result<Message, FrameError> {
    if bytes.len() < 5 {
        return Err(FrameError::LengthMismatch { expected: 5, got: bytes.len() });
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().expect("four bytes")) as usize;
    if len > MAX_FRAME {
        return Err(FrameError::TooLarge(len));
    }
    let body = &bytes[5..];
    if body.len() != len {
        return Err(FrameError::LengthMismatch { expected: len, got: body.len() });
    }
    let text = std::str::from_utf8(body).map_err(|_| FrameError::Utf8)?;
    Message::from_payload(bytes[4], text)
}

pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<(), FrameError> {
    w.write_all(&frame_encode(msg))?;
    w.flush()?;
    Ok(())
}

/// Reads one frame; `None` on a clean end of stream between frames.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Message>, FrameError> {
    let mut header = [0u8; 5];
    let mut filled = 0;
    while filled < 5 {
        match r.read(&mut header[filled..])? {
            0 if filled == 0 => return Ok(None),
            0 => return Err(FrameError::LengthMismatch { expected: 5, got: filled }),
            k => filled += k,
        }
    }
    let len = u32::from_be_bytes(header[..4].try_into().expect("four bytes")) as usize;
    if len > MAX_FRAME {
        return Err(FrameError::TooLarge(len));
    }
    let mut body = vec![0u8; len];
    let mut got = 0;
    while got < len {
        match r.read(&mut body[got..])? {
            0 => return Err(FrameError::LengthMismatch { expected: len, got }),
            k => got += k,
        }
    }
    let text = std::str::from_utf8(&body).map_err(|_| FrameError::Utf8)?;
    Message::from_payload(header[4], text).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntcf::gen;
    use crate::params::NtcfParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn samples() -> Vec<Message> {
        let (key, _) = gen(&NtcfParams::tiny_exact(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let q = key.params.q;
        vec![
            Message::Key(key),
            Message::Image(ZqVector::new(vec![3, 6], q).unwrap()),
            Message::Challenge(Challenge::Generation),
            Message::Challenge(Challenge::Test),
            Message::PreimageResp { b: 2, x: ZqVector::new(vec![5], q).unwrap() },
            Message::EquationResp { b_prime: 1, c: 1, d: BitString::new(vec![0, 1, 1]).unwrap() },
            Message::RedFailure,
            Message::RoundResult { verdict: Verdict::Retry, reason: "d is all-zero".into() },
        ]
    }

    #[test]
    fn every_variant_round_trips() {
        for msg in samples() {
            let bytes = frame_encode(&msg);
            assert_eq!(frame_decode(&bytes).unwrap(), msg);
            assert_eq!(frame_encode(&frame_decode(&bytes).unwrap()), bytes);
            let mut cursor = io::Cursor::new(bytes.clone());
            assert_eq!(read_frame(&mut cursor).unwrap(), Some(msg));
            assert_eq!(read_frame(&mut cursor).unwrap(), None);
        }
    }

    #[test]
    fn malformed_frames_are_structured_errors() {
        let bytes = frame_encode(&Message::Challenge(Challenge::Test));
        assert!(matches!(frame_decode(&bytes[..bytes.len() - 1]), Err(FrameError::LengthMismatch { .. })));
        assert!(matches!(frame_decode(&bytes[..3]), Err(FrameError::LengthMismatch { .. })));
        let mut long = bytes.clone();
        long.push(b'\n');
        assert!(matches!(frame_decode(&long), Err(FrameError::LengthMismatch { .. })));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(frame_decode(&bad), Err(FrameError::BadTag(9))));
        let mut garbled = bytes;
        garbled[5] = b'x';
        assert!(matches!(frame_decode(&garbled), Err(FrameError::Payload(_))));
        let mut cursor = io::Cursor::new(frame_encode(&Message::RedFailure)[..3].to_vec());
        assert!(matches!(read_frame(&mut cursor), Err(FrameError::LengthMismatch { .. })));
    }

    #[test]
    fn equation_payload_rejects_non_bits() {
        assert!(Message::from_payload(5, "b_prime=1\nc=2\nd=0 1\n").is_err());
        assert!(Message::from_payload(5, "b_prime=1\nc=1\nd=0 3\n").is_err());
    }
}
