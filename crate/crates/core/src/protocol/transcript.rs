use std::time::Duration;

use super::message::Message;

pub const TRANSCRIPT_HEADER: &str = "transcript v1";

/// Messages of one attempted round, in order. `elapsed` is wall time and
/// is left out of both equality and the text form.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub attempt: usize,
    pub messages: Vec<Message>,
    pub elapsed: Duration,
}

impl PartialEq for Transcript {
    fn eq(&self, other: &Self) -> bool {
        self.attempt == other.attempt && self.messages == other.messages
    }
}

impl Transcript {
    pub fn new(attempt: usize) -> Self {
        Self { attempt, messages: Vec::new(), elapsed: Duration::ZERO }
    }

    pub fn push(&mut self, msg: &Message) {
        self.messages.push(msg.clone());
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("attempt={}\n", self.attempt);
        for msg in &self.messages {
            out.push_str("--- ");
            out.push_str(msg.name());
            out.push('\n');
            out.push_str(&msg.payload());
        }
        out
    }
}

pub fn transcripts_to_text(ts: &[Transcript]) -> String {
    let mut out = format!("{TRANSCRIPT_HEADER}\n");
    for t in ts {
        out.push_str(&t.to_text());
    }
    out
}
