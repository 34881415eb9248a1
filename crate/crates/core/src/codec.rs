//! Canonical text encoding: one `name=value` field per line, vectors as
//! space-separated decimals, matrices as a `rows cols` header followed by
//! one line per row. Readers consume fields strictly in order, so every
//! value has exactly one encoding.

use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct CodecError {
    pub line: usize,
    pub message: String,
}

/// Builds a canonical text record.
#[derive(Debug, Default, Clone)]
pub struct TextWriter {
    out: String,
}

impl TextWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn line(&mut self, text: &str) -> &mut Self {
        self.out.push_str(text);
        self.out.push('\n');
        self
    }

    pub fn field(&mut self, name: &str, value: impl Display) -> &mut Self {
        self.out.push_str(&format!("{name}={value}\n"));
        self
    }

    pub fn vector<T: Display>(&mut self, name: &str, values: &[T]) -> &mut Self {
        self.field(name, join(values))
    }

    pub fn matrix<T: Display>(&mut self, name: &str, rows: usize, cols: usize, data: &[T]) -> &mut Self {
        self.field(name, format_args!("{rows} {cols}"));
        for r in 0..rows {
            self.line(&join(&data[r * cols..(r + 1) * cols]));
        }
        self
    }

    /// Appends another record verbatim.
    pub fn raw(&mut self, text: &str) -> &mut Self {
        self.out.push_str(text);
        self
    }

    pub fn finish(&mut self) -> String {
        std::mem::take(&mut self.out)
    }
}

fn join<T: Display>(values: &[T]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&v.to_string());
    }
    s
}

/// Strict in-order reader for records produced by [`TextWriter`].
#[derive(Debug, Clone)]
pub struct TextReader<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> TextReader<'a> {
    pub fn new(text: &'a str) -> Self {
        let body = text.strip_suffix('\n').unwrap_or(text);
        let lines = if body.is_empty() { Vec::new() } else { body.split('\n').collect() };
        Self { lines, pos: 0 }
    }

    pub fn error(&self, message: impl Into<String>) -> CodecError {
        CodecError { line: self.pos + 1, message: message.into() }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.lines.len()
    }

    pub fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    pub fn next_line(&mut self) -> Result<&'a str, CodecError> {
        let line = self.peek().ok_or_else(|| self.error("unexpected end of record"))?;
        self.pos += 1;
        Ok(line)
    }

    pub fn expect_line(&mut self, expected: &str) -> Result<(), CodecError> {
        let line = self.next_line()?;
        if line != expected {
            self.pos -= 1;
            return Err(self.error(format!("expected `{expected}`, found `{line}`")));
        }
        Ok(())
    }

    /// Raw text of field `name`.
    pub fn field(&mut self, name: &str) -> Result<&'a str, CodecError> {
        let line = self.next_line()?;
        match line.split_once('=') {
            Some((key, value)) if key == name => Ok(value),
            _ => {
                self.pos -= 1;
                Err(self.error(format!("expected field `{name}`, found `{line}`")))
            }
        }
    }

    pub fn parse<T: FromStr>(&mut self, name: &str) -> Result<T, CodecError> {
        let raw = self.field(name)?;
        raw.parse().map_err(|_| {
            self.pos -= 1;
            self.error(format!("field `{name}`: cannot parse `{raw}`"))
        })
    }

    pub fn vector<T: FromStr>(&mut self, name: &str) -> Result<Vec<T>, CodecError> {
        let raw = self.field(name)?;
        self.split_values(raw, name)
    }

    fn split_values<T: FromStr>(&self, raw: &str, name: &str) -> Result<Vec<T>, CodecError> {
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(' ')
            .map(|tok| {
                tok.parse().map_err(|_| CodecError { line: self.pos, message: format!("`{name}`: bad entry `{tok}`") })
            })
            .collect()
    }

    /// Matrix field: returns `(rows, cols, row-major data)`.
    pub fn matrix<T: FromStr>(&mut self, name: &str) -> Result<(usize, usize, Vec<T>), CodecError> {
        let header = self.field(name)?;
        let dims: Vec<usize> = self.split_values(header, name)?;
        let [rows, cols] = dims[..] else {
            return Err(self.error(format!("`{name}`: header must be `rows cols`")));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next_line()?;
            let row: Vec<T> = self.split_values(line, name)?;
            if row.len() != cols {
                return Err(self.error(format!("`{name}`: row has {} entries, expected {cols}", row.len())));
            }
            data.extend(row);
        }
        Ok((rows, cols, data))
    }

    /// Fails unless every line was consumed.
    pub fn finish(&self) -> Result<(), CodecError> {
        match self.peek() {
            None => Ok(()),
            Some(line) => Err(self.error(format!("trailing content `{line}`"))),
        }
    }
}
