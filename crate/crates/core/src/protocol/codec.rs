//! ASCII line codec for the central/onboard link.
//!
//! ```text
//! SMA <ii> <b>\n    ii: two decimal digits 00..19, b: 0 or 1
//! ALLOFF\n
//! PING\n
//! ```
//! Responses are `OK\n` or `ERR <cc>\n` with a two-digit error code.

use std::fmt;

use thiserror::Error;

use crate::primitives::{ChannelMask, CHANNEL_COUNT};

/// Longest valid frame is `SMA 19 1\n`; anything past this is garbage.
pub const MAX_FRAME_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("frame is not newline-terminated")]
    MissingTerminator,
    #[error("frame longer than {MAX_FRAME_LEN} bytes")]
    TooLong,
    #[error("frame contains non-printable or non-ASCII bytes")]
    InvalidBytes,
    #[error("empty frame")]
    Empty,
    #[error("unknown command `{0}`")]
    UnknownCommand(String),
    #[error("malformed SMA index `{0}`")]
    BadIndex(String),
    #[error("SMA index {0} out of range 00..{max}", max = CHANNEL_COUNT - 1)]
    IndexOutOfRange(u8),
    #[error("malformed level `{0}`")]
    BadLevel(String),
    #[error("missing {0}")]
    MissingField(&'static str),
    #[error("unexpected trailing token `{0}`")]
    TrailingToken(String),
    #[error("malformed error code `{0}`")]
    BadErrorCode(String),
}

/// Actuator channel index, always `< CHANNEL_COUNT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SmaIndex(u8);

impl SmaIndex {
    pub fn new(index: u8) -> Result<Self, DecodeError> {
        if (index as usize) < CHANNEL_COUNT {
            Ok(Self(index))
        } else {
            Err(DecodeError::IndexOutOfRange(index))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    SmaSet { index: SmaIndex, on: bool },
    AllOff,
    Ping,
}

impl Command {
    pub fn sma(index: u8, on: bool) -> Result<Self, DecodeError> {
        Ok(Command::SmaSet {
            index: SmaIndex::new(index)?,
            on,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        self.to_string().into_bytes()
    }
}

impl fmt::Display for Command {
    /// Writes the full frame, including the trailing newline.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::SmaSet { index, on } => writeln!(f, "SMA {:02} {}", index.0, u8::from(*on)),
            Command::AllOff => writeln!(f, "ALLOFF"),
            Command::Ping => writeln!(f, "PING"),
        }
    }
}

pub fn encode(command: &Command) -> Vec<u8> {
    command.encode()
}

/// Strips the terminator and checks the frame is printable ASCII.
fn frame_text(bytes: &[u8]) -> Result<&str, DecodeError> {
    if bytes.len() > MAX_FRAME_LEN {
        return Err(DecodeError::TooLong);
    }
    let body = bytes
        .strip_suffix(b"\n")
        .ok_or(DecodeError::MissingTerminator)?;
    if !body.iter().all(|b| (0x20..0x7f).contains(b)) {
        return Err(DecodeError::InvalidBytes);
    }
    let text = std::str::from_utf8(body).map_err(|_| DecodeError::InvalidBytes)?;
    if text.is_empty() {
        return Err(DecodeError::Empty);
    }
    Ok(text)
}

fn two_digits(token: &str) -> Option<u8> {
    (token.len() == 2 && token.bytes().all(|b| b.is_ascii_digit()))
        .then(|| token.parse().expect("two ASCII digits"))
}

pub fn decode(bytes: &[u8]) -> Result<Command, DecodeError> {
    let text = frame_text(bytes)?;
    let mut tokens = text.split(' ');
    let verb = tokens.next().unwrap_or_default();
    let command = match verb {
        "SMA" => {
            let idx = tokens.next().ok_or(DecodeError::MissingField("index"))?;
            let index = two_digits(idx).ok_or_else(|| DecodeError::BadIndex(idx.to_owned()))?;
            let level = tokens.next().ok_or(DecodeError::MissingField("level"))?;
            let on = match level {
                "0" => false,
                "1" => true,
                other => return Err(DecodeError::BadLevel(other.to_owned())),
            };
            Command::sma(index, on)?
        }
        "ALLOFF" => Command::AllOff,
        "PING" => Command::Ping,
        other => return Err(DecodeError::UnknownCommand(other.to_owned())),
    };
    if let Some(extra) = tokens.next() {
        return Err(DecodeError::TrailingToken(extra.to_owned()));
    }
    Ok(command)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    Malformed = 1,
    IndexOutOfRange = 2,
    TimeRegression = 3,
}

impl ErrorCode {
    pub fn code(self) -> u8 {
        self as u8
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(ErrorCode::Malformed),
            2 => Some(ErrorCode::IndexOutOfRange),
            3 => Some(ErrorCode::TimeRegression),
            _ => None,
        }
    }
}

impl From<&DecodeError> for ErrorCode {
    fn from(e: &DecodeError) -> Self {
        match e {
            DecodeError::IndexOutOfRange(_) => ErrorCode::IndexOutOfRange,
            _ => ErrorCode::Malformed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Response {
    Ok,
    Err(ErrorCode),
}

impl Response {
    pub fn encode(&self) -> Vec<u8> {
        self.to_string().into_bytes()
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Response::Ok => writeln!(f, "OK"),
            Response::Err(code) => writeln!(f, "ERR {:02}", code.code()),
        }
    }
}

pub fn decode_response(bytes: &[u8]) -> Result<Response, DecodeError> {
    let text = frame_text(bytes)?;
    match text.split_once(' ') {
        None if text == "OK" => Ok(Response::Ok),
        Some(("ERR", code)) => two_digits(code)
            .and_then(ErrorCode::from_code)
            .map(Response::Err)
            .ok_or_else(|| DecodeError::BadErrorCode(code.to_owned())),
        _ => Err(DecodeError::UnknownCommand(text.to_owned())),
    }
}

/// Command sequence that leaves exactly `mask` active from any prior state.
pub fn commands_for_mask(mask: ChannelMask) -> Vec<Command> {
    std::iter::once(Command::AllOff)
        .chain(
            mask.iter()
                .map(|ch| Command::sma(ch, true).expect("mask channel in range")),
        )
        .collect()
}

/// Reassembles newline-terminated frames from a byte stream.
#[derive(Debug, Default, Clone)]
pub struct LineDecoder {
    buf: Vec<u8>,
    overflowed: bool,
}

impl LineDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one byte; returns a complete frame when a newline arrives.
    /// Oversized lines come back as a single frame that fails to decode.
    pub fn push(&mut self, byte: u8) -> Option<Vec<u8>> {
        if byte == b'\n' {
            let mut frame = std::mem::take(&mut self.buf);
            if std::mem::take(&mut self.overflowed) {
                frame.resize(MAX_FRAME_LEN + 1, b'?');
            }
            frame.push(b'\n');
            return Some(frame);
        }
        if self.buf.len() >= MAX_FRAME_LEN {
            self.overflowed = true;
        } else {
            self.buf.push(byte);
        }
        None
    }

    pub fn extend(&mut self, bytes: &[u8]) -> Vec<Vec<u8>> {
        bytes.iter().filter_map(|&b| self.push(b)).collect()
    }
}
