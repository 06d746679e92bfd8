//! Relay-to-controller wire protocol.
//!
//! Frames are newline-terminated ASCII lines:
//!
//! ```plain
//! M <seq> <joint> <decideg> <ms> *<ck>
//! S <seq> *<ck>
//! P <seq> *<ck>
//! ```
//!
//! `<ck>` is the XOR of every byte between the leading letter and the `*`
//! (both spaces included), written as two lowercase hex digits. The
//! controller answers `A <seq>` to acknowledge or `N <seq>` to reject.
//! Numbers are plain decimal with no sign except a leading `-` on negative
//! angles, and no leading zeros.

mod compile;
mod link;

use std::fmt;

use thiserror::Error;

use crate::kinematics::{Joint, JOINT_COUNT};

pub use compile::{compile_sequence_to_commands, to_decideg, CompileError, TimedCommand};
pub use link::{
    send_reliable, Delivery, Exchange, LinkConfig, LinkError, SendError, StreamTransport, Transport,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("checksum mismatch: frame says {found:02x}, payload gives {computed:02x}")]
    ChecksumMismatch { found: u8, computed: u8 },
    #[error("malformed frame: {0}")]
    Parse(String),
    #[error("field out of range: {0}")]
    Range(String),
}

impl FrameError {
    pub fn kind(&self) -> &'static str {
        match self {
            FrameError::ChecksumMismatch { .. } => "checksum_mismatch",
            FrameError::Parse(_) => "parse_error",
            FrameError::Range(_) => "range_error",
        }
    }
}

fn parse_err(msg: impl Into<String>) -> FrameError {
    FrameError::Parse(msg.into())
}

fn range_err(msg: impl Into<String>) -> FrameError {
    FrameError::Range(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Move {
        joint: u8,
        target_decideg: i32,
        motion_ms: u32,
    },
    Stop,
    Ping,
}

impl Command {
    /// Checked MOVE constructor.
    pub fn move_joint(
        joint: usize,
        target_decideg: i32,
        motion_ms: u32,
    ) -> Result<Self, FrameError> {
        let cmd = Command::Move {
            joint: u8::try_from(joint).map_err(|_| range_err(format!("joint {joint}")))?,
            target_decideg,
            motion_ms,
        };
        cmd.check()?;
        Ok(cmd)
    }

    pub fn check(&self) -> Result<(), FrameError> {
        if let Command::Move {
            joint,
            target_decideg,
            ..
        } = *self
        {
            let joint = Joint::from_index(joint as usize)
                .map_err(|_| range_err(format!("joint {joint} not in 0..{JOINT_COUNT}")))?;
            let spec = joint.spec();
            let (lo, hi) = ((spec.min_deg * 10.0) as i32, (spec.max_deg * 10.0) as i32);
            if !(lo..=hi).contains(&target_decideg) {
                return Err(range_err(format!(
                    "{joint} target {target_decideg} outside [{lo}, {hi}] decidegrees"
                )));
            }
        }
        Ok(())
    }

    pub fn letter(&self) -> u8 {
        match self {
            Command::Move { .. } => b'M',
            Command::Stop => b'S',
            Command::Ping => b'P',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Frame {
    pub seq: u8,
    pub command: Command,
}

impl Frame {
    pub fn new(seq: u8, command: Command) -> Self {
        Frame { seq, command }
    }

    /// The bytes between the letter and `*`.
    fn payload(&self) -> String {
        match self.command {
            Command::Move {
                joint,
                target_decideg,
                motion_ms,
            } => format!(" {} {joint} {target_decideg} {motion_ms} ", self.seq),
            Command::Stop | Command::Ping => format!(" {} ", self.seq),
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let payload = self.payload();
        write!(
            f,
            "{}{}*{:02x}",
            self.command.letter() as char,
            payload,
            checksum(payload.as_bytes())
        )
    }
}

pub fn checksum(payload: &[u8]) -> u8 {
    payload.iter().fold(0, |acc, b| acc ^ b)
}

pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, FrameError> {
    frame.command.check()?;
    let mut out = frame.to_string().into_bytes();
    out.push(b'\n');
    Ok(out)
}

/// Decodes one frame line; the trailing newline is optional. Never panics.
pub fn decode_frame(bytes: &[u8]) -> Result<Frame, FrameError> {
    let line = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    if !line.iter().all(|b| b.is_ascii_graphic() || *b == b' ') {
        return Err(parse_err("non-printable byte in frame"));
    }
    if line.len() < 6 {
        return Err(parse_err("frame too short"));
    }
    let star = line.len() - 3;
    if line[star] != b'*' {
        return Err(parse_err("missing `*` before checksum"));
    }
    let found = parse_hex_byte(&line[star + 1..])?;
    let payload = &line[1..star];
    let computed = checksum(payload);
    if found != computed {
        return Err(FrameError::ChecksumMismatch { found, computed });
    }
    let fields = split_fields(payload)?;
    let letter = line[0];
    let expected = match letter {
        b'M' => 4,
        b'S' | b'P' => 1,
        other => return Err(parse_err(format!("unknown frame type `{}`", other as char))),
    };
    if fields.len() != expected {
        return Err(parse_err(format!(
            "`{}` frame takes {expected} field(s), got {}",
            letter as char,
            fields.len()
        )));
    }
    let seq = parse_seq(fields[0])?;
    let command = match letter {
        b'M' => {
            let joint = parse_unsigned(fields[1])?;
            let target = parse_signed(fields[2])?;
            let motion_ms = parse_unsigned(fields[3])?;
            if joint >= JOINT_COUNT as u64 {
                return Err(range_err(format!("joint {joint} not in 0..{JOINT_COUNT}")));
            }
            let target_decideg =
                i32::try_from(target).map_err(|_| range_err(format!("target {target}")))?;
            let motion_ms = u32::try_from(motion_ms)
                .map_err(|_| range_err(format!("motion {motion_ms} ms")))?;
            let cmd = Command::Move {
                joint: joint as u8,
                target_decideg,
                motion_ms,
            };
            cmd.check()?;
            cmd
        }
        b'S' => Command::Stop,
        _ => Command::Ping,
    };
    Ok(Frame { seq, command })
}

fn parse_hex_byte(digits: &[u8]) -> Result<u8, FrameError> {
    let nibble = |d: u8| match d {
        b'0'..=b'9' => Ok(d - b'0'),
        b'a'..=b'f' => Ok(d - b'a' + 10),
        _ => Err(parse_err("checksum must be two lowercase hex digits")),
    };
    Ok(nibble(digits[0])? << 4 | nibble(digits[1])?)
}

fn split_fields(payload: &[u8]) -> Result<Vec<&str>, FrameError> {
    // payload is ASCII here, so the str conversion cannot fail
    let text = std::str::from_utf8(payload).map_err(|_| parse_err("non-ASCII payload"))?;
    let inner = text
        .strip_prefix(' ')
        .and_then(|t| t.strip_suffix(' '))
        .ok_or_else(|| parse_err("fields must be space-delimited"))?;
    let fields: Vec<&str> = inner.split(' ').collect();
    if fields.iter().any(|f| f.is_empty()) {
        return Err(parse_err("empty field"));
    }
    Ok(fields)
}

fn parse_unsigned(token: &str) -> Result<u64, FrameError> {
    if !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(parse_err(format!("`{token}` is not a number")));
    }
    if token.len() > 1 && token.starts_with('0') {
        return Err(parse_err(format!("`{token}` has a leading zero")));
    }
    token
        .parse::<u64>()
        .map_err(|_| range_err(format!("`{token}` is too large")))
}

fn parse_signed(token: &str) -> Result<i64, FrameError> {
    match token.strip_prefix('-') {
        Some("0") => Err(parse_err("`-0` is not canonical")),
        Some(digits) => {
            let v = parse_unsigned(digits)?;
            i64::try_from(v)
                .map(|v| -v)
                .map_err(|_| range_err(format!("`{token}` is too large")))
        }
        None => {
            let v = parse_unsigned(token)?;
            i64::try_from(v).map_err(|_| range_err(format!("`{token}` is too large")))
        }
    }
}

fn parse_seq(token: &str) -> Result<u8, FrameError> {
    let v = parse_unsigned(token)?;
    u8::try_from(v).map_err(|_| range_err(format!("sequence number {v} not in 0..=255")))
}

/// Controller reply to a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reply {
    Ack(u8),
    Nak(u8),
}

impl Reply {
    pub fn seq(&self) -> u8 {
        match *self {
            Reply::Ack(s) | Reply::Nak(s) => s,
        }
    }
}

pub fn encode_reply(reply: &Reply) -> Vec<u8> {
    match reply {
        Reply::Ack(s) => format!("A {s}\n").into_bytes(),
        Reply::Nak(s) => format!("N {s}\n").into_bytes(),
    }
}

pub fn decode_reply(bytes: &[u8]) -> Result<Reply, FrameError> {
    let line = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    let text = std::str::from_utf8(line).map_err(|_| parse_err("non-UTF-8 reply"))?;
    let (letter, seq) = text
        .split_once(' ')
        .ok_or_else(|| parse_err("reply must be `<A|N> <seq>`"))?;
    let seq = parse_seq(seq)?;
    match letter {
        "A" => Ok(Reply::Ack(seq)),
        "N" => Ok(Reply::Nak(seq)),
        other => Err(parse_err(format!("unknown reply type `{other}`"))),
    }
}

/// Best-effort sequence number of a frame that failed to decode, used to
/// address the nak.
pub fn salvage_seq(bytes: &[u8]) -> Option<u8> {
    let line = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    let text = std::str::from_utf8(line).ok()?;
    let mut parts = text.split(' ');
    let letter = parts.next()?;
    if letter.len() != 1 {
        return None;
    }
    parse_seq(parts.next()?).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ping_golden() {
        // payload " 0 " = 0x20 ^ 0x30 ^ 0x20 = 0x30
        let frame = Frame::new(0, Command::Ping);
        let bytes = encode_frame(&frame).unwrap();
        assert_eq!(bytes, b"P 0 *30\n");
        assert_eq!(decode_frame(&bytes).unwrap(), frame);
    }

    #[test]
    fn move_golden() {
        let frame = Frame::new(17, Command::move_joint(4, 400, 800).unwrap());
        let text = String::from_utf8(encode_frame(&frame).unwrap()).unwrap();
        let payload = " 17 4 400 800 ";
        let ck = payload.bytes().fold(0u8, |a, b| a ^ b);
        assert_eq!(text, format!("M{payload}*{ck:02x}\n"));
        assert_eq!(decode_frame(text.as_bytes()).unwrap(), frame);
        // newline is optional on decode
        assert_eq!(decode_frame(text.trim_end().as_bytes()).unwrap(), frame);
    }

    #[test]
    fn stop_round_trips() {
        let frame = Frame::new(255, Command::Stop);
        assert_eq!(decode_frame(&encode_frame(&frame).unwrap()).unwrap(), frame);
    }

    fn with_checksum(letter: char, payload: &str) -> String {
        format!("{letter}{payload}*{:02x}\n", checksum(payload.as_bytes()))
    }

    #[test]
    fn joint_sixteen_is_a_range_error() {
        let line = with_checksum('M', " 3 16 0 100 ");
        assert!(matches!(
            decode_frame(line.as_bytes()),
            Err(FrameError::Range(_))
        ));
        assert!(matches!(
            Command::move_joint(16, 0, 100),
            Err(FrameError::Range(_))
        ));
    }

    #[test]
    fn out_of_range_fields() {
        for payload in [
            " 256 ",
            " 1 4 401 100 ",
            " 1 7 -1 100 ",
            " 1 0 0 4294967296 ",
        ] {
            let letter = if payload.split(' ').count() > 3 {
                'M'
            } else {
                'P'
            };
            let line = with_checksum(letter, payload);
            assert!(
                matches!(decode_frame(line.as_bytes()), Err(FrameError::Range(_))),
                "{line:?}"
            );
        }
    }

    #[test]
    fn grammar_errors() {
        for line in [
            with_checksum('M', " 1 4 400 "),
            with_checksum('X', " 1 "),
            with_checksum('P', " 01 "),
            with_checksum('M', " 1 4 -0 100 "),
            with_checksum('M', " 1 4 +4 100 "),
            with_checksum('P', "  1 "),
            with_checksum('P', " 1"),
            "P 0 *3".to_string(),
            "P 0 *3G\n".to_string(),
            "P 0 *30\n\n".to_string(),
            "P 0 #30\n".to_string(),
            "P 0 *30\r\n".to_string(),
        ] {
            assert!(
                matches!(decode_frame(line.as_bytes()), Err(FrameError::Parse(_))),
                "{line:?}"
            );
        }
    }

    #[test]
    fn checksum_mismatch_is_detected() {
        assert_eq!(
            decode_frame(b"P 0 *31\n"),
            Err(FrameError::ChecksumMismatch {
                found: 0x31,
                computed: 0x30
            })
        );
    }

    #[test]
    fn replies_round_trip() {
        for r in [Reply::Ack(0), Reply::Nak(200)] {
            assert_eq!(decode_reply(&encode_reply(&r)).unwrap(), r);
        }
        assert!(decode_reply(b"A\n").is_err());
        assert!(decode_reply(b"Q 1\n").is_err());
    }

    #[test]
    fn salvage_reads_the_sequence_number() {
        assert_eq!(salvage_seq(b"M 12 4 400 800 *00\n"), Some(12));
        assert_eq!(salvage_seq(b"garbage"), None);
        assert_eq!(salvage_seq(b"M x"), None);
    }
}
