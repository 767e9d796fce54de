//! Wire format for remote environments.
//!
//! ```text
//! +--------------------------+-------------------------------------+
//! | payload length: u32 (BE) | UTF-8 JSON {"type": ..., ..., "v": 1} |
//! +--------------------------+-------------------------------------+
//! ```
//!
//! Every message carries the protocol version `v`. Floats are written with
//! shortest round-trip formatting and parsed exactly, so values survive the
//! wire bit for bit.

use std::io::{ErrorKind, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Space;

pub const PROTOCOL_VERSION: u32 = 1;

/// Frames longer than this are refused when reading from a stream.
pub const MAX_STREAM_FRAME: usize = 64 * 1024 * 1024;

const MESSAGE_TYPES: [&str; 8] = [
    "hello",
    "spaces",
    "reset",
    "reset_result",
    "step",
    "step_result",
    "close",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    Hello,
    Spaces {
        observation_space: Space,
        action_space: Space,
    },
    Reset {
        seed: Option<u64>,
    },
    ResetResult {
        observation: Vec<f64>,
    },
    Step {
        action: Vec<f64>,
    },
    StepResult {
        observation: Vec<f64>,
        reward: f64,
        terminated: bool,
        truncated: bool,
    },
    Close,
    Error {
        code: String,
        message: String,
    },
}

impl WireMessage {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        WireMessage::Error {
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            WireMessage::Hello => "hello",
            WireMessage::Spaces { .. } => "spaces",
            WireMessage::Reset { .. } => "reset",
            WireMessage::ResetResult { .. } => "reset_result",
            WireMessage::Step { .. } => "step",
            WireMessage::StepResult { .. } => "step_result",
            WireMessage::Close => "close",
            WireMessage::Error { .. } => "error",
        }
    }
}

#[derive(Serialize)]
struct OutFrame<'a> {
    #[serde(flatten)]
    message: &'a WireMessage,
    v: u32,
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("payload of {0} bytes exceeds the 32-bit length prefix")]
    TooLarge(usize),
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("protocol version mismatch: expected {expected}, got {got}")]
    VersionMismatch { expected: u32, got: u64 },
    #[error("connection closed by peer")]
    ConnectionClosed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    /// The buffer holds less than one full frame; at least `needed` bytes
    /// in total are required.
    NeedMore { needed: usize },
    Message { message: WireMessage, consumed: usize },
}

pub fn encode_message(message: &WireMessage) -> Result<Vec<u8>, ProtocolError> {
    let payload = serde_json::to_vec(&OutFrame {
        message,
        v: PROTOCOL_VERSION,
    })
    .map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let len = u32::try_from(payload.len()).map_err(|_| ProtocolError::TooLarge(payload.len()))?;
    let mut frame = Vec::with_capacity(4 + payload.len());
    frame.extend_from_slice(&len.to_be_bytes());
    frame.extend_from_slice(&payload);
    Ok(frame)
}

/// Parses one JSON payload (without the length prefix).
pub fn decode_payload(payload: &[u8]) -> Result<WireMessage, ProtocolError> {
    let value: serde_json::Value =
        serde_json::from_slice(payload).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let object = value
        .as_object()
        .ok_or_else(|| ProtocolError::Malformed("payload is not a JSON object".into()))?;
    let kind = object
        .get("type")
        .and_then(|t| t.as_str())
        .ok_or_else(|| ProtocolError::Malformed("missing string field \"type\"".into()))?;
    if !MESSAGE_TYPES.contains(&kind) {
        return Err(ProtocolError::UnknownType(kind.to_string()));
    }
    let version = object
        .get("v")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ProtocolError::Malformed("missing integer field \"v\"".into()))?;
    if version != u64::from(PROTOCOL_VERSION) {
        return Err(ProtocolError::VersionMismatch {
            expected: PROTOCOL_VERSION,
            got: version,
        });
    }
    let message: WireMessage =
        serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    if let WireMessage::Spaces {
        observation_space,
        action_space,
    } = &message
    {
        for space in [observation_space, action_space] {
            space
                .validate()
                .map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        }
    }
    Ok(message)
}

pub fn decode_message(bytes: &[u8]) -> Result<Decoded, ProtocolError> {
    if bytes.len() < 4 {
        return Ok(Decoded::NeedMore { needed: 4 });
    }
    let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    let total = 4 + len;
    if bytes.len() < total {
        return Ok(Decoded::NeedMore { needed: total });
    }
    Ok(Decoded::Message {
        message: decode_payload(&bytes[4..total])?,
        consumed: total,
    })
}

pub fn write_message<W: Write>(out: &mut W, message: &WireMessage) -> Result<(), ProtocolError> {
    out.write_all(&encode_message(message)?)?;
    out.flush()?;
    Ok(())
}

pub fn read_message<R: Read>(input: &mut R) -> Result<WireMessage, ProtocolError> {
    let mut prefix = [0u8; 4];
    match input.read_exact(&mut prefix) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Err(ProtocolError::ConnectionClosed),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_STREAM_FRAME {
        return Err(ProtocolError::Malformed(format!(
            "frame of {len} bytes exceeds the {MAX_STREAM_FRAME} byte stream limit"
        )));
    }
    let mut payload = vec![0u8; len];
    input.read_exact(&mut payload).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => ProtocolError::ConnectionClosed,
        _ => e.into(),
    })?;
    decode_payload(&payload)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(json: &str) -> Vec<u8> {
        let mut out = (json.len() as u32).to_be_bytes().to_vec();
        out.extend_from_slice(json.as_bytes());
        out
    }

    #[test]
    fn close_frame_is_bit_exact() {
        assert_eq!(encode_message(&WireMessage::Close).unwrap(), frame(r#"{"type":"close","v":1}"#));
    }

    #[test]
    fn reset_round_trip() {
        let m = WireMessage::Reset { seed: Some(7) };
        let bytes = encode_message(&m).unwrap();
        assert_eq!(
            decode_message(&bytes).unwrap(),
            Decoded::Message {
                message: m,
                consumed: bytes.len()
            }
        );
    }

    #[test]
    fn step_round_trip() {
        let m = WireMessage::Step { action: vec![0.5] };
        let bytes = encode_message(&m).unwrap();
        assert!(matches!(decode_message(&bytes).unwrap(), Decoded::Message { message, .. } if message == m));
    }

    #[test]
    fn short_buffers_need_more() {
        let bytes = encode_message(&WireMessage::Hello).unwrap();
        assert_eq!(decode_message(&bytes[..2]).unwrap(), Decoded::NeedMore { needed: 4 });
        assert_eq!(
            decode_message(&bytes[..bytes.len() - 1]).unwrap(),
            Decoded::NeedMore { needed: bytes.len() }
        );
    }

    #[test]
    fn unknown_type_is_protocol_error() {
        let err = decode_message(&frame(r#"{"type":"warp","v":1}"#)).unwrap_err();
        assert!(matches!(err, ProtocolError::UnknownType(t) if t == "warp"));
    }

    #[test]
    fn malformed_and_version_errors() {
        assert!(matches!(
            decode_message(&frame("not json")).unwrap_err(),
            ProtocolError::Malformed(_)
        ));
        assert!(matches!(
            decode_message(&frame(r#"{"type":"reset","v":1,"seed":"x"}"#)).unwrap_err(),
            ProtocolError::Malformed(_)
        ));
        assert!(matches!(
            decode_message(&frame(r#"{"type":"hello","v":2}"#)).unwrap_err(),
            ProtocolError::VersionMismatch { got: 2, .. }
        ));
        assert!(matches!(
            decode_message(&frame(r#"{"type":"hello"}"#)).unwrap_err(),
            ProtocolError::Malformed(_)
        ));
    }

    #[test]
    fn extreme_floats_survive() {
        let m = WireMessage::StepResult {
            observation: vec![f64::MIN_POSITIVE, 5e-324, f64::MAX, -0.1 + 0.2, 1.0 / 3.0],
            reward: -1.7976931348623157e308,
            terminated: false,
            truncated: true,
        };
        let bytes = encode_message(&m).unwrap();
        let Decoded::Message { message, .. } = decode_message(&bytes).unwrap() else {
            panic!("incomplete");
        };
        assert_eq!(message, m);
    }

    #[test]
    fn stream_helpers() {
        let mut buf = Vec::new();
        write_message(&mut buf, &WireMessage::Hello).unwrap();
        write_message(&mut buf, &WireMessage::Close).unwrap();
        let mut cursor = std::io::Cursor::new(buf);
        assert_eq!(read_message(&mut cursor).unwrap(), WireMessage::Hello);
        assert_eq!(read_message(&mut cursor).unwrap(), WireMessage::Close);
        assert!(matches!(read_message(&mut cursor), Err(ProtocolError::ConnectionClosed)));
    }
}
