//! Newline-delimited JSON framing for [`Envelope`]s.
//!
//! Decoding is two-staged: the line must be a JSON object carrying the
//! envelope header and a known `kind`, otherwise the frame is malformed
//! or the payload unknown. Unknown fields are ignored.

use serde_json::Value;
use teleassist_core::protocol::{Envelope, KINDS};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecodeError {
    /// The stream can no longer be trusted; close the connection.
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    /// Header is fine but the kind is not known; answer with an error Ack.
    #[error("unknown payload kind {kind:?}")]
    UnknownPayload { session: u64, seq: u64, kind: String },
}

/// One frame without the trailing newline.
pub fn encode(env: &Envelope) -> String {
    serde_json::to_string(env).expect("envelopes always serialize")
}

pub fn encode_line(env: &Envelope) -> String {
    let mut s = encode(env);
    s.push('\n');
    s
}

pub fn decode(line: &str) -> Result<Envelope, DecodeError> {
    let malformed = |m: String| DecodeError::MalformedFrame(m);
    let value: Value =
        serde_json::from_str(line.trim_end_matches(['\r', '\n'])).map_err(|e| malformed(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| malformed("frame is not an object".into()))?;
    let session = obj.get("session").and_then(Value::as_u64);
    let seq = obj.get("seq").and_then(Value::as_u64);
    let t = obj.get("t").and_then(Value::as_f64);
    let kind = obj.get("kind").and_then(Value::as_str).map(str::to_string);
    let (Some(session), Some(seq), Some(_), Some(kind)) = (session, seq, t, kind) else {
        return Err(malformed("missing or mistyped session/seq/t/kind".into()));
    };
    if !KINDS.contains(&kind.as_str()) {
        return Err(DecodeError::UnknownPayload { session, seq, kind });
    }
    serde_json::from_value(value).map_err(|e| malformed(format!("{kind} body: {e}")))
}
