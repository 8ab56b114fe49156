//! Newline-delimited JSON wire frames.
//!
//! Each frame is one JSON object on one line:
//!
//! ```text
//! {"v":1,"session_id":"s1","seq":1,"ts_ms":0,"from":"friend","kind":"cmd","body":{"text":"T"}}
//! ```

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use super::{render_notice, LedSignal, MediaItem, MediaKind, NoticeKind, Role, Timestamp};

pub const PROTOCOL_VERSION: u32 = 1;

pub mod kind {
    pub const CMD: &str = "cmd";
    pub const NOTICE: &str = "notice";
    pub const MEDIA: &str = "media";
    pub const LED: &str = "led";
    pub const GESTURE: &str = "gesture";
    pub const SET_MODE: &str = "set_mode";
    pub const START_SESSION: &str = "start_session";
    pub const END_SESSION: &str = "end_session";
    pub const SESSION_STATE: &str = "session_state";
    pub const CREATE_SESSION: &str = "create_session";
    pub const SESSION_CREATED: &str = "session_created";
    pub const ATTACH: &str = "attach";
    pub const ATTACHED: &str = "attached";
    pub const ERROR: &str = "error";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub v: u32,
    pub session_id: String,
    pub seq: u64,
    pub ts_ms: Timestamp,
    pub from: Role,
    pub kind: String,
    #[serde(default)]
    pub body: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    /// `position` is the 0-based byte offset where decoding stopped.
    #[error("malformed frame at byte {position}: {reason}")]
    Malformed { position: usize, reason: String },
    #[error("unsupported protocol version {0}")]
    Version(u32),
}

impl Frame {
    pub fn new(
        session_id: impl Into<String>,
        seq: u64,
        ts_ms: Timestamp,
        from: Role,
        kind: impl Into<String>,
        body: Value,
    ) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            session_id: session_id.into(),
            seq,
            ts_ms,
            from,
            kind: kind.into(),
            body,
        }
    }

    pub fn notice(session_id: &str, seq: u64, ts_ms: Timestamp, notice: &NoticeKind) -> Self {
        let body = json!({ "notice": notice, "text": render_notice(notice) });
        Self::new(session_id, seq, ts_ms, Role::Relay, kind::NOTICE, body)
    }

    /// Media frame without payload bytes.
    pub fn media(session_id: &str, seq: u64, ts_ms: Timestamp, media: &MediaItem) -> Self {
        let body = json!({
            "id": media.id,
            "kind": media.kind,
            "digest": media.payload_digest,
            "size_bytes": media.size_bytes,
        });
        Self::new(session_id, seq, ts_ms, Role::Relay, kind::MEDIA, body)
    }

    pub fn led(session_id: &str, seq: u64, ts_ms: Timestamp, signal: Option<&LedSignal>) -> Self {
        let body = match signal {
            Some(s) => json!({ "set": s }),
            None => json!({ "clear": true }),
        };
        Self::new(session_id, seq, ts_ms, Role::Relay, kind::LED, body)
    }

    /// `code` is a stable snake_case identifier; `reason` is for humans.
    pub fn error(session_id: &str, seq: u64, ts_ms: Timestamp, code: &str, reason: impl Into<String>) -> Self {
        Self::new(session_id, seq, ts_ms, Role::Relay, kind::ERROR, json!({ "code": code, "reason": reason.into() }))
    }

    pub fn body_str(&self, field: &str) -> Option<&str> {
        self.body.get(field).and_then(Value::as_str)
    }

    pub fn notice_kind(&self) -> Option<NoticeKind> {
        if self.kind != kind::NOTICE {
            return None;
        }
        serde_json::from_value(self.body.get("notice")?.clone()).ok()
    }

    /// `(kind, digest, size_bytes)` of a media frame.
    pub fn media_ref(&self) -> Option<(MediaKind, String, u64)> {
        if self.kind != kind::MEDIA {
            return None;
        }
        let kind = serde_json::from_value(self.body.get("kind")?.clone()).ok()?;
        let digest = self.body_str("digest")?.to_owned();
        let size = self.body.get("size_bytes")?.as_u64()?;
        Some((kind, digest, size))
    }

    /// Copy of the frame with any media payload removed from the body.
    pub fn redacted(&self) -> Frame {
        let mut out = self.clone();
        if let Value::Object(map) = &mut out.body {
            map.remove("payload");
        }
        out
    }
}

pub fn encode_frame(frame: &Frame) -> String {
    // serde_json escapes control characters, so the line cannot contain a raw newline.
    let mut line = serde_json::to_string(frame).expect("frame serialization is infallible");
    line.push('\n');
    line
}

pub fn decode_frame(line: &str) -> Result<Frame, CodecError> {
    let trimmed = line.strip_suffix('\n').unwrap_or(line);
    let trimmed = trimmed.strip_suffix('\r').unwrap_or(trimmed);
    if trimmed.contains('\n') {
        let position = trimmed.find('\n').unwrap_or(0);
        return Err(CodecError::Malformed { position, reason: "embedded newline".into() });
    }
    let frame: Frame = serde_json::from_str(trimmed).map_err(|e| CodecError::Malformed {
        position: e.column().saturating_sub(1),
        reason: e.to_string(),
    })?;
    if frame.v != PROTOCOL_VERSION {
        return Err(CodecError::Version(frame.v));
    }
    Ok(frame)
}

/// Empty JSON object, for frames with no body fields.
pub fn empty_body() -> Value {
    Value::Object(Map::new())
}
