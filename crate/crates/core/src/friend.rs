//! Friend-side agent: outbound commands, the inbound transcript, and the
//! "waiting for a response" indicator.

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::protocol::{kind, Fnv64, Frame, FriendCommand, MediaKind, NoticeKind, Role, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sent,
    Received,
}

/// Media are shown as references only; payloads never reach the transcript.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum EntryContent {
    CommandText { text: String },
    NoticeText { text: String },
    MediaRef { kind: MediaKind, digest: String, size_bytes: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub ts_ms: Timestamp,
    pub direction: Direction,
    pub content: EntryContent,
    /// Frame sequence number of a sent entry. Not part of the digest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
}

/// Append-only, ordered by `ts_ms`; equal timestamps keep arrival order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FriendTranscript {
    entries: Vec<TranscriptEntry>,
}

impl FriendTranscript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: TranscriptEntry) -> Result<(), FriendError> {
        if let Some(last) = self.entries.last() {
            if entry.ts_ms < last.ts_ms {
                return Err(FriendError::OutOfOrder { last: last.ts_ms, got: entry.ts_ms });
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Order-sensitive FNV-1a over `(ts_ms, direction, content)` of every entry.
    pub fn digest(&self) -> String {
        let mut h = Fnv64::new();
        for e in &self.entries {
            h.write(&e.ts_ms.to_le_bytes());
            h.write(match e.direction {
                Direction::Sent => b"S",
                Direction::Received => b"R",
            });
            match &e.content {
                EntryContent::CommandText { text } => write_field(&mut h, b'C', text.as_bytes()),
                EntryContent::NoticeText { text } => write_field(&mut h, b'N', text.as_bytes()),
                EntryContent::MediaRef { kind, digest, size_bytes } => {
                    write_field(&mut h, b'M', kind.as_str().as_bytes());
                    h.write(digest.as_bytes());
                    h.write(&size_bytes.to_le_bytes());
                }
            }
        }
        h.hex()
    }

    /// One line per entry: time, direction, and the text or media reference.
    pub fn render(&self) -> String {
        let mut out = format!("{:>9}  {:<4}  content\n", "t_ms", "dir");
        for e in &self.entries {
            let dir = match e.direction {
                Direction::Sent => "->",
                Direction::Received => "<-",
            };
            let content = match &e.content {
                EntryContent::CommandText { text } => format!("{text:?}"),
                EntryContent::NoticeText { text } => text.clone(),
                EntryContent::MediaRef { kind, digest, size_bytes } => {
                    format!("[{} {digest}, {size_bytes} bytes]", kind.as_str())
                }
            };
            out.push_str(&format!("{:>9}  {dir:<4}  {content}\n", e.ts_ms));
        }
        out
    }

    /// Texts of received notices, in order.
    pub fn notice_texts(&self) -> impl Iterator<Item = (Timestamp, &str)> {
        self.entries.iter().filter_map(|e| match &e.content {
            EntryContent::NoticeText { text } => Some((e.ts_ms, text.as_str())),
            _ => None,
        })
    }

    pub fn media_refs(&self) -> impl Iterator<Item = (Timestamp, MediaKind, &str)> {
        self.entries.iter().filter_map(|e| match &e.content {
            EntryContent::MediaRef { kind, digest, .. } => Some((e.ts_ms, *kind, digest.as_str())),
            _ => None,
        })
    }
}

fn write_field(h: &mut Fnv64, tag: u8, bytes: &[u8]) {
    h.write(&[tag]);
    h.write(&(bytes.len() as u64).to_le_bytes());
    h.write(bytes);
}

pub fn transcript_digest(transcript: &FriendTranscript) -> String {
    transcript.digest()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum PendingIndicator {
    Idle,
    AwaitingResponse { since_ms: Timestamp },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum PendingStatus {
    Idle,
    AwaitingResponse { elapsed_ms: u64 },
}

pub fn pending_status(indicator: PendingIndicator, now: Timestamp) -> PendingStatus {
    match indicator {
        PendingIndicator::Idle => PendingStatus::Idle,
        PendingIndicator::AwaitingResponse { since_ms } => {
            PendingStatus::AwaitingResponse { elapsed_ms: now.saturating_sub(since_ms) }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FriendError {
    #[error("no invitation received yet")]
    NoSession,
    #[error("frame for session '{got}' routed to session '{expected}'")]
    Routing { expected: String, got: String },
    #[error("entry at {got} ms is older than the last entry at {last} ms")]
    OutOfOrder { last: Timestamp, got: Timestamp },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FriendAgent {
    session_id: String,
    invited: bool,
    transcript: FriendTranscript,
    indicator: PendingIndicator,
    next_seq: u64,
}

impl FriendAgent {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            invited: false,
            transcript: FriendTranscript::new(),
            indicator: PendingIndicator::Idle,
            next_seq: 1,
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn is_invited(&self) -> bool {
        self.invited
    }

    pub fn transcript(&self) -> &FriendTranscript {
        &self.transcript
    }

    pub fn into_transcript(self) -> FriendTranscript {
        self.transcript
    }

    pub fn indicator(&self) -> PendingIndicator {
        self.indicator
    }

    pub fn pending_status(&self, now: Timestamp) -> PendingStatus {
        pending_status(self.indicator, now)
    }

    pub fn send_command(&mut self, cmd: FriendCommand, now: Timestamp) -> Result<Frame, FriendError> {
        let frame = self.send_text(cmd.code(), now)?;
        if cmd == FriendCommand::Trigger && self.indicator == PendingIndicator::Idle {
            self.indicator = PendingIndicator::AwaitingResponse { since_ms: now };
        }
        Ok(frame)
    }

    /// Sends arbitrary text. The relay only acts on `T`, `U` and `D`.
    pub fn send_text(&mut self, text: &str, now: Timestamp) -> Result<Frame, FriendError> {
        if !self.invited {
            return Err(FriendError::NoSession);
        }
        let seq = self.next_seq;
        self.transcript.push(TranscriptEntry {
            ts_ms: now,
            direction: Direction::Sent,
            content: EntryContent::CommandText { text: text.to_owned() },
            seq: Some(seq),
        })?;
        self.next_seq += 1;
        Ok(Frame::new(self.session_id.clone(), seq, now, Role::Friend, kind::CMD, json!({ "text": text })))
    }

    /// Frames other than notices and media are accepted and ignored.
    pub fn ingest(&mut self, frame: &Frame, now: Timestamp) -> Result<(), FriendError> {
        if frame.session_id != self.session_id {
            return Err(FriendError::Routing { expected: self.session_id.clone(), got: frame.session_id.clone() });
        }
        if let Some(notice) = frame.notice_kind() {
            let text = frame.body_str("text").map(str::to_owned).unwrap_or_else(|| {
                crate::protocol::render_notice(&notice).into_owned()
            });
            self.transcript.push(TranscriptEntry {
                ts_ms: now,
                direction: Direction::Received,
                content: EntryContent::NoticeText { text },
                seq: None,
            })?;
            match notice {
                NoticeKind::Invitation => self.invited = true,
                NoticeKind::Unavailable | NoticeKind::TriggersPaused => self.indicator = PendingIndicator::Idle,
                _ => {}
            }
        } else if let Some((kind, digest, size_bytes)) = frame.media_ref() {
            self.transcript.push(TranscriptEntry {
                ts_ms: now,
                direction: Direction::Received,
                content: EntryContent::MediaRef { kind, digest, size_bytes },
                seq: None,
            })?;
            self.indicator = PendingIndicator::Idle;
        }
        Ok(())
    }
}
