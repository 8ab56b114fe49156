//! Rebuilding the Friend transcript from a relay session log.
//!
//! A log holds one frame per line in relay processing order. Friend command frames
//! become sent entries at their own timestamp; relay notices and media become
//! received entries at their emission timestamp. With a shared clock and no
//! transport delay this is exactly the transcript the Friend saw.

use thiserror::Error;

use crate::friend::{Direction, EntryContent, FriendError, FriendTranscript, TranscriptEntry};
use crate::protocol::{decode_frame, kind, CodecError, Frame, Role};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {source}")]
    Decode { line: usize, source: CodecError },
    #[error("line {line}: {source}")]
    Transcript { line: usize, source: FriendError },
}

/// Frames of one log, in order.
pub fn read_log(text: &str) -> Result<Vec<Frame>, ReplayError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| decode_frame(l).map_err(|source| ReplayError::Decode { line: i + 1, source }))
        .collect()
}

pub fn replay_friend_transcript(text: &str) -> Result<FriendTranscript, ReplayError> {
    let mut transcript = FriendTranscript::new();
    for (i, frame) in read_log(text)?.into_iter().enumerate() {
        let content = match (frame.from, frame.kind.as_str()) {
            (Role::Friend, kind::CMD) => {
                let text = frame.body_str("text").unwrap_or_default().to_owned();
                Some((Direction::Sent, EntryContent::CommandText { text }, Some(frame.seq)))
            }
            (Role::Relay, kind::NOTICE) => {
                frame.body_str("text").map(|t| (Direction::Received, EntryContent::NoticeText { text: t.to_owned() }, None))
            }
            (Role::Relay, kind::MEDIA) => frame.media_ref().map(|(kind, digest, size_bytes)| {
                (Direction::Received, EntryContent::MediaRef { kind, digest, size_bytes }, None)
            }),
            _ => None,
        };
        if let Some((direction, content, seq)) = content {
            transcript
                .push(TranscriptEntry { ts_ms: frame.ts_ms, direction, content, seq })
                .map_err(|source| ReplayError::Transcript { line: i + 1, source })?;
        }
    }
    Ok(transcript)
}
