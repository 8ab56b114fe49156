use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Fnv64, ProtocolParams};

/// Milliseconds since the session epoch. Always injected, never read from a wall clock.
pub type Timestamp = u64;

pub type TriggerId = u64;
pub type MediaId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingMode {
    Off,
    Auto,
    Manual,
}

impl SharingMode {
    pub const ALL: [SharingMode; 3] = [SharingMode::Off, SharingMode::Auto, SharingMode::Manual];

    pub fn as_str(self) -> &'static str {
        match self {
            SharingMode::Off => "off",
            SharingMode::Auto => "auto",
            SharingMode::Manual => "manual",
        }
    }
}

impl fmt::Display for SharingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SharingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(SharingMode::Off),
            "auto" => Ok(SharingMode::Auto),
            "manual" => Ok(SharingMode::Manual),
            other => Err(format!("unknown sharing mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Photo,
    Video,
}

impl MediaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MediaKind::Photo => "photo",
            MediaKind::Video => "video",
        }
    }

    fn tag(self) -> u8 {
        match self {
            MediaKind::Photo => b'P',
            MediaKind::Video => b'V',
        }
    }

    /// Synthetic payload size.
    pub fn size_bytes(self) -> u64 {
        match self {
            MediaKind::Photo => 200_000,
            MediaKind::Video => 1_000_000,
        }
    }
}

impl fmt::Display for MediaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "trigger_id")]
pub enum Initiator {
    WearerInitiated,
    TriggerFulfillment(TriggerId),
}

/// A captured photo or video. Payloads are synthetic: only the digest and size travel
/// through the protocol.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MediaItem {
    pub id: MediaId,
    pub kind: MediaKind,
    pub capture_start_ms: Timestamp,
    pub capture_end_ms: Timestamp,
    pub initiator: Initiator,
    pub payload_digest: String,
    pub size_bytes: u64,
}

impl MediaItem {
    pub fn captured(
        id: MediaId,
        kind: MediaKind,
        capture_start_ms: Timestamp,
        initiator: Initiator,
        params: &ProtocolParams,
    ) -> Self {
        Self {
            id,
            kind,
            capture_start_ms,
            capture_end_ms: capture_start_ms + params.capture_ms(kind),
            initiator,
            payload_digest: payload_digest(id, kind, capture_start_ms),
            size_bytes: kind.size_bytes(),
        }
    }
}

/// FNV-1a over `(id, kind, capture_start_ms)`, rendered as 16 lowercase hex digits.
pub fn payload_digest(id: MediaId, kind: MediaKind, capture_start_ms: Timestamp) -> String {
    let mut h = Fnv64::new();
    h.write(&id.to_le_bytes());
    h.write(&[kind.tag()]);
    h.write(&capture_start_ms.to_le_bytes());
    h.hex()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FriendCommand {
    Trigger,
    ThumbsUp,
    ThumbsDown,
}

impl FriendCommand {
    pub fn code(self) -> &'static str {
        match self {
            FriendCommand::Trigger => "T",
            FriendCommand::ThumbsUp => "U",
            FriendCommand::ThumbsDown => "D",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gesture {
    Press,
    PressHold,
    SwipeBack,
}

impl Gesture {
    pub fn as_str(self) -> &'static str {
        match self {
            Gesture::Press => "press",
            Gesture::PressHold => "press_hold",
            Gesture::SwipeBack => "swipe_back",
        }
    }
}

impl std::str::FromStr for Gesture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "press" => Ok(Gesture::Press),
            "press_hold" => Ok(Gesture::PressHold),
            "swipe_back" => Ok(Gesture::SwipeBack),
            other => Err(format!("unknown gesture '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "arg")]
pub enum NoticeKind {
    Invitation,
    TriggerReceived,
    TriggerApproved(MediaKind),
    Transmitting,
    Countdown(u32),
    Unavailable,
    ModeChange(SharingMode),
    TriggersPaused,
    SessionEnded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Wearer,
    Friend,
    Relay,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Wearer => "wearer",
            Role::Friend => "friend",
            Role::Relay => "relay",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wearer" => Ok(Role::Wearer),
            "friend" => Ok(Role::Friend),
            "relay" => Ok(Role::Relay),
            other => Err(format!("unknown role '{other}'")),
        }
    }
}
