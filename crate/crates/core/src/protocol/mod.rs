//! Shared protocol vocabulary: domain types, timing constants, canonical notice texts,
//! LED signal mapping and the wire-frame codec.

use std::hash::Hasher as _;

use fnv::FnvHasher;

mod frame;
mod led;
mod params;
pub mod text;
mod types;

pub use frame::{decode_frame, empty_body, encode_frame, kind, CodecError, Frame, PROTOCOL_VERSION};
pub use led::{led_signal_for, LedCause, LedColor, LedPattern, LedSignal};
pub use params::{ParamsError, ProtocolParams};
pub use text::{parse_friend_text, render_notice, ParsedText};
pub use types::{
    payload_digest, FriendCommand, Gesture, Initiator, MediaId, MediaItem, MediaKind, NoticeKind, Role,
    SharingMode, Timestamp, TriggerId,
};

/// 64-bit FNV-1a.
#[derive(Debug, Clone, Copy)]
pub struct Fnv64(u64);

impl Fnv64 {
    pub const OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;

    pub fn new() -> Self {
        Self(Self::OFFSET_BASIS)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        let mut h = FnvHasher::with_key(self.0);
        h.write(bytes);
        self.0 = h.finish();
    }

    pub fn finish(&self) -> u64 {
        self.0
    }

    pub fn hex(&self) -> String {
        format!("{:016x}", self.0)
    }
}

impl Default for Fnv64 {
    fn default() -> Self {
        Self::new()
    }
}
