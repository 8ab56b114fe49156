use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::MediaKind;

/// Every timing constant of the protocol, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// How long a trigger request pends before it times out.
    pub trigger_timeout_ms: u64,
    pub video_len_ms: u64,
    /// How long Wearer-initiated media wait before delivery.
    pub hold_ms: u64,
    pub photo_capture_ms: u64,
    pub video_tx_ms: u64,
    pub photo_tx_ms: u64,
    pub countdown_start: u32,
    pub countdown_interval_ms: u64,
    pub thumb_flash_ms: u64,
    pub sent_flash_ms: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            trigger_timeout_ms: 10_000,
            video_len_ms: 10_000,
            hold_ms: 10_000,
            photo_capture_ms: 1_000,
            video_tx_ms: 5_000,
            photo_tx_ms: 1_000,
            countdown_start: 5,
            countdown_interval_ms: 1_000,
            thumb_flash_ms: 2_000,
            sent_flash_ms: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamsError {
    #[error("{0} must be greater than zero")]
    ZeroDuration(&'static str),
    #[error("countdown of {start} x {interval_ms} ms does not fit the transmit window")]
    CountdownTooLong { start: u32, interval_ms: u64 },
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        let durations = [
            ("trigger_timeout_ms", self.trigger_timeout_ms),
            ("video_len_ms", self.video_len_ms),
            ("hold_ms", self.hold_ms),
            ("photo_capture_ms", self.photo_capture_ms),
            ("video_tx_ms", self.video_tx_ms),
            ("photo_tx_ms", self.photo_tx_ms),
            ("countdown_interval_ms", self.countdown_interval_ms),
            ("thumb_flash_ms", self.thumb_flash_ms),
            ("sent_flash_ms", self.sent_flash_ms),
        ];
        if let Some((name, _)) = durations.iter().find(|(_, v)| *v == 0) {
            return Err(ParamsError::ZeroDuration(name));
        }
        let window = self.video_tx_ms.max(self.photo_tx_ms) + self.countdown_interval_ms;
        if u64::from(self.countdown_start).saturating_mul(self.countdown_interval_ms) > window {
            return Err(ParamsError::CountdownTooLong {
                start: self.countdown_start,
                interval_ms: self.countdown_interval_ms,
            });
        }
        Ok(())
    }

    pub fn capture_ms(&self, kind: MediaKind) -> u64 {
        match kind {
            MediaKind::Photo => self.photo_capture_ms,
            MediaKind::Video => self.video_len_ms,
        }
    }

    pub fn transmit_ms(&self, kind: MediaKind) -> u64 {
        match kind {
            MediaKind::Photo => self.photo_tx_ms,
            MediaKind::Video => self.video_tx_ms,
        }
    }
}
