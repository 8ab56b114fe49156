use serde::{Deserialize, Serialize};

use super::{MediaKind, ProtocolParams, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedColor {
    Green,
    White,
    Blue,
    Red,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedPattern {
    Flashing,
    Solid,
}

/// Why the LED is lit. Each cause maps to exactly one (color, pattern).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "kind")]
pub enum LedCause {
    TriggerPending,
    Capturing(MediaKind),
    Sent,
    ThumbsUp,
    ThumbsDown,
}

impl LedCause {
    pub fn appearance(self) -> (LedColor, LedPattern) {
        match self {
            LedCause::TriggerPending => (LedColor::Green, LedPattern::Flashing),
            LedCause::Capturing(_) => (LedColor::White, LedPattern::Solid),
            LedCause::Sent => (LedColor::White, LedPattern::Flashing),
            LedCause::ThumbsUp => (LedColor::Blue, LedPattern::Flashing),
            LedCause::ThumbsDown => (LedColor::Red, LedPattern::Flashing),
        }
    }

    /// Single-LED priority; higher wins.
    pub fn priority(self) -> u8 {
        match self {
            LedCause::TriggerPending => 3,
            LedCause::Capturing(_) => 2,
            LedCause::Sent => 1,
            LedCause::ThumbsUp | LedCause::ThumbsDown => 0,
        }
    }

    pub fn is_flash(self) -> bool {
        matches!(self, LedCause::Sent | LedCause::ThumbsUp | LedCause::ThumbsDown)
    }

    pub fn is_thumb(self) -> bool {
        matches!(self, LedCause::ThumbsUp | LedCause::ThumbsDown)
    }
}

/// One lit interval `[start_ms, end_ms)` of the LED.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LedSignal {
    pub color: LedColor,
    pub pattern: LedPattern,
    pub start_ms: Timestamp,
    pub end_ms: Timestamp,
    pub cause: LedCause,
}

impl LedSignal {
    pub fn new(cause: LedCause, start_ms: Timestamp, end_ms: Timestamp) -> Self {
        let (color, pattern) = cause.appearance();
        Self { color, pattern, start_ms, end_ms, cause }
    }
}

pub fn led_signal_for(cause: LedCause, now: Timestamp, params: &ProtocolParams) -> LedSignal {
    let len = match cause {
        LedCause::TriggerPending => params.trigger_timeout_ms,
        LedCause::Capturing(kind) => params.capture_ms(kind),
        LedCause::Sent => params.sent_flash_ms,
        LedCause::ThumbsUp | LedCause::ThumbsDown => params.thumb_flash_ms,
    };
    LedSignal::new(cause, now, now + len)
}
