//! Friend-facing message texts and command parsing.

use std::borrow::Cow;

use super::{FriendCommand, MediaKind, NoticeKind, SharingMode};

pub const INVITATION: &str = "Hey, I'm out with my camera glasses, and I'd love to bring you along. Send 'T' to trigger a photo or video of what I'm seeing right now.";
pub const TRIGGER_RECEIVED: &str = "Trigger received!";
pub const APPROVED_PHOTO: &str = "Trigger approved! Hold tight for a photo!";
pub const APPROVED_VIDEO: &str = "Trigger approved! Hold tight for a video!";
pub const TRANSMITTING: &str = "Video/photo is being transmitted!";
/// Sent for both an explicit decline and a timeout; the bytes must not differ.
pub const UNAVAILABLE: &str = "Sorry — your friend is unavailable right now.";
pub const MODE_AUTO: &str = "Starting AUTO APPROVE mode now! Send 'T' to trigger a photo/video of what I'm seeing right now.";
pub const MODE_MANUAL: &str = "Starting MANUAL APPROVE mode now! Send 'T' to trigger a photo/video of what I'm seeing right now.";
pub const MODE_OFF: &str = "Starting SHARED CAMERA OFF mode now. Pausing trigger requests for a bit, but I'll keep sending you photos/videos whenever possible.";
pub const TRIGGERS_PAUSED: &str =
    "Pausing trigger requests for a bit, but I'll keep sending you photos/videos whenever possible.";
pub const SESSION_ENDED: &str = "Ending my camera glasses session now. Talk soon!";

/// Result of reading one text the Friend typed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedText {
    Command(FriendCommand),
    PlainText(String),
}

fn normalize(text: &str) -> String {
    text.trim().to_uppercase()
}

pub fn parse_friend_text(text: &str) -> ParsedText {
    match normalize(text).as_str() {
        "T" => ParsedText::Command(FriendCommand::Trigger),
        "U" => ParsedText::Command(FriendCommand::ThumbsUp),
        "D" => ParsedText::Command(FriendCommand::ThumbsDown),
        _ => ParsedText::PlainText(text.to_owned()),
    }
}

pub fn render_notice(kind: &NoticeKind) -> Cow<'static, str> {
    match kind {
        NoticeKind::Invitation => INVITATION.into(),
        NoticeKind::TriggerReceived => TRIGGER_RECEIVED.into(),
        NoticeKind::TriggerApproved(MediaKind::Photo) => APPROVED_PHOTO.into(),
        NoticeKind::TriggerApproved(MediaKind::Video) => APPROVED_VIDEO.into(),
        NoticeKind::Transmitting => TRANSMITTING.into(),
        NoticeKind::Countdown(n) => {
            debug_assert!(*n >= 1, "countdown values start at 1");
            format!("{n}..").into()
        }
        NoticeKind::Unavailable => UNAVAILABLE.into(),
        NoticeKind::ModeChange(SharingMode::Auto) => MODE_AUTO.into(),
        NoticeKind::ModeChange(SharingMode::Manual) => MODE_MANUAL.into(),
        NoticeKind::ModeChange(SharingMode::Off) => MODE_OFF.into(),
        NoticeKind::TriggersPaused => TRIGGERS_PAUSED.into(),
        NoticeKind::SessionEnded => SESSION_ENDED.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_codes() {
        assert_eq!(parse_friend_text("T"), ParsedText::Command(FriendCommand::Trigger));
        assert_eq!(parse_friend_text(" u "), ParsedText::Command(FriendCommand::ThumbsUp));
        assert_eq!(parse_friend_text("d\n"), ParsedText::Command(FriendCommand::ThumbsDown));
        assert_eq!(parse_friend_text("TD"), ParsedText::PlainText("TD".into()));
        assert_eq!(parse_friend_text(""), ParsedText::PlainText("".into()));
        assert_eq!(parse_friend_text("T!"), ParsedText::PlainText("T!".into()));
    }

    #[test]
    fn canonical_texts() {
        assert_eq!(render_notice(&NoticeKind::TriggerReceived), "Trigger received!");
        assert_eq!(
            render_notice(&NoticeKind::ModeChange(SharingMode::Auto)),
            "Starting AUTO APPROVE mode now! Send 'T' to trigger a photo/video of what I'm seeing right now."
        );
        assert_eq!(render_notice(&NoticeKind::Countdown(5)), "5..");
        assert_eq!(render_notice(&NoticeKind::Countdown(1)), "1..");
        assert_eq!(
            render_notice(&NoticeKind::TriggerApproved(MediaKind::Video)),
            "Trigger approved! Hold tight for a video!"
        );
        assert!(render_notice(&NoticeKind::ModeChange(SharingMode::Off))
            .starts_with("Starting SHARED CAMERA OFF mode now."));
        assert!(render_notice(&NoticeKind::ModeChange(SharingMode::Off)).ends_with(TRIGGERS_PAUSED));
    }

    /// Pins every canonical text against a fixed hash so accidental edits show up.
    #[test]
    fn text_table_is_byte_stable() {
        let all = [
            NoticeKind::Invitation,
            NoticeKind::TriggerReceived,
            NoticeKind::TriggerApproved(MediaKind::Photo),
            NoticeKind::TriggerApproved(MediaKind::Video),
            NoticeKind::Transmitting,
            NoticeKind::Countdown(3),
            NoticeKind::Unavailable,
            NoticeKind::ModeChange(SharingMode::Off),
            NoticeKind::ModeChange(SharingMode::Auto),
            NoticeKind::ModeChange(SharingMode::Manual),
            NoticeKind::TriggersPaused,
            NoticeKind::SessionEnded,
        ];
        let mut h = crate::protocol::Fnv64::new();
        for k in &all {
            h.write(render_notice(k).as_bytes());
            h.write(&[0]);
        }
        let total: usize = all.iter().map(|k| render_notice(k).len()).sum();
        assert_eq!(total, 783);
        assert_eq!(h.hex(), TEXT_TABLE_DIGEST);
    }

    const TEXT_TABLE_DIGEST: &str = "4f1a557986148038";

    proptest! {
        #[test]
        fn parse_is_idempotent_under_normalization(s in "\\PC{0,6}") {
            let direct = parse_friend_text(&s);
            let normalized = parse_friend_text(&normalize(&s));
            match (direct, normalized) {
                (ParsedText::Command(a), ParsedText::Command(b)) => prop_assert_eq!(a, b),
                (ParsedText::PlainText(_), ParsedText::PlainText(_)) => {}
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }
    }
}
