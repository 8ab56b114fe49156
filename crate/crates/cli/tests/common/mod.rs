//! The mode-semantics matrix: every sharing mode against each Wearer response to a trigger.

use std::fmt::Write as _;

use sharecam_core::protocol::{Gesture, SharingMode};
use sharecam_core::sim::{Action, Scenario, SimReport};
use sharecam_core::wearer::{Effect, LogEntry};

pub const MODES: [SharingMode; 3] = [SharingMode::Auto, SharingMode::Manual, SharingMode::Off];
pub const RESPONSES: [&str; 4] = ["none", "press", "press_hold", "swipe_back"];
/// When the Wearer responds, well inside the trigger timeout.
pub const RESPONSE_AT_MS: u64 = 3_000;

/// Session at 0, `T` at 0, then `response` (if any) at [`RESPONSE_AT_MS`].
pub fn cell(mode: SharingMode, response: &str) -> Scenario {
    let sc = Scenario::new(format!("matrix-{mode}-{response}"), mode)
        .event(0, Action::StartSession { mode: None })
        .event(0, Action::Command { text: "T".into() });
    let gesture = match response {
        "none" => return sc,
        "press" => Gesture::Press,
        "press_hold" => Gesture::PressHold,
        "swipe_back" => Gesture::SwipeBack,
        other => panic!("unknown response {other}"),
    };
    sc.event(RESPONSE_AT_MS, Action::Gesture { gesture })
}

/// One line per cell: mode, response, trigger outcomes, media arrivals, transcript digest.
pub fn summarize(mode: SharingMode, response: &str, r: &SimReport) -> String {
    let mut outcomes = Vec::new();
    for step in &r.wearer_log {
        for effect in &step.effects {
            if let Effect::Log { entry: LogEntry::TriggerResolved { outcome, .. } } = effect {
                outcomes.push(format!("{outcome:?}@{}", step.at_ms));
            }
        }
    }
    let paused = r.friend_transcript.notice_texts().any(|(_, t)| t == sharecam_core::protocol::text::TRIGGERS_PAUSED);
    if paused {
        outcomes.push("TriggersPaused".into());
    }
    let media: Vec<String> = r.friend_transcript.media_refs().map(|(ts, k, _)| format!("{k}@{ts}")).collect();
    let mut line = String::new();
    let _ = write!(
        line,
        "{mode}\t{response}\t{}\t{}\t{}",
        if outcomes.is_empty() { "-".to_owned() } else { outcomes.join(",") },
        if media.is_empty() { "-".to_owned() } else { media.join(",") },
        r.transcript_digest
    );
    line
}
