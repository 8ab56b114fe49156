//! End-to-end timing examples on an ideal network with default timings.

use sharecam_core::friend::{Direction, EntryContent};
use sharecam_core::protocol::text;
use sharecam_core::protocol::{Gesture, LedColor, LedPattern, MediaKind, SharingMode};
use sharecam_core::sim::{compute_metrics, load_scenario, run_scenario, Action, Scenario, SimReport};

fn scenario(mode: SharingMode) -> Scenario {
    Scenario::new("example", mode).event(0, Action::StartSession { mode: None })
}

fn t(text: &str) -> Action {
    Action::Command { text: text.into() }
}

fn g(gesture: Gesture) -> Action {
    Action::Gesture { gesture }
}

fn media_arrivals(r: &SimReport) -> Vec<(u64, MediaKind)> {
    r.friend_transcript.media_refs().map(|(ts, k, _)| (ts, k)).collect()
}

fn notices(r: &SimReport) -> Vec<(u64, String)> {
    r.friend_transcript.notice_texts().map(|(ts, s)| (ts, s.to_owned())).collect()
}

fn shipped(name: &str) -> Scenario {
    load_scenario(format!("{}/../../scenarios/{name}.scn", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn auto_timeout_delivers_video_at_25s() {
    let sc = shipped("auto_timeout");
    assert_eq!(sc.events.len(), 2);
    let r = run_scenario(&sc);
    assert_eq!(media_arrivals(&r), vec![(25_000, MediaKind::Video)]);
    assert_eq!(r.metrics.latencies_ms, vec![25_000]);
    assert_eq!(r.metrics.fulfilled_auto, 1);
    let expected: Vec<(u64, String)> = vec![
        (0, text::INVITATION.into()),
        (0, text::TRIGGER_RECEIVED.into()),
        (20_000, text::APPROVED_VIDEO.into()),
        (20_000, text::TRANSMITTING.into()),
        (20_000, "5..".into()),
        (21_000, "4..".into()),
        (22_000, "3..".into()),
        (23_000, "2..".into()),
        (24_000, "1..".into()),
    ];
    assert_eq!(notices(&r), expected);
}

#[test]
fn manual_press_at_deadline_delivers_photo_at_12s() {
    let r = run_scenario(&shipped("manual_press_at_deadline"));
    assert_eq!(media_arrivals(&r), vec![(12_000, MediaKind::Photo)]);
    assert_eq!(r.metrics.fulfilled_early, 1);
    assert_eq!(r.metrics.unavailable_count, 0);
}

#[test]
fn held_video_reaches_trigger_in_5s() {
    let r = run_scenario(&shipped("held_video_fast"));
    assert_eq!(media_arrivals(&r), vec![(18_000, MediaKind::Video)]);
    assert_eq!(r.metrics.fulfilled_fast, 1);
    assert_eq!(r.metrics.latencies_ms, vec![5_000]);
}

#[test]
fn held_photo_reaches_trigger_in_1s() {
    let r = run_scenario(&shipped("held_photo_fast"));
    assert_eq!(media_arrivals(&r), vec![(4_000, MediaKind::Photo)]);
    assert_eq!(r.metrics.latencies_ms, vec![1_000]);
}

#[test]
fn photo_countdown_after_fast_fulfillment() {
    // Photo held from 1000; a trigger at 11000 is too late, the hold released at 11000 first.
    let sc = scenario(SharingMode::Manual).event(0, g(Gesture::Press)).event(10_999, t("T"));
    let r = run_scenario(&sc);
    let n = notices(&r);
    assert!(n.contains(&(10_999, text::TRANSMITTING.into())), "{n:?}");
    assert!(n.contains(&(10_999, "1..".into())), "{n:?}");
    assert_eq!(media_arrivals(&r), vec![(11_999, MediaKind::Photo)]);
}

#[test]
fn manual_timeout_and_decline_look_identical() {
    let timeout = run_scenario(&shipped("manual_timeout"));
    let decline = run_scenario(&shipped("manual_decline"));
    assert_eq!(timeout.transcript_digest, decline.transcript_digest);
    assert!(notices(&timeout).contains(&(10_000, text::UNAVAILABLE.into())));
    assert!(!notices(&decline).iter().any(|(ts, s)| s == text::UNAVAILABLE && *ts != 10_000));
}

#[test]
fn mode_change_while_pending_uses_mode_at_deadline() {
    let sc = scenario(SharingMode::Manual)
        .event(0, t("T"))
        .event(3_000, Action::SetMode { mode: SharingMode::Auto });
    let r = run_scenario(&sc);
    assert_eq!(media_arrivals(&r), vec![(25_000, MediaKind::Video)]);
    assert!(notices(&r).contains(&(3_000, text::MODE_AUTO.into())));
}

#[test]
fn off_mode_pauses_triggers() {
    let r = run_scenario(&scenario(SharingMode::Off).event(10, t("T")));
    assert_eq!(notices(&r).last().unwrap(), &(10, text::TRIGGERS_PAUSED.to_owned()));
    assert_eq!(r.metrics.triggers_sent, 1);
    assert!(r.friend_transcript.media_refs().next().is_none());
}

#[test]
fn coalesced_trigger_only_acknowledged() {
    let r = run_scenario(&scenario(SharingMode::Auto).event(0, t("T")).event(4_000, t("T")));
    assert_eq!(r.metrics.triggers_coalesced, 1);
    assert_eq!(r.metrics.latencies_ms, vec![25_000]);
    let acks = notices(&r).iter().filter(|(_, s)| s == text::TRIGGER_RECEIVED).count();
    assert_eq!(acks, 2);
}

#[test]
fn held_video_released_after_hold() {
    let r = run_scenario(&scenario(SharingMode::Manual).event(0, g(Gesture::PressHold)));
    assert_eq!(media_arrivals(&r), vec![(25_000, MediaKind::Video)]);
    assert!(r.metrics.latencies_ms.is_empty());
    assert!(notices(&r).contains(&(20_000, text::TRANSMITTING.into())));
}

#[test]
fn led_timeline_for_press_during_pending() {
    let r = run_scenario(&shipped("led_press"));
    let tl: Vec<_> = r.led_timeline.iter().map(|s| (s.color, s.pattern, s.start_ms, s.end_ms)).collect();
    assert_eq!(
        tl,
        vec![
            (LedColor::Green, LedPattern::Flashing, 0, 4_000),
            (LedColor::White, LedPattern::Solid, 4_000, 5_000),
            (LedColor::White, LedPattern::Flashing, 5_000, 6_000),
        ]
    );
}

#[test]
fn network_latency_shifts_everything() {
    let mut sc = scenario(SharingMode::Auto).event(100, t("T"));
    sc.network.to_wearer.base_latency_ms = 40;
    sc.network.to_friend.base_latency_ms = 60;
    let r = run_scenario(&sc);
    let sent = r.friend_transcript.entries().iter().find(|e| e.direction == Direction::Sent).unwrap();
    assert_eq!(sent.ts_ms, 100);
    assert_eq!(media_arrivals(&r), vec![(140 + 25_000 + 60, MediaKind::Video)]);
    assert_eq!(r.metrics.latencies_ms, vec![25_100]);
}

#[test]
fn dropping_every_command_creates_no_trigger() {
    let mut sc = shipped("fuzz");
    sc.network.to_wearer.drop_prob = 1.0;
    let r = run_scenario(&sc);
    assert!(r.metrics.triggers_sent > 0);
    assert!(r.wearer_log.iter().all(|s| !matches!(s.input, sharecam_core::wearer::WearerInput::FriendCommand { .. })));
    assert_eq!(r.metrics.fulfilled_auto + r.metrics.fulfilled_early + r.metrics.fulfilled_fast, 0);
}

#[test]
fn plain_text_reaches_nobody() {
    let r = run_scenario(&scenario(SharingMode::Manual).event(5, t("hello there")));
    let last = r.friend_transcript.entries().last().unwrap();
    assert_eq!(last.content, EntryContent::CommandText { text: "hello there".into() });
    assert_eq!(r.wearer_log.len(), 1);
}

#[test]
fn friend_cannot_text_before_invitation() {
    let mut sc = Scenario::new("early", SharingMode::Manual).event(0, t("T")).event(0, Action::StartSession { mode: None });
    sc.network.to_friend.base_latency_ms = 10;
    let r = run_scenario(&sc);
    assert_eq!(r.metrics.triggers_sent, 0);
    assert_eq!(r.friend_transcript.len(), 1);
}

#[test]
fn end_session_flushes_hold_and_says_goodbye() {
    let sc = scenario(SharingMode::Manual).event(0, g(Gesture::Press)).event(2_000, Action::EndSession);
    let r = run_scenario(&sc);
    assert_eq!(media_arrivals(&r), vec![(3_000, MediaKind::Photo)]);
    assert!(notices(&r).contains(&(2_000, text::SESSION_ENDED.into())));
}

#[test]
fn no_triggers_means_zero_trigger_metrics() {
    let r = run_scenario(&scenario(SharingMode::Auto).event(100, g(Gesture::Press)));
    let m = compute_metrics(&r.wearer_log, &r.friend_transcript).unwrap();
    assert_eq!(m, r.metrics);
    assert_eq!((m.triggers_sent, m.fulfilled_auto, m.fulfilled_early, m.fulfilled_fast), (0, 0, 0, 0));
    assert_eq!(m.media_delivered, 1);
}

#[test]
fn same_seed_same_bytes() {
    let sc = shipped("fuzz");
    assert_eq!(run_scenario(&sc).to_machine(), run_scenario(&sc).to_machine());
    assert_ne!(run_scenario(&sc).to_machine(), run_scenario(&sc.clone().with_seed(8)).to_machine());
}
