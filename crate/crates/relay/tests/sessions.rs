//! Relay sessions over in-memory streams on a paused clock.

use std::time::Duration;

use serde_json::json;
use sharecam_core::protocol::{decode_frame, encode_frame, kind, Frame, MediaKind, NoticeKind, Role, SharingMode};
use sharecam_core::replay::{read_log, replay_friend_transcript};
use sharecam_core::sim::{load_scenario, run_scenario, Action, Scenario};
use sharecam_relay::agent::{plan_live, run_agent, AgentConfig, AgentOutcome};
use sharecam_relay::client::{Client, ClientError};
use sharecam_relay::transport::serve_stream;
use sharecam_relay::{CreateSession, Relay, SessionInfo};
use tokio::io::DuplexStream;
use tokio::time::{sleep, timeout};

fn connect(relay: &Relay) -> Client<DuplexStream> {
    let (ours, theirs) = tokio::io::duplex(1 << 16);
    tokio::spawn(serve_stream(relay.clone(), theirs));
    Client::new(ours)
}

fn create(relay: &Relay, mode: SharingMode) -> SessionInfo {
    relay
        .create_session(CreateSession { friend_id: "fr1".into(), mode, params: Default::default() })
        .unwrap()
}

async fn recv(c: &mut Client<DuplexStream>) -> Frame {
    timeout(Duration::from_secs(60), c.recv()).await.expect("frame within a minute").unwrap()
}

fn refused_code(e: ClientError) -> String {
    match e {
        ClientError::Refused { code, .. } => code,
        other => panic!("expected a refusal, got {other}"),
    }
}

fn cmd(sid: &str, seq: u64, ts: u64, text: &str) -> Frame {
    Frame::new(sid, seq, ts, Role::Friend, kind::CMD, json!({ "text": text }))
}

fn gesture(sid: &str, seq: u64, ts: u64, g: &str) -> Frame {
    Frame::new(sid, seq, ts, Role::Wearer, kind::GESTURE, json!({ "gesture": g }))
}

async fn attach_both(relay: &Relay, info: &SessionInfo) -> (Client<DuplexStream>, Client<DuplexStream>) {
    let mut friend = connect(relay);
    let mut wearer = connect(relay);
    let f = friend.attach(&info.session_id, Role::Friend, &info.token).await.unwrap();
    assert!(!f.active);
    let w = wearer.attach(&info.session_id, Role::Wearer, &info.token).await.unwrap();
    assert!(!w.active, "the attached reply precedes the start");
    (wearer, friend)
}

#[tokio::test(start_paused = true)]
async fn attaching_both_endpoints_invites_the_friend() {
    let dir = tempfile::tempdir().unwrap();
    let relay = Relay::new(dir.path());
    let info = create(&relay, SharingMode::Manual);
    let (mut wearer, mut friend) = attach_both(&relay, &info).await;

    let invite = recv(&mut friend).await;
    assert_eq!(invite.notice_kind(), Some(NoticeKind::Invitation));
    assert_eq!(invite.ts_ms, 0);
    let state = recv(&mut wearer).await;
    assert_eq!(state.kind, kind::SESSION_STATE);
    assert_eq!(state.body, json!({"active": true, "mode": "manual"}));
}

#[tokio::test(start_paused = true)]
async fn attach_errors() {
    let dir = tempfile::tempdir().unwrap();
    let relay = Relay::new(dir.path());
    let info = create(&relay, SharingMode::Manual);

    let mut w1 = connect(&relay);
    w1.attach(&info.session_id, Role::Wearer, &info.token).await.unwrap();
    let mut w2 = connect(&relay);
    assert_eq!(refused_code(w2.attach(&info.session_id, Role::Wearer, &info.token).await.unwrap_err()), "slot_taken");
    let mut f = connect(&relay);
    assert_eq!(refused_code(f.attach(&info.session_id, Role::Friend, "00").await.unwrap_err()), "bad_token");
    assert_eq!(refused_code(f.attach("nope", Role::Friend, &info.token).await.unwrap_err()), "no_such_session");
    assert_eq!(refused_code(f.attach(&info.session_id, Role::Relay, &info.token).await.unwrap_err()), "bad_role");

    // A closed connection frees its slot.
    drop(w1);
    sleep(Duration::from_millis(1)).await;
    w2.attach(&info.session_id, Role::Wearer, &info.token).await.unwrap();
}

#[tokio::test(start_paused = true)]
async fn duplicate_session_id_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let relay = Relay::new(dir.path());
    let req = CreateSession { friend_id: "fr1".into(), mode: SharingMode::Manual, params: Default::default() };
    relay.create_session_with("same".into(), "t".into(), req.clone()).unwrap();
    let err = relay.create_session_with("same".into(), "t".into(), req.clone()).unwrap_err();
    assert_eq!(err.code(), "id_collision");
    // A log left by another relay instance also claims the id.
    let other = Relay::new(dir.path());
    assert_eq!(other.create_session_with("same".into(), "t".into(), req).unwrap_err().code(), "id_collision");
}

#[tokio::test(start_paused = true)]
async fn sessions_are_created_over_the_wire() {
    let dir = tempfile::tempdir().unwrap();
    let relay = Relay::new(dir.path());
    let mut admin = connect(&relay);
    let created = admin.create_session("fr1", SharingMode::Auto, None).await.unwrap();
    assert_eq!(created.token.len(), 32);
    assert!(relay.session_ids().contains(&created.session_id));
    assert!(dir.path().join(format!("{}.fslog", created.session_id)).exists());

    let bad = Frame::new("", 9, 0, Role::Wearer, kind::CREATE_SESSION, json!({"friend_id": "x", "params": {"video_tx_ms": 0}}));
    admin.send(&bad).await.unwrap();
    let reply = recv(&mut admin).await;
    assert_eq!((reply.kind.as_str(), reply.body_str("code")), (kind::ERROR, Some("bad_params")));
}

#[tokio::test(start_paused = true)]
async fn trigger_then_press_delivers_photo_with_countdown() {
    let dir = tempfile::tempdir().unwrap();
    let relay = Relay::new(dir.path());
    let info = create(&relay, SharingMode::Manual);
    let (mut wearer, mut friend) = attach_both(&relay, &info).await;
    let sid = info.session_id.clone();
    recv(&mut friend).await;
    recv(&mut wearer).await;

    friend.send(&cmd(&sid, 1, 0, "T")).await.unwrap();
    let ack = recv(&mut friend).await;
    assert_eq!((ack.notice_kind(), ack.ts_ms), (Some(NoticeKind::TriggerReceived), 0));
    let green = recv(&mut wearer).await;
    assert_eq!(green.body["set"]["color"], "green");

    sleep(Duration::from_millis(4_000)).await;
    wearer.send(&gesture(&sid, 1, 4_000, "press")).await.unwrap();

    let mut notices = Vec::new();
    let media = loop {
        let f = recv(&mut friend).await;
        if f.kind == kind::MEDIA {
            break f;
        }
        notices.push((f.ts_ms, f.notice_kind().unwrap()));
    };
    assert_eq!(
        notices,
        vec![
            (5_000, NoticeKind::TriggerApproved(MediaKind::Photo)),
            (5_000, NoticeKind::Transmitting),
            (5_000, NoticeKind::Countdown(1)),
        ]
    );
    assert_eq!(media.ts_ms, 6_000);
    let (_, _, size) = media.media_ref().unwrap();
    let payload = sharecam_relay::payload::decode_payload(media.body_str("payload").unwrap()).unwrap();
    assert_eq!(payload.len() as u64, size);

    let led: Vec<(u64, serde_json::Value)> = {
        let mut v = Vec::new();
        while v.len() < 3 {
            let f = recv(&mut wearer).await;
            v.push((f.ts_ms, f.body));
        }
        v
    };
    assert_eq!(led[0].0, 4_000);
    assert_eq!(led[0].1["set"]["pattern"], "solid");
    assert_eq!((led[1].0, &led[1].1["set"]["pattern"]), (5_000, &json!("flashing")));
    assert_eq!((led[2].0, &led[2].1), (6_000, &json!({"clear": true})));
}

#[tokio::test(start_paused = true)]
async fn bad_input_gets_an_error_and_the_session_continues() {
    let dir = tempfile::tempdir().unwrap();
    let relay = Relay::new(dir.path());
    let info = create(&relay, SharingMode::Manual);
    let (mut wearer, mut friend) = attach_both(&relay, &info).await;
    let sid = info.session_id.clone();
    recv(&mut friend).await;
    recv(&mut wearer).await;

    let (ours, theirs) = tokio::io::duplex(1 << 16);
    tokio::spawn(serve_stream(relay.clone(), theirs));
    let mut raw = ours;
    tokio::io::AsyncWriteExt::write_all(&mut raw, b"{\"v\":1,\"kind\":\n").await.unwrap();
    let mut raw_client = Client::new(raw);
    let e = recv(&mut raw_client).await;
    assert_eq!(e.body_str("code"), Some("malformed"));

    friend.send(&cmd(&sid, 5, 0, "T")).await.unwrap();
    assert_eq!(recv(&mut friend).await.notice_kind(), Some(NoticeKind::TriggerReceived));
    friend.send(&cmd(&sid, 5, 0, "T")).await.unwrap();
    assert_eq!(recv(&mut friend).await.body_str("code"), Some("seq"));
    friend.send(&Frame::new(sid.as_str(), 6, 0, Role::Friend, kind::GESTURE, json!({"gesture": "press"}))).await.unwrap();
    assert_eq!(recv(&mut friend).await.body_str("code"), Some("unexpected_kind"));
    friend.send(&Frame::new(sid.as_str(), 7, 0, Role::Wearer, kind::CMD, json!({"text": "T"}))).await.unwrap();
    assert_eq!(recv(&mut friend).await.body_str("code"), Some("wrong_role"));
    wearer.send(&Frame::new(sid.as_str(), 1, 0, Role::Wearer, kind::GESTURE, json!({"gesture": "wink"}))).await.unwrap();
    let wearer_err = loop {
        let f = recv(&mut wearer).await;
        if f.kind == kind::ERROR {
            break f;
        }
    };
    assert_eq!(wearer_err.body_str("code"), Some("bad_body"));
    // A malformed line from an attached endpoint is answered in the session's order.
    friend.send(&Frame::new(sid.as_str(), 8, 0, Role::Friend, kind::CMD, json!({"no_text": 1}))).await.unwrap();
    assert_eq!(recv(&mut friend).await.body_str("code"), Some("bad_body"));

    // The pending trigger still times out normally.
    let unavailable = recv(&mut friend).await;
    assert_eq!((unavailable.notice_kind(), unavailable.ts_ms), (Some(NoticeKind::Unavailable), 10_000));
}

#[tokio::test(start_paused = true)]
async fn late_friend_gets_no_backfill() {
    let dir = tempfile::tempdir().unwrap();
    let relay = Relay::new(dir.path());
    let info = create(&relay, SharingMode::Manual);
    let (mut wearer, friend) = attach_both(&relay, &info).await;
    recv(&mut wearer).await;
    drop(friend);
    sleep(Duration::from_millis(500)).await;
    wearer.send(&gesture(&info.session_id, 1, 500, "press")).await.unwrap();
    sleep(Duration::from_millis(1_000)).await;

    let mut late = connect(&relay);
    let attached = late.attach(&info.session_id, Role::Friend, &info.token).await.unwrap();
    assert!(attached.active);
    assert_eq!(attached.ts_ms, 1_500);
    // The held photo is released at 11500 and arrives after its transmission.
    let next = recv(&mut late).await;
    assert_eq!((next.notice_kind(), next.ts_ms), (Some(NoticeKind::Transmitting), 11_500));
}

#[tokio::test(start_paused = true)]
async fn shutdown_drops_undelivered_media_and_closes_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let relay = Relay::new(dir.path());
    let info = create(&relay, SharingMode::Auto);
    let (mut wearer, mut friend) = attach_both(&relay, &info).await;
    recv(&mut friend).await;
    recv(&mut wearer).await;
    friend.send(&cmd(&info.session_id, 1, 0, "T")).await.unwrap();
    sleep(Duration::from_millis(21_000)).await;
    relay.shutdown().await;

    let text = std::fs::read_to_string(&info.log_path).unwrap();
    assert!(text.ends_with('\n'));
    let frames = read_log(&text).unwrap();
    let last = frames.last().unwrap();
    assert_eq!((last.kind.as_str(), last.body_str("code")), (kind::ERROR, Some("dropped")));
    assert!(frames.iter().all(|f| f.kind != kind::MEDIA));
    assert!(relay.session_ids().is_empty());
}

fn assert_log_is_clean(text: &str) {
    let frames = read_log(text).unwrap();
    let relay_seqs: Vec<u64> = frames.iter().filter(|f| f.from == Role::Relay).map(|f| f.seq).collect();
    assert!(relay_seqs.windows(2).all(|w| w[0] < w[1]), "relay seq not increasing: {relay_seqs:?}");
    for f in frames.iter().filter(|f| f.kind == kind::MEDIA) {
        assert!(f.body.get("payload").is_none());
        assert!(f.media_ref().is_some());
    }
}

async fn play(relay: &Relay, scenario: &Scenario, linger_ms: u64) -> (SessionInfo, AgentOutcome, AgentOutcome) {
    let plan = plan_live(scenario);
    let info = relay
        .create_session(CreateSession { friend_id: "fr1".into(), mode: plan.mode, params: plan.params })
        .unwrap();
    let cfg = |role, events| AgentConfig {
        role,
        session_id: info.session_id.clone(),
        token: info.token.clone(),
        events,
        linger: Duration::from_millis(linger_ms),
    };
    let (fcfg, wcfg) = (cfg(Role::Friend, plan.friend), cfg(Role::Wearer, plan.wearer));
    let mut fc = connect(relay);
    let mut wc = connect(relay);
    let (f, w) = tokio::join!(run_agent(&mut fc, &fcfg), run_agent(&mut wc, &wcfg));
    (info, f.unwrap(), w.unwrap())
}

fn shipped(name: &str) -> Scenario {
    load_scenario(format!("{}/../../scenarios/{name}.scn", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[tokio::test(start_paused = true)]
async fn live_sessions_match_the_simulator() {
    let dir = tempfile::tempdir().unwrap();
    let relay = Relay::new(dir.path());
    for name in ["auto_timeout", "held_video_fast", "held_photo_fast", "manual_timeout", "manual_decline", "led_press", "off_mode"] {
        let sc = shipped(name);
        let sim = run_scenario(&sc);
        let (info, friend, wearer) = play(&relay, &sc, 30_000).await;
        let live = friend.friend.as_ref().unwrap().transcript();
        assert_eq!(live.digest(), sim.transcript_digest, "{name}:\n{}\nvs\n{}", live.render(), sim.friend_transcript.render());
        assert!(friend.skipped.is_empty() && wearer.skipped.is_empty(), "{name}");
        assert!(friend.payload_mismatches.is_empty());

        let log = std::fs::read_to_string(&info.log_path).unwrap();
        assert_log_is_clean(&log);
        assert_eq!(replay_friend_transcript(&log).unwrap().digest(), live.digest(), "{name}: log replay");

        let leds: Vec<&Frame> = wearer.received.iter().filter(|f| f.kind == kind::LED).collect();
        let lit = leds.iter().filter(|f| f.body.get("set").is_some()).count();
        assert!(lit >= sim.led_timeline.len(), "{name}");
    }
}

#[tokio::test(start_paused = true)]
async fn wearer_ending_the_session_says_goodbye() {
    let dir = tempfile::tempdir().unwrap();
    let relay = Relay::new(dir.path());
    let sc = Scenario::new("bye", SharingMode::Manual)
        .event(0, Action::StartSession { mode: None })
        .event(3_000, Action::EndSession);
    let (_, friend, wearer) = play(&relay, &sc, 5_000).await;
    let texts: Vec<&str> = friend.friend.as_ref().unwrap().transcript().notice_texts().map(|(_, t)| t).collect();
    assert_eq!(texts.last().copied(), Some(sharecam_core::protocol::text::SESSION_ENDED));
    let states: Vec<&serde_json::Value> =
        wearer.received.iter().filter(|f| f.kind == kind::SESSION_STATE).map(|f| &f.body["active"]).collect();
    assert_eq!(states, [&json!(true), &json!(false)]);
}

#[tokio::test(start_paused = true)]
async fn concurrent_sessions_keep_separate_order_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let relay = Relay::new(dir.path());
    let a = shipped("auto_timeout");
    let b = shipped("held_photo_fast");
    let ((ia, fa, _), (ib, fb, _)) = tokio::join!(play(&relay, &a, 30_000), play(&relay, &b, 30_000));
    assert_ne!(ia.log_path, ib.log_path);
    assert_eq!(fa.friend.unwrap().transcript().digest(), run_scenario(&a).transcript_digest);
    assert_eq!(fb.friend.unwrap().transcript().digest(), run_scenario(&b).transcript_digest);
    for info in [ia, ib] {
        let log = std::fs::read_to_string(&info.log_path).unwrap();
        assert_log_is_clean(&log);
        assert!(read_log(&log).unwrap().iter().all(|f| f.session_id == info.session_id));
    }
}

#[test]
fn plan_live_moves_the_opening_start_into_the_session() {
    let sc = Scenario::new("p", SharingMode::Manual)
        .event(0, Action::StartSession { mode: Some(SharingMode::Auto) })
        .event(0, Action::Command { text: "T".into() })
        .event(5, Action::EndSession);
    let plan = plan_live(&sc);
    assert_eq!(plan.mode, SharingMode::Auto);
    assert_eq!(plan.wearer.len(), 1);
    assert_eq!(plan.friend.len(), 1);
}

#[test]
fn log_lines_are_wire_frames() {
    let f = cmd("s", 1, 0, "T");
    assert_eq!(decode_frame(&encode_frame(&f)).unwrap(), f);
}

#[tokio::test(start_paused = true)]
async fn inbound_frames_win_ties_with_timers() {
    let dir = tempfile::tempdir().unwrap();
    let relay = Relay::new(dir.path());
    // The second T lands on the first one's deadline and joins it.
    let sc = Scenario::new("tie", SharingMode::Manual)
        .event(0, Action::StartSession { mode: None })
        .event(0, Action::Command { text: "T".into() })
        .event(10_000, Action::Command { text: "T".into() });
    let sim = run_scenario(&sc);
    assert_eq!(sim.metrics.triggers_coalesced, 1);
    let (info, friend, _) = play(&relay, &sc, 15_000).await;
    let live = friend.friend.as_ref().unwrap().transcript();
    assert_eq!(live.digest(), sim.transcript_digest, "{}\nvs\n{}", live.render(), sim.friend_transcript.render());
    let log = std::fs::read_to_string(&info.log_path).unwrap();
    assert_eq!(replay_friend_transcript(&log).unwrap().digest(), live.digest());
}
