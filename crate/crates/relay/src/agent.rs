//! Headless scripted endpoints.
//!
//! An agent attaches to a session and plays a timed script written in the scenario
//! event grammar. Script times are on the session clock, which the relay reports on
//! attach. Nothing is played until the endpoint can act: the Friend waits for the
//! invitation and the Wearer for an active session; overdue events then play at once,
//! in order.

use std::fmt::Write as _;
use std::time::Duration;

use serde_json::json;
use sharecam_core::friend::FriendAgent;
use sharecam_core::protocol::{kind, parse_friend_text, Frame, ParsedText, ProtocolParams, Role, SharingMode, Timestamp};
use sharecam_core::sim::{Action, Actor, Scenario, ScenarioEvent};
use tokio::io::{AsyncRead, AsyncWrite};
use tokio::time::{sleep_until, Instant};

use crate::client::{Client, ClientError};
use crate::payload::decode_payload;

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub role: Role,
    pub session_id: String,
    pub token: String,
    pub events: Vec<ScenarioEvent>,
    /// How long to keep listening after the last event.
    pub linger: Duration,
}

#[derive(Debug, Clone)]
pub struct AgentOutcome {
    pub role: Role,
    /// Every frame received after attaching, media payloads removed.
    pub received: Vec<Frame>,
    /// The Friend's transcript; empty for the Wearer.
    pub friend: Option<FriendAgent>,
    /// Script events that could not be played, with the reason.
    pub skipped: Vec<(ScenarioEvent, String)>,
    /// Media frames whose payload did not match the advertised size.
    pub payload_mismatches: Vec<u64>,
    /// The first [`PAYLOAD_HEAD_LEN`] bytes of every payload received, for leak checks.
    pub payload_heads: Vec<Vec<u8>>,
}

pub const PAYLOAD_HEAD_LEN: usize = 48;

impl AgentOutcome {
    pub fn render(&self) -> String {
        let mut out = String::new();
        match &self.friend {
            Some(friend) => {
                let t = friend.transcript();
                let _ = writeln!(out, "transcript {} ({} entries)", t.digest(), t.len());
                out.push_str(&t.render());
            }
            None => {
                for f in &self.received {
                    let _ = writeln!(out, "{:>9}  {:<13} {}", f.ts_ms, f.kind, f.body);
                }
            }
        }
        for (ev, why) in &self.skipped {
            let _ = writeln!(out, "skipped event at {} ms: {why}", ev.at_ms);
        }
        for id in &self.payload_mismatches {
            let _ = writeln!(out, "media {id}: payload size mismatch");
        }
        out
    }
}

/// A scenario split into what the relay and each live endpoint need.
#[derive(Debug, Clone, PartialEq)]
pub struct LivePlan {
    pub mode: SharingMode,
    pub params: ProtocolParams,
    pub wearer: Vec<ScenarioEvent>,
    pub friend: Vec<ScenarioEvent>,
}

/// Live sessions start when both endpoints attach, so a leading `start_session` at
/// time 0 becomes the session's creation mode instead of a wearer event.
pub fn plan_live(scenario: &Scenario) -> LivePlan {
    let mut events: Vec<&ScenarioEvent> = scenario.events.iter().collect();
    let mut mode = scenario.initial_mode;
    if let Some(i) = events.iter().position(|e| e.actor() == Actor::Wearer) {
        if let (0, Action::StartSession { mode: start_mode }) = (events[i].at_ms, &events[i].action) {
            mode = start_mode.unwrap_or(mode);
            events.remove(i);
        }
    }
    let pick = |actor| events.iter().filter(|e| e.actor() == actor).map(|e| (*e).clone()).collect();
    LivePlan { mode, params: scenario.params, wearer: pick(Actor::Wearer), friend: pick(Actor::Friend) }
}

pub async fn run_agent<S>(client: &mut Client<S>, cfg: &AgentConfig) -> Result<AgentOutcome, ClientError>
where
    S: AsyncRead + AsyncWrite,
{
    let attached = client.attach(&cfg.session_id, cfg.role, &cfg.token).await?;
    let origin = Instant::now();
    let base = attached.ts_ms;
    let now = || base + origin.elapsed().as_millis() as Timestamp;
    let at = |ts: Timestamp| origin + Duration::from_millis(ts.saturating_sub(base));

    let mut outcome = AgentOutcome {
        role: cfg.role,
        received: Vec::new(),
        friend: (cfg.role == Role::Friend).then(|| FriendAgent::new(cfg.session_id.clone())),
        skipped: Vec::new(),
        payload_mismatches: Vec::new(),
        payload_heads: Vec::new(),
    };
    let mut ready = cfg.role == Role::Wearer && attached.active;
    let mut wearer_seq = 0u64;
    let mut next = 0usize;
    let last_event = cfg.events.last().map_or(base, |e| e.at_ms);
    let stop_at = at(last_event.max(base)) + cfg.linger;

    loop {
        if ready && next < cfg.events.len() && cfg.events[next].at_ms <= now() {
            let ev = &cfg.events[next];
            next += 1;
            let frame = match (&mut outcome.friend, &ev.action) {
                (Some(friend), Action::Command { text }) => {
                    let sent = match parse_friend_text(text) {
                        ParsedText::Command(cmd) => friend.send_command(cmd, now()),
                        ParsedText::PlainText(_) => friend.send_text(text, now()),
                    };
                    sent.map_err(|e| e.to_string())
                }
                (None, action) => {
                    wearer_seq += 1;
                    wearer_frame(&cfg.session_id, wearer_seq, now(), action)
                }
                (Some(_), _) => Err("not a friend action".to_owned()),
            };
            match frame {
                Ok(frame) => client.send(&frame).await?,
                Err(why) => outcome.skipped.push((ev.clone(), why)),
            }
            continue;
        }
        let done = next == cfg.events.len();
        let wake = if ready && !done { at(cfg.events[next].at_ms) } else { stop_at };
        if done && Instant::now() >= stop_at {
            break;
        }
        tokio::select! {
            biased;
            frame = client.recv() => {
                let frame = match frame {
                    Ok(f) => f,
                    Err(ClientError::Closed) => break,
                    Err(e) => return Err(e),
                };
                let ts = now();
                if frame.kind == kind::MEDIA {
                    check_payload(&frame, &mut outcome);
                }
                match &mut outcome.friend {
                    Some(friend) => {
                        // Frames are ingested at receipt time; errors only mean a foreign frame.
                        let _ = friend.ingest(&frame, ts);
                        ready |= friend.is_invited();
                    }
                    None => {
                        if frame.kind == kind::SESSION_STATE && frame.body.get("active") == Some(&json!(true)) {
                            ready = true;
                        }
                    }
                }
                outcome.received.push(frame.redacted());
            }
            () = sleep_until(wake) => {
                if done {
                    break;
                }
            }
        }
    }
    Ok(outcome)
}

fn wearer_frame(session_id: &str, seq: u64, now: Timestamp, action: &Action) -> Result<Frame, String> {
    let (k, body) = match action {
        Action::Gesture { gesture } => (kind::GESTURE, json!({ "gesture": gesture })),
        Action::SetMode { mode } => (kind::SET_MODE, json!({ "mode": mode })),
        Action::EndSession => (kind::END_SESSION, json!({})),
        Action::StartSession { mode: Some(mode) } => (kind::START_SESSION, json!({ "mode": mode })),
        Action::StartSession { mode: None } => (kind::START_SESSION, json!({})),
        Action::Command { .. } => return Err("not a wearer action".into()),
    };
    Ok(Frame::new(session_id, seq, now, Role::Wearer, k, body))
}

fn check_payload(frame: &Frame, outcome: &mut AgentOutcome) {
    let id = frame.body.get("id").and_then(serde_json::Value::as_u64).unwrap_or(0);
    let size = frame.body.get("size_bytes").and_then(serde_json::Value::as_u64);
    let bytes = frame.body_str("payload").and_then(decode_payload);
    if bytes.as_ref().map(|b| b.len() as u64) != size {
        outcome.payload_mismatches.push(id);
    }
    if let Some(bytes) = bytes {
        outcome.payload_heads.push(bytes[..bytes.len().min(PAYLOAD_HEAD_LEN)].to_vec());
    }
}
