//! Per-session executor.
//!
//! One task owns a session's [`SessionHost`], its two endpoint slots and its log,
//! and handles attach requests, inbound frames and timers one at a time. Every
//! frame it emits takes the next relay sequence number, so both endpoints and the
//! log observe a single total order.

use std::io;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde_json::json;
use sharecam_core::protocol::{
    encode_frame, kind, parse_friend_text, Frame, Gesture, ParsedText, Role, SharingMode, Timestamp,
};
use sharecam_core::relay::{Audience, HostOutput, Outbound, SessionHost};
use sharecam_core::wearer::{Effect, LogEntry, WearerInput};
use tokio::sync::{mpsc, oneshot};
use tokio::time::{sleep_until, Instant};

use crate::log::SessionLog;
use crate::payload::{encode_payload, synthetic_payload};
use crate::registry::{AttachError, SessionRecord};

/// Scheduler passes a due timer waits for same-instant inbound frames, one per hop
/// between a peer's socket and this executor.
const SETTLE_ROUNDS: usize = 8;

/// Encoded frames on their way to one connection.
pub(crate) type Outbox = mpsc::UnboundedSender<String>;

pub(crate) enum Command {
    Attach { role: Role, token: String, out: Outbox, reply: oneshot::Sender<Result<u64, AttachError>> },
    Inbound { conn: u64, frame: Frame },
    Malformed { conn: u64, reason: String },
    Detach { conn: u64 },
    Shutdown { done: oneshot::Sender<()> },
}

struct Endpoint {
    conn: u64,
    out: Outbox,
    last_seq: Option<u64>,
}

pub(crate) struct Executor {
    record: SessionRecord,
    host: SessionHost,
    log: Option<SessionLog>,
    log_error: Option<io::Error>,
    epoch: Instant,
    wearer: Option<Endpoint>,
    friend: Option<Endpoint>,
    next_conn: u64,
    started: bool,
    announced: (bool, SharingMode),
}

impl Executor {
    pub(crate) fn new(record: SessionRecord, log: SessionLog, epoch: Instant) -> Self {
        let host = SessionHost::new(record.session_id.clone(), record.friend_id.clone(), record.params);
        let announced = (false, record.mode);
        Self {
            record,
            host,
            log: Some(log),
            log_error: None,
            epoch,
            wearer: None,
            friend: None,
            next_conn: 0,
            started: false,
            announced,
        }
    }

    pub(crate) async fn run(mut self, mut rx: mpsc::UnboundedReceiver<Command>) {
        loop {
            let deadline = self.host.next_timer_at().map(|at| self.epoch + Duration::from_millis(at));
            let stop = tokio::select! {
                biased;
                cmd = rx.recv() => self.command(cmd),
                () = wait_until(deadline) => {
                    let mut stop = None;
                    // Frames sent in the same instant are still on their way; they win the tie.
                    for _ in 0..SETTLE_ROUNDS {
                        tokio::task::yield_now().await;
                        while stop.is_none() {
                            match rx.try_recv() {
                                Ok(cmd) => stop = self.command(Some(cmd)),
                                Err(mpsc::error::TryRecvError::Empty) => break,
                                Err(mpsc::error::TryRecvError::Disconnected) => stop = self.command(None),
                            }
                        }
                    }
                    if stop.is_none() {
                        let now = self.now_ms();
                        self.fire_timers(now);
                    }
                    stop
                }
            };
            if let Some(done) = stop {
                self.finish();
                if let Some(done) = done {
                    let _ = done.send(());
                }
                return;
            }
            if let Some(e) = self.log_error.take() {
                self.abort(&e);
                return;
            }
        }
    }

    /// Handles one command. `Some` means stop, acknowledging through the sender if any.
    fn command(&mut self, cmd: Option<Command>) -> Option<Option<oneshot::Sender<()>>> {
        match cmd {
            Some(Command::Shutdown { done }) => Some(Some(done)),
            Some(cmd) => {
                self.handle(cmd);
                None
            }
            None => Some(None),
        }
    }

    fn now_ms(&self) -> Timestamp {
        let ms = Instant::now().saturating_duration_since(self.epoch).as_millis();
        Timestamp::try_from(ms).unwrap_or(Timestamp::MAX)
    }

    fn handle(&mut self, cmd: Command) {
        let now = self.now_ms();
        // Timers due strictly earlier go first; at equal times inbound frames win.
        if let Some(before) = now.checked_sub(1) {
            self.fire_timers(before);
        }
        match cmd {
            Command::Attach { role, token, out, reply } => self.attach(role, &token, out, reply, now),
            Command::Inbound { conn, frame } => {
                if let Some(role) = self.role_of(conn) {
                    self.inbound(role, frame, now);
                }
            }
            Command::Malformed { conn, reason } => {
                if let Some(role) = self.role_of(conn) {
                    self.error(role, now, "malformed", reason);
                }
            }
            Command::Detach { conn } => {
                if let Some(role) = self.role_of(conn) {
                    *self.slot(role) = None;
                    self.record.detach(role);
                }
            }
            Command::Shutdown { .. } => unreachable!("handled by the run loop"),
        }
    }

    fn fire_timers(&mut self, until: Timestamp) {
        while let Some(at) = self.host.next_timer_at().filter(|&at| at <= until) {
            let out = self.host.fire_next(at).expect("timer is due");
            self.deliver(out, None, at);
        }
    }

    fn attach(
        &mut self,
        role: Role,
        token: &str,
        out: Outbox,
        reply: oneshot::Sender<Result<u64, AttachError>>,
        now: Timestamp,
    ) {
        if let Err(e) = self.record.attach(role, token) {
            let _ = reply.send(Err(e));
            return;
        }
        self.next_conn += 1;
        let conn = self.next_conn;
        *self.slot(role) = Some(Endpoint { conn, out, last_seq: None });
        if reply.send(Ok(conn)).is_err() {
            // The connection went away while waiting.
            *self.slot(role) = None;
            self.record.detach(role);
            return;
        }
        let seq = self.host.next_seq();
        let body = json!({ "role": role, "active": self.session_active() });
        self.emit(role, Frame::new(self.sid(), seq, now, Role::Relay, kind::ATTACHED, body), None);

        if self.record.both_attached() && !self.started {
            self.started = true;
            let out = self.host.start_session(self.record.mode, now);
            self.deliver(out, None, now);
        }
    }

    fn inbound(&mut self, role: Role, frame: Frame, now: Timestamp) {
        if frame.from != role {
            return self.error(role, now, "wrong_role", format!("attached as {role}, frame is from {}", frame.from));
        }
        if frame.session_id != self.record.session_id {
            return self.error(role, now, "wrong_session", format!("attached to session {}", self.record.session_id));
        }
        let endpoint = self.slot(role).as_mut().expect("role is attached");
        if let Some(last) = endpoint.last_seq.filter(|&last| frame.seq <= last) {
            return self.error(role, now, "seq", format!("seq {} is not greater than {last}", frame.seq));
        }
        endpoint.last_seq = Some(frame.seq);
        self.log(&frame);

        let input = match (role, frame.kind.as_str()) {
            (Role::Friend, kind::CMD) => match field::<String>(&frame, "text") {
                // Free text has no reader on the device side.
                Ok(text) => match parse_friend_text(&text) {
                    ParsedText::Command(cmd) => Ok(Some(WearerInput::FriendCommand { cmd, seq: frame.seq })),
                    ParsedText::PlainText(_) => Ok(None),
                },
                Err(e) => Err(e),
            },
            (Role::Wearer, kind::GESTURE) => field::<Gesture>(&frame, "gesture").map(|gesture| Some(WearerInput::Gesture { gesture })),
            (Role::Wearer, kind::SET_MODE) => field::<SharingMode>(&frame, "mode").map(|mode| Some(WearerInput::SetMode { mode })),
            (Role::Wearer, kind::END_SESSION) => Ok(Some(WearerInput::EndSession)),
            (Role::Wearer, kind::START_SESSION) => {
                let mode = match frame.body.get("mode") {
                    None => Ok(self.record.mode),
                    Some(_) => field::<SharingMode>(&frame, "mode"),
                };
                mode.map(|mode| Some(WearerInput::StartSession { friend_id: self.record.friend_id.clone(), mode }))
            }
            (_, other) => {
                return self.error(role, now, "unexpected_kind", format!("'{other}' is not accepted from the {role}"));
            }
        };
        match input {
            Ok(Some(input)) => {
                let out = self.host.apply(input, now);
                self.deliver(out, Some(role), now);
            }
            Ok(None) => {}
            Err(reason) => self.error(role, now, "bad_body", reason),
        }
    }

    /// Routes the host's frames and reports rejected input to whoever sent it.
    fn deliver(&mut self, out: HostOutput, origin: Option<Role>, now: Timestamp) {
        if let (Some(role), Some(step)) = (origin, &out.step) {
            for effect in &step.effects {
                if let Effect::Log { entry: LogEntry::Rejected { reason } } = effect {
                    self.error(role, now, "rejected", reason.clone());
                }
            }
        }
        for o in out.out {
            let role = match o.to {
                Audience::Friend => Role::Friend,
                Audience::Wearer => Role::Wearer,
            };
            let payload = match &o.msg {
                Outbound::Media { media } => Some(media),
                _ => None,
            };
            let frame = o.to_frame(self.sid());
            let payload = payload.filter(|_| self.is_attached(role)).map(synthetic_payload);
            self.emit(role, frame, payload);
        }
        self.announce(now);
    }

    /// Tells the wearer whenever the session starts, ends or changes mode.
    fn announce(&mut self, now: Timestamp) {
        let state = (self.session_active(), self.host.wearer().mode);
        if state == self.announced {
            return;
        }
        self.announced = state;
        let seq = self.host.next_seq();
        let body = json!({ "active": state.0, "mode": state.1 });
        self.emit(Role::Wearer, Frame::new(self.sid(), seq, now, Role::Relay, kind::SESSION_STATE, body), None);
    }

    fn error(&mut self, role: Role, now: Timestamp, code: &str, reason: impl Into<String>) {
        let seq = self.host.next_seq();
        self.emit(role, Frame::error(self.sid(), seq, now, code, reason), None);
    }

    /// Logs `frame` and sends it to `role`, adding `payload` on the wire only.
    fn emit(&mut self, role: Role, mut frame: Frame, payload: Option<Vec<u8>>) {
        self.log(&frame);
        let Some(endpoint) = self.slot(role).as_ref() else { return };
        if let (Some(bytes), serde_json::Value::Object(body)) = (payload, &mut frame.body) {
            body.insert("payload".into(), encode_payload(&bytes).into());
        }
        let _ = endpoint.out.send(encode_frame(&frame));
    }

    fn log(&mut self, frame: &Frame) {
        if let Some(log) = self.log.as_mut() {
            if let Err(e) = log.append(frame) {
                self.log = None;
                self.log_error = Some(e);
            }
        }
    }

    /// Drops undelivered media and closes the log.
    fn finish(&mut self) {
        let now = self.now_ms();
        for job in self.host.close() {
            let seq = self.host.next_seq();
            let reason = format!("media {} dropped before delivery", job.media.id);
            self.log(&Frame::error(self.sid(), seq, now, "dropped", reason));
        }
        if let Some(log) = self.log.take() {
            let _ = log.close();
        }
    }

    /// A session whose log cannot be written does not continue.
    fn abort(&mut self, e: &io::Error) {
        let now = self.now_ms();
        self.host.close();
        for role in [Role::Wearer, Role::Friend] {
            let seq = self.host.next_seq();
            let frame = Frame::error(self.sid(), seq, now, "log_failure", format!("session log failed: {e}"));
            if let Some(endpoint) = self.slot(role).as_ref() {
                let _ = endpoint.out.send(encode_frame(&frame));
            }
        }
    }

    fn sid(&self) -> &str {
        &self.record.session_id
    }

    fn session_active(&self) -> bool {
        self.host.wearer().session.is_some()
    }

    fn is_attached(&self, role: Role) -> bool {
        match role {
            Role::Friend => self.friend.is_some(),
            _ => self.wearer.is_some(),
        }
    }

    fn slot(&mut self, role: Role) -> &mut Option<Endpoint> {
        match role {
            Role::Friend => &mut self.friend,
            _ => &mut self.wearer,
        }
    }

    fn role_of(&self, conn: u64) -> Option<Role> {
        if self.wearer.as_ref().is_some_and(|e| e.conn == conn) {
            Some(Role::Wearer)
        } else if self.friend.as_ref().is_some_and(|e| e.conn == conn) {
            Some(Role::Friend)
        } else {
            None
        }
    }
}

fn field<T: DeserializeOwned>(frame: &Frame, name: &str) -> Result<T, String> {
    let value = frame.body.get(name).ok_or_else(|| format!("missing '{name}'"))?;
    serde_json::from_value(value.clone()).map_err(|e| format!("bad '{name}': {e}"))
}

async fn wait_until(deadline: Option<Instant>) {
    match deadline {
        Some(at) => sleep_until(at).await,
        None => std::future::pending().await,
    }
}
