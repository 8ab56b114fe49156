//! Transport-independent connection state: session creation, attachment, and
//! forwarding of inbound frames to the session executor.

use serde_json::{json, Value};
use sharecam_core::protocol::{decode_frame, encode_frame, kind, Frame, ProtocolParams, Role, SharingMode};
use tokio::sync::{mpsc, oneshot};

use crate::relay::{CreateSession, Relay};
use crate::session::{Command, Outbox};

struct Attachment {
    session: mpsc::UnboundedSender<Command>,
    conn: u64,
}

pub(crate) struct Connection {
    relay: Relay,
    out: Outbox,
    attached: Option<Attachment>,
}

impl Connection {
    pub(crate) fn new(relay: Relay, out: Outbox) -> Self {
        Self { relay, out, attached: None }
    }

    pub(crate) async fn on_line(&mut self, line: &str) {
        if line.trim().is_empty() {
            return;
        }
        match decode_frame(line) {
            Ok(frame) => self.on_frame(frame).await,
            Err(e) => self.on_malformed(e.to_string()),
        }
    }

    pub(crate) fn on_malformed(&mut self, reason: String) {
        if let Some(a) = &self.attached {
            if a.session.send(Command::Malformed { conn: a.conn, reason: reason.clone() }).is_ok() {
                return;
            }
        }
        self.reply_error("", "malformed", reason);
    }

    async fn on_frame(&mut self, frame: Frame) {
        match frame.kind.as_str() {
            kind::CREATE_SESSION => self.create_session(&frame),
            kind::ATTACH if self.attached.is_some() => {
                self.reply_error(&frame.session_id, "already_attached", "this connection is already attached")
            }
            kind::ATTACH => self.attach(frame).await,
            _ => match &self.attached {
                Some(a) => {
                    if a.session.send(Command::Inbound { conn: a.conn, frame }).is_err() {
                        self.attached = None;
                        self.reply_error("", "session_closed", "the session has ended");
                    }
                }
                None => self.reply_error(&frame.session_id, "not_attached", "attach before sending session frames"),
            },
        }
    }

    fn create_session(&mut self, frame: &Frame) {
        let req = match parse_create(&frame.body) {
            Ok(req) => req,
            Err(reason) => return self.reply_error("", "bad_body", reason),
        };
        let friend_id = req.friend_id.clone();
        let mode = req.mode;
        match self.relay.create_session(req) {
            Ok(info) => {
                let body = json!({
                    "session_id": info.session_id,
                    "token": info.token,
                    "friend_id": friend_id,
                    "mode": mode,
                });
                self.reply(Frame::new("", 0, 0, Role::Relay, kind::SESSION_CREATED, body));
            }
            Err(e) => self.reply_error("", e.code(), e.to_string()),
        }
    }

    async fn attach(&mut self, frame: Frame) {
        let Some(token) = frame.body_str("token").map(str::to_owned) else {
            return self.reply_error(&frame.session_id, "bad_body", "missing 'token'");
        };
        let no_such = || crate::registry::AttachError::NoSuchSession(frame.session_id.clone());
        let result = match self.relay.session(&frame.session_id) {
            None => Err(no_such()),
            Some(session) => {
                let (reply, wait) = oneshot::channel();
                let cmd = Command::Attach { role: frame.from, token, out: self.out.clone(), reply };
                if session.send(cmd).is_err() {
                    Err(no_such())
                } else {
                    match wait.await {
                        Ok(Ok(conn)) => Ok((session, conn)),
                        Ok(Err(e)) => Err(e),
                        Err(_) => Err(no_such()),
                    }
                }
            }
        };
        match result {
            Ok((session, conn)) => self.attached = Some(Attachment { session, conn }),
            Err(e) => self.reply_error(&frame.session_id, e.code(), e.to_string()),
        }
    }

    fn reply(&self, frame: Frame) {
        let _ = self.out.send(encode_frame(&frame));
    }

    /// Errors outside a session carry sequence number 0.
    fn reply_error(&self, session_id: &str, code: &str, reason: impl Into<String>) {
        self.reply(Frame::error(session_id, 0, 0, code, reason));
    }

    pub(crate) fn close(self) {
        if let Some(a) = self.attached {
            let _ = a.session.send(Command::Detach { conn: a.conn });
        }
    }
}

fn parse_create(body: &Value) -> Result<CreateSession, String> {
    let friend_id = body.get("friend_id").and_then(Value::as_str).ok_or("missing 'friend_id'")?.to_owned();
    let mode = match body.get("mode") {
        None => SharingMode::Manual,
        Some(m) => serde_json::from_value(m.clone()).map_err(|e| format!("bad 'mode': {e}"))?,
    };
    let params = match body.get("params") {
        None => ProtocolParams::default(),
        Some(p) => serde_json::from_value(p.clone()).map_err(|e| format!("bad 'params': {e}"))?,
    };
    Ok(CreateSession { friend_id, mode, params })
}
