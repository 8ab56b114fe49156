//! The relay: a registry of running sessions.

use std::collections::HashMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, PoisonError};
use std::time::{SystemTime, UNIX_EPOCH};

use sharecam_core::protocol::{ParamsError, ProtocolParams, SharingMode};
use thiserror::Error;
use tokio::sync::{mpsc, oneshot};
use tokio::time::Instant;

use crate::log::{log_path, SessionLog};
use crate::registry::{new_session_id, new_token, SessionRecord};
use crate::session::{Command, Executor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CreateSession {
    pub friend_id: String,
    pub mode: SharingMode,
    pub params: ProtocolParams,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionInfo {
    pub session_id: String,
    pub token: String,
    pub log_path: PathBuf,
}

#[derive(Debug, Error)]
pub enum CreateError {
    #[error("session id {0} is already in use")]
    IdCollision(String),
    #[error("invalid params: {0}")]
    InvalidParams(#[from] ParamsError),
    #[error("cannot open session log: {0}")]
    Io(#[from] io::Error),
}

impl CreateError {
    pub fn code(&self) -> &'static str {
        match self {
            CreateError::IdCollision(_) => "id_collision",
            CreateError::InvalidParams(_) => "bad_params",
            CreateError::Io(_) => "io",
        }
    }
}

/// Cheap to clone; all clones share the same sessions.
#[derive(Clone)]
pub struct Relay {
    inner: Arc<Inner>,
}

struct Inner {
    log_dir: PathBuf,
    sessions: Mutex<HashMap<String, mpsc::UnboundedSender<Command>>>,
}

impl Relay {
    pub fn new(log_dir: impl Into<PathBuf>) -> Self {
        Self { inner: Arc::new(Inner { log_dir: log_dir.into(), sessions: Mutex::new(HashMap::new()) }) }
    }

    pub fn log_dir(&self) -> &Path {
        &self.inner.log_dir
    }

    /// Creates a session with a fresh random id and token. Must run inside a Tokio runtime.
    pub fn create_session(&self, req: CreateSession) -> Result<SessionInfo, CreateError> {
        let mut rng = rand::rng();
        self.create_session_with(new_session_id(&mut rng), new_token(&mut rng), req)
    }

    pub fn create_session_with(&self, session_id: String, token: String, req: CreateSession) -> Result<SessionInfo, CreateError> {
        req.params.validate()?;
        let mut sessions = self.inner.sessions.lock().unwrap_or_else(PoisonError::into_inner);
        if sessions.contains_key(&session_id) {
            return Err(CreateError::IdCollision(session_id));
        }
        let path = log_path(&self.inner.log_dir, &session_id);
        let log = SessionLog::create(path.clone()).map_err(|e| match e.kind() {
            // A log left by an earlier run claims the id too.
            io::ErrorKind::AlreadyExists => CreateError::IdCollision(session_id.clone()),
            _ => CreateError::Io(e),
        })?;
        let record = SessionRecord {
            session_id: session_id.clone(),
            token: token.clone(),
            friend_id: req.friend_id,
            mode: req.mode,
            params: req.params,
            created_at_ms: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64),
            log_path: path.clone(),
            wearer_attached: false,
            friend_attached: false,
        };
        let (tx, rx) = mpsc::unbounded_channel();
        tokio::spawn(Executor::new(record, log, Instant::now()).run(rx));
        sessions.insert(session_id.clone(), tx);
        Ok(SessionInfo { session_id, token, log_path: path })
    }

    pub(crate) fn session(&self, session_id: &str) -> Option<mpsc::UnboundedSender<Command>> {
        self.inner.sessions.lock().unwrap_or_else(PoisonError::into_inner).get(session_id).cloned()
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> =
            self.inner.sessions.lock().unwrap_or_else(PoisonError::into_inner).keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Stops every session, dropping undelivered media, and waits until each log is closed.
    pub async fn shutdown(&self) {
        let sessions: Vec<_> =
            self.inner.sessions.lock().unwrap_or_else(PoisonError::into_inner).drain().map(|(_, tx)| tx).collect();
        for tx in sessions {
            let (done, wait) = oneshot::channel();
            if tx.send(Command::Shutdown { done }).is_ok() {
                let _ = wait.await;
            }
        }
    }
}
