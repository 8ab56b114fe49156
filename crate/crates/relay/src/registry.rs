//! Session records, credentials and endpoint slots.

use std::path::PathBuf;

use rand::RngCore;
use sharecam_core::protocol::{ProtocolParams, Role, SharingMode};
use subtle::ConstantTimeEq;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttachError {
    #[error("no session {0}")]
    NoSuchSession(String),
    #[error("token does not match session {0}")]
    BadToken(String),
    #[error("the {0} slot of this session is taken")]
    SlotTaken(Role),
    #[error("only a wearer or a friend can attach")]
    BadRole,
}

impl AttachError {
    /// Wire code carried in the error frame.
    pub fn code(&self) -> &'static str {
        match self {
            AttachError::NoSuchSession(_) => "no_such_session",
            AttachError::BadToken(_) => "bad_token",
            AttachError::SlotTaken(_) => "slot_taken",
            AttachError::BadRole => "bad_role",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRecord {
    pub session_id: String,
    pub token: String,
    pub friend_id: String,
    pub mode: SharingMode,
    pub params: ProtocolParams,
    /// Wall-clock creation time, milliseconds since the Unix epoch.
    pub created_at_ms: u64,
    pub log_path: PathBuf,
    pub wearer_attached: bool,
    pub friend_attached: bool,
}

impl SessionRecord {
    fn slot(&mut self, role: Role) -> Result<&mut bool, AttachError> {
        match role {
            Role::Wearer => Ok(&mut self.wearer_attached),
            Role::Friend => Ok(&mut self.friend_attached),
            Role::Relay => Err(AttachError::BadRole),
        }
    }

    pub fn attach(&mut self, role: Role, token: &str) -> Result<(), AttachError> {
        if !tokens_equal(&self.token, token) {
            return Err(AttachError::BadToken(self.session_id.clone()));
        }
        let slot = self.slot(role)?;
        if *slot {
            return Err(AttachError::SlotTaken(role));
        }
        *slot = true;
        Ok(())
    }

    pub fn detach(&mut self, role: Role) {
        if let Ok(slot) = self.slot(role) {
            *slot = false;
        }
    }

    pub fn both_attached(&self) -> bool {
        self.wearer_attached && self.friend_attached
    }
}

/// Comparison time does not depend on where the first difference is.
fn tokens_equal(a: &str, b: &str) -> bool {
    a.as_bytes().ct_eq(b.as_bytes()).into()
}

fn random_hex(rng: &mut impl RngCore, bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rng.fill_bytes(&mut buf);
    hex::encode(buf)
}

/// 128-bit random token as 32 hex digits.
pub fn new_token(rng: &mut impl RngCore) -> String {
    random_hex(rng, 16)
}

pub fn new_session_id(rng: &mut impl RngCore) -> String {
    random_hex(rng, 8)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> SessionRecord {
        SessionRecord {
            session_id: "s1".into(),
            token: "abcd".into(),
            friend_id: "fr1".into(),
            mode: SharingMode::Manual,
            params: ProtocolParams::default(),
            created_at_ms: 0,
            log_path: PathBuf::from("s1.fslog"),
            wearer_attached: false,
            friend_attached: false,
        }
    }

    #[test]
    fn fresh_record_has_free_slots() {
        let r = record();
        assert!(!r.wearer_attached && !r.friend_attached);
    }

    #[test]
    fn one_endpoint_per_role() {
        let mut r = record();
        r.attach(Role::Wearer, "abcd").unwrap();
        assert_eq!(r.attach(Role::Wearer, "abcd"), Err(AttachError::SlotTaken(Role::Wearer)));
        r.attach(Role::Friend, "abcd").unwrap();
        assert!(r.both_attached());
        r.detach(Role::Friend);
        r.attach(Role::Friend, "abcd").unwrap();
    }

    #[test]
    fn wrong_token_or_role_is_refused() {
        let mut r = record();
        assert_eq!(r.attach(Role::Friend, "abce").unwrap_err().code(), "bad_token");
        assert_eq!(r.attach(Role::Friend, "abc").unwrap_err().code(), "bad_token");
        assert_eq!(r.attach(Role::Relay, "abcd"), Err(AttachError::BadRole));
        assert!(!r.friend_attached);
    }

    #[test]
    fn credentials_have_expected_shape() {
        let mut rng = rand::rng();
        let t = new_token(&mut rng);
        assert_eq!(t.len(), 32);
        assert!(t.bytes().all(|b| b.is_ascii_hexdigit()));
        assert_ne!(t, new_token(&mut rng));
        assert_eq!(new_session_id(&mut rng).len(), 16);
    }
}
