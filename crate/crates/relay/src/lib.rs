//! Session relay.
//!
//! Hosts sessions between one Wearer and one Friend endpoint. Each session runs on its
//! own executor task around a [`sharecam_core::relay::SessionHost`], simulates media
//! transmission in real time and writes a redacted frame log. Endpoints speak the
//! newline-delimited frame protocol over TCP, or the same frames over a WebSocket.

pub mod agent;
pub mod client;
mod conn;
pub mod log;
pub mod payload;
pub mod registry;
mod relay;
mod session;
pub mod transport;

pub use relay::{CreateError, CreateSession, Relay, SessionInfo};
