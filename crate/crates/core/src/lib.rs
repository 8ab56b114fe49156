//! Shared-camera experience sharing.
//!
//! A Wearer's camera glasses share capture control with one remote Friend. The Friend
//! texts `T` to request a photo or video; the Wearer approves with a gesture, declines,
//! or lets the request time out, and the Friend cannot tell a decline from a timeout.
//!
//! Everything here is sans-IO. [`wearer`] and [`friend`] are pure state machines,
//! [`relay`] hosts one session and schedules media transmission, and [`sim`] drives
//! them on a virtual clock.

pub mod friend;
pub mod protocol;
pub mod relay;
pub mod replay;
pub mod sim;
pub mod wearer;
