//! Device-side state machine.
//!
//! [`WearerState`] owns sessions, sharing modes, the trigger lifecycle, the capture
//! pipeline, the fast-fulfillment hold queue and the single LED. Every handler is a
//! deterministic function of `(state, input, now)` and returns [`Effect`]s for the
//! caller to execute; nothing here touches a clock or a socket.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{
    led_signal_for, FriendCommand, Gesture, Initiator, LedCause, LedSignal, MediaId, MediaItem, MediaKind,
    NoticeKind, ProtocolParams, SharingMode, Timestamp, TriggerId,
};

/// A deferred thumbs flash that waited longer than this is dropped.
pub const THUMB_DEFER_LIMIT_MS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "media_id")]
pub enum TriggerOutcome {
    Pending,
    Declined,
    FulfilledEarly(MediaId),
    AutoFulfilled(MediaId),
    TimedOutUnavailable,
}

impl TriggerOutcome {
    pub fn is_terminal(self) -> bool {
        !matches!(self, TriggerOutcome::Pending)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerRequest {
    pub id: TriggerId,
    pub received_at_ms: Timestamp,
    pub deadline_ms: Timestamp,
    pub mode_at_receipt: SharingMode,
    pub outcome: TriggerOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub friend_id: String,
    pub started_at_ms: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fulfillment {
    Early,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capture {
    pub media_id: MediaId,
    pub kind: MediaKind,
    pub started_at_ms: Timestamp,
    pub ends_at_ms: Timestamp,
    pub fulfills: Option<(TriggerRequest, Fulfillment)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeldMedia {
    pub media: MediaItem,
    pub release_at_ms: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerKind {
    TriggerDeadline,
    CaptureEnd,
    HoldRelease,
    LedExpire,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArmedTimer {
    pub fire_at_ms: Timestamp,
    pub kind: TimerKind,
    pub key: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeferredFlash {
    pub cause: LedCause,
    pub requested_at_ms: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LogEntry {
    TriggerCreated { trigger_id: TriggerId },
    TriggerResolved { trigger_id: TriggerId, outcome: TriggerOutcome },
    FastFulfilled { media_id: MediaId },
    MediaHeld { media_id: MediaId, release_at_ms: Timestamp },
    GestureIgnored { gesture: Gesture, reason: String },
    StaleTimer { kind: TimerKind, key: u64 },
    FlashDropped { cause: LedCause },
    Rejected { reason: String },
}

/// Work for the host to carry out. Effects are data only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Effect {
    SendNotice { notice: NoticeKind },
    SendMedia { media: MediaItem },
    SetLed { signal: LedSignal },
    ClearLed,
    ArmTimer { fire_at_ms: Timestamp, kind: TimerKind, key: u64 },
    Log { entry: LogEntry },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WearerError {
    #[error("no active session")]
    NoSession,
    #[error("a session is already active")]
    SessionActive,
    #[error("cannot end the session while a capture is in progress")]
    CaptureInProgress,
}

/// Everything the device can be asked to handle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum WearerInput {
    StartSession { friend_id: String, mode: SharingMode },
    SetMode { mode: SharingMode },
    /// `seq` is the Friend frame sequence number; it is recorded, not interpreted.
    FriendCommand { cmd: FriendCommand, seq: u64 },
    Gesture { gesture: Gesture },
    EndSession,
    Timer { kind: TimerKind, key: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WearerState {
    pub params: ProtocolParams,
    pub session: Option<Session>,
    pub mode: SharingMode,
    pub pending: Option<TriggerRequest>,
    pub capture: Option<Capture>,
    pub hold_queue: VecDeque<HeldMedia>,
    pub led_active: Option<LedSignal>,
    /// Generation of the expiry timer armed for the active flash, if any.
    led_timer: Option<u64>,
    led_generation: u64,
    pub led_deferred: VecDeque<DeferredFlash>,
    pub timers: BTreeSet<ArmedTimer>,
    /// Every trigger that reached a terminal outcome, in resolution order.
    pub resolved: Vec<TriggerRequest>,
    next_trigger_id: TriggerId,
    next_media_id: MediaId,
}

type Effects = Vec<Effect>;

impl WearerState {
    pub fn new(params: ProtocolParams) -> Self {
        Self {
            params,
            session: None,
            mode: SharingMode::Manual,
            pending: None,
            capture: None,
            hold_queue: VecDeque::new(),
            led_active: None,
            led_timer: None,
            led_generation: 0,
            led_deferred: VecDeque::new(),
            timers: BTreeSet::new(),
            resolved: Vec::new(),
            next_trigger_id: 1,
            next_media_id: 1,
        }
    }

    pub fn handle(&mut self, input: &WearerInput, now: Timestamp) -> Result<Effects, WearerError> {
        match input {
            WearerInput::StartSession { friend_id, mode } => self.start_session(friend_id, *mode, now),
            WearerInput::SetMode { mode } => self.set_mode(*mode, now),
            WearerInput::FriendCommand { cmd, .. } => self.on_friend_command(*cmd, now),
            WearerInput::Gesture { gesture } => self.on_gesture(*gesture, now),
            WearerInput::EndSession => self.end_session(now),
            WearerInput::Timer { kind, key } => Ok(self.on_timer(*kind, *key, now)),
        }
    }

    pub fn start_session(&mut self, friend_id: &str, mode: SharingMode, now: Timestamp) -> Result<Effects, WearerError> {
        if self.session.is_some() {
            return Err(WearerError::SessionActive);
        }
        self.session = Some(Session { friend_id: friend_id.to_owned(), started_at_ms: now });
        self.mode = mode;
        Ok(vec![Effect::SendNotice { notice: NoticeKind::Invitation }])
    }

    /// A pending trigger keeps its deadline; the mode in force when it fires decides the outcome.
    pub fn set_mode(&mut self, mode: SharingMode, _now: Timestamp) -> Result<Effects, WearerError> {
        self.require_session()?;
        self.mode = mode;
        Ok(vec![Effect::SendNotice { notice: NoticeKind::ModeChange(mode) }])
    }

    pub fn on_friend_command(&mut self, cmd: FriendCommand, now: Timestamp) -> Result<Effects, WearerError> {
        self.require_session()?;
        let mut fx = Vec::new();
        match cmd {
            FriendCommand::Trigger => self.on_trigger(now, &mut fx),
            FriendCommand::ThumbsUp | FriendCommand::ThumbsDown => {
                let cause = if cmd == FriendCommand::ThumbsUp { LedCause::ThumbsUp } else { LedCause::ThumbsDown };
                self.led_deferred.push_back(DeferredFlash { cause, requested_at_ms: now });
                self.sync_led(now, &mut fx);
            }
        }
        Ok(fx)
    }

    fn on_trigger(&mut self, now: Timestamp, fx: &mut Effects) {
        if self.mode == SharingMode::Off {
            fx.push(notice(NoticeKind::TriggersPaused));
            return;
        }
        if self.pending.is_some() {
            // Coalesced: acknowledge, keep the one pending request.
            fx.push(notice(NoticeKind::TriggerReceived));
            return;
        }
        if let Some(held) = self.hold_queue.pop_front() {
            self.cancel_timer(TimerKind::HoldRelease, held.media.id);
            let media_id = held.media.id;
            fx.push(notice(NoticeKind::TriggerReceived));
            fx.push(notice(NoticeKind::TriggerApproved(held.media.kind)));
            fx.push(Effect::SendMedia { media: held.media });
            fx.push(log(LogEntry::FastFulfilled { media_id }));
            return;
        }
        let id = self.next_trigger_id;
        self.next_trigger_id += 1;
        let deadline = now + self.params.trigger_timeout_ms;
        self.pending = Some(TriggerRequest {
            id,
            received_at_ms: now,
            deadline_ms: deadline,
            mode_at_receipt: self.mode,
            outcome: TriggerOutcome::Pending,
        });
        fx.push(notice(NoticeKind::TriggerReceived));
        fx.push(log(LogEntry::TriggerCreated { trigger_id: id }));
        self.sync_led(now, fx);
        self.arm(deadline, TimerKind::TriggerDeadline, id, fx);
    }

    pub fn on_gesture(&mut self, gesture: Gesture, now: Timestamp) -> Result<Effects, WearerError> {
        self.require_session()?;
        let mut fx = Vec::new();
        if self.capture.is_some() {
            fx.push(log(LogEntry::GestureIgnored { gesture, reason: "capture in progress".into() }));
            return Ok(fx);
        }
        match gesture {
            Gesture::SwipeBack => match self.pending.as_mut() {
                Some(t) if t.outcome == TriggerOutcome::Pending => {
                    // The deadline timer stays armed: Unavailable goes out at the deadline, not now.
                    t.outcome = TriggerOutcome::Declined;
                    let t = t.clone();
                    fx.push(log(LogEntry::TriggerResolved { trigger_id: t.id, outcome: t.outcome }));
                    self.resolved.push(t);
                    self.sync_led(now, &mut fx);
                }
                _ => fx.push(log(LogEntry::GestureIgnored { gesture, reason: "no pending trigger".into() })),
            },
            Gesture::Press | Gesture::PressHold => {
                let kind = if gesture == Gesture::Press { MediaKind::Photo } else { MediaKind::Video };
                let media_id = self.alloc_media_id();
                let fulfills = match self.pending.take() {
                    Some(mut t) if t.outcome == TriggerOutcome::Pending => {
                        self.cancel_timer(TimerKind::TriggerDeadline, t.id);
                        t.outcome = TriggerOutcome::FulfilledEarly(media_id);
                        fx.push(log(LogEntry::TriggerResolved { trigger_id: t.id, outcome: t.outcome }));
                        self.resolved.push(t.clone());
                        Some((t, Fulfillment::Early))
                    }
                    other => {
                        self.pending = other;
                        None
                    }
                };
                self.begin_capture(media_id, kind, fulfills, now, &mut fx);
            }
        }
        Ok(fx)
    }

    pub fn end_session(&mut self, _now: Timestamp) -> Result<Effects, WearerError> {
        self.require_session()?;
        if self.capture.is_some() {
            return Err(WearerError::CaptureInProgress);
        }
        let mut fx = Vec::new();
        if let Some(mut t) = self.pending.take() {
            self.cancel_timer(TimerKind::TriggerDeadline, t.id);
            if t.outcome == TriggerOutcome::Pending {
                t.outcome = TriggerOutcome::TimedOutUnavailable;
                fx.push(log(LogEntry::TriggerResolved { trigger_id: t.id, outcome: t.outcome }));
                self.resolved.push(t);
            }
            fx.push(notice(NoticeKind::Unavailable));
        }
        while let Some(held) = self.hold_queue.pop_front() {
            self.cancel_timer(TimerKind::HoldRelease, held.media.id);
            fx.push(Effect::SendMedia { media: held.media });
        }
        fx.push(notice(NoticeKind::SessionEnded));
        self.session = None;
        self.led_deferred.clear();
        self.drop_running_flash();
        if self.led_active.take().is_some() {
            fx.push(Effect::ClearLed);
        }
        self.timers.clear();
        Ok(fx)
    }

    /// Timers that are no longer armed (cancelled or superseded) are ignored with a log entry.
    pub fn on_timer(&mut self, kind: TimerKind, key: u64, now: Timestamp) -> Effects {
        let armed = ArmedTimer { fire_at_ms: now, kind, key };
        if !self.timers.remove(&armed) {
            return vec![log(LogEntry::StaleTimer { kind, key })];
        }
        let mut fx = Vec::new();
        match kind {
            TimerKind::TriggerDeadline => self.on_deadline(key, now, &mut fx),
            TimerKind::CaptureEnd => self.on_capture_end(now, &mut fx),
            TimerKind::HoldRelease => {
                if let Some(pos) = self.hold_queue.iter().position(|h| h.media.id == key) {
                    let held = self.hold_queue.remove(pos).expect("position is in range");
                    fx.push(Effect::SendMedia { media: held.media });
                }
            }
            TimerKind::LedExpire => {
                if self.led_timer == Some(key) {
                    self.led_timer = None;
                }
                self.sync_led(now, &mut fx);
            }
        }
        fx
    }

    fn on_deadline(&mut self, trigger_id: TriggerId, now: Timestamp, fx: &mut Effects) {
        let Some(t) = self.pending.take() else { return };
        debug_assert_eq!(t.id, trigger_id);
        match t.outcome {
            TriggerOutcome::Declined => {
                fx.push(notice(NoticeKind::Unavailable));
                self.sync_led(now, fx);
            }
            TriggerOutcome::Pending if self.mode == SharingMode::Auto => match &mut self.capture {
                None => {
                    let media_id = self.alloc_media_id();
                    self.begin_capture(media_id, MediaKind::Video, Some((t, Fulfillment::Auto)), now, fx);
                }
                Some(c) if c.fulfills.is_none() => {
                    c.fulfills = Some((t, Fulfillment::Auto));
                    self.sync_led(now, fx);
                }
                Some(_) => self.time_out(t, now, fx),
            },
            TriggerOutcome::Pending => self.time_out(t, now, fx),
            // Other terminal outcomes leave `pending` before their deadline fires.
            _ => {}
        }
    }

    fn time_out(&mut self, mut t: TriggerRequest, now: Timestamp, fx: &mut Effects) {
        t.outcome = TriggerOutcome::TimedOutUnavailable;
        fx.push(log(LogEntry::TriggerResolved { trigger_id: t.id, outcome: t.outcome }));
        self.resolved.push(t);
        fx.push(notice(NoticeKind::Unavailable));
        self.sync_led(now, fx);
    }

    fn on_capture_end(&mut self, now: Timestamp, fx: &mut Effects) {
        let Some(capture) = self.capture.take() else { return };
        let fulfilled = match capture.fulfills {
            Some((t, Fulfillment::Early)) => Some(t.id),
            Some((mut t, Fulfillment::Auto)) => {
                t.outcome = TriggerOutcome::AutoFulfilled(capture.media_id);
                fx.push(log(LogEntry::TriggerResolved { trigger_id: t.id, outcome: t.outcome }));
                let id = t.id;
                self.resolved.push(t);
                Some(id)
            }
            None => match self.pending.take() {
                Some(mut t) if t.outcome == TriggerOutcome::Pending => {
                    // A waiting Friend gets freshly captured media right away.
                    self.cancel_timer(TimerKind::TriggerDeadline, t.id);
                    t.outcome = TriggerOutcome::FulfilledEarly(capture.media_id);
                    fx.push(log(LogEntry::TriggerResolved { trigger_id: t.id, outcome: t.outcome }));
                    let id = t.id;
                    self.resolved.push(t);
                    Some(id)
                }
                other => {
                    self.pending = other;
                    None
                }
            },
        };
        let initiator = match fulfilled {
            Some(id) => Initiator::TriggerFulfillment(id),
            None => Initiator::WearerInitiated,
        };
        let media = MediaItem::captured(capture.media_id, capture.kind, capture.started_at_ms, initiator, &self.params);
        if fulfilled.is_some() {
            fx.push(notice(NoticeKind::TriggerApproved(media.kind)));
            fx.push(Effect::SendMedia { media });
        } else {
            let release_at_ms = now + self.params.hold_ms;
            let media_id = media.id;
            self.hold_queue.push_back(HeldMedia { media, release_at_ms });
            fx.push(log(LogEntry::MediaHeld { media_id, release_at_ms }));
            self.arm(release_at_ms, TimerKind::HoldRelease, media_id, fx);
        }
        self.led_deferred.push_back(DeferredFlash { cause: LedCause::Sent, requested_at_ms: now });
        self.sync_led(now, fx);
    }

    fn begin_capture(
        &mut self,
        media_id: MediaId,
        kind: MediaKind,
        fulfills: Option<(TriggerRequest, Fulfillment)>,
        now: Timestamp,
        fx: &mut Effects,
    ) {
        let ends_at_ms = now + self.params.capture_ms(kind);
        self.capture = Some(Capture { media_id, kind, started_at_ms: now, ends_at_ms, fulfills });
        self.sync_led(now, fx);
        self.arm(ends_at_ms, TimerKind::CaptureEnd, media_id, fx);
    }

    /// Brings the LED in line with the state: pending trigger, then capture, then
    /// queued flashes by priority.
    fn sync_led(&mut self, now: Timestamp, fx: &mut Effects) {
        if let Some(t) = self.pending.as_ref().filter(|t| t.outcome == TriggerOutcome::Pending) {
            if self.led_active.map(|s| s.cause) != Some(LedCause::TriggerPending) {
                let signal = LedSignal::new(LedCause::TriggerPending, now, t.deadline_ms);
                self.show(signal, fx);
            }
            return;
        }
        if let Some(c) = &self.capture {
            if !matches!(self.led_active.map(|s| s.cause), Some(LedCause::Capturing(_))) {
                let signal = LedSignal::new(LedCause::Capturing(c.kind), now, c.ends_at_ms);
                self.show(signal, fx);
            }
            return;
        }
        if let Some(active) = self.led_active.filter(|s| s.cause.is_flash() && s.end_ms > now) {
            let outranked = self.led_deferred.iter().any(|d| d.cause.priority() > active.cause.priority());
            if !outranked {
                return;
            }
        }
        match self.next_deferred(now, fx) {
            Some(cause) => {
                let signal = led_signal_for(cause, now, &self.params);
                self.show(signal, fx);
                self.led_generation += 1;
                let generation = self.led_generation;
                self.led_timer = Some(generation);
                self.arm(signal.end_ms, TimerKind::LedExpire, generation, fx);
            }
            None => {
                self.drop_running_flash();
                if self.led_active.take().is_some() {
                    fx.push(Effect::ClearLed);
                }
            }
        }
    }

    fn show(&mut self, signal: LedSignal, fx: &mut Effects) {
        self.drop_running_flash();
        self.led_active = Some(signal);
        fx.push(Effect::SetLed { signal });
    }

    fn drop_running_flash(&mut self) {
        if let Some(generation) = self.led_timer.take() {
            self.cancel_timer(TimerKind::LedExpire, generation);
        }
    }

    /// Highest-priority queued flash, oldest first; stale thumbs are discarded on the way.
    fn next_deferred(&mut self, now: Timestamp, fx: &mut Effects) -> Option<LedCause> {
        let mut kept = VecDeque::with_capacity(self.led_deferred.len());
        for d in self.led_deferred.drain(..) {
            if d.cause.is_thumb() && now - d.requested_at_ms > THUMB_DEFER_LIMIT_MS {
                fx.push(log(LogEntry::FlashDropped { cause: d.cause }));
            } else {
                kept.push_back(d);
            }
        }
        self.led_deferred = kept;
        let best = self
            .led_deferred
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.cause.priority().cmp(&b.cause.priority()).then(ib.cmp(ia)))
            .map(|(i, _)| i)?;
        self.led_deferred.remove(best).map(|d| d.cause)
    }

    fn arm(&mut self, fire_at_ms: Timestamp, kind: TimerKind, key: u64, fx: &mut Effects) {
        self.timers.insert(ArmedTimer { fire_at_ms, kind, key });
        fx.push(Effect::ArmTimer { fire_at_ms, kind, key });
    }

    fn cancel_timer(&mut self, kind: TimerKind, key: u64) {
        self.timers.retain(|t| !(t.kind == kind && t.key == key));
    }

    fn alloc_media_id(&mut self) -> MediaId {
        let id = self.next_media_id;
        self.next_media_id += 1;
        id
    }

    fn require_session(&self) -> Result<(), WearerError> {
        if self.session.is_some() {
            Ok(())
        } else {
            Err(WearerError::NoSession)
        }
    }
}

fn notice(notice: NoticeKind) -> Effect {
    Effect::SendNotice { notice }
}

fn log(entry: LogEntry) -> Effect {
    Effect::Log { entry }
}
