//! Brute-force reference interpreter.
//!
//! Advances a virtual clock one millisecond at a time and, at each tick, linearly
//! scans every outstanding item for the one due now with the smallest
//! `(class, order)`. It shares only vocabulary types with the production path (no
//! wearer state machine, no session host, no event queue) and serves as the
//! equivalence oracle for [`run_scenario`](super::run_scenario).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::engine::SIM_FRIEND_ID;
use super::metrics::compute_metrics;
use super::network::LinkModel;
use super::report::SimReport;
use super::scenario::{Action, Scenario};
use crate::friend::{Direction, EntryContent, FriendTranscript, TranscriptEntry};
use crate::protocol::{
    led_signal_for, parse_friend_text, render_notice, FriendCommand, Gesture, Initiator, LedCause, LedSignal,
    MediaItem, MediaKind, NoticeKind, ParsedText, ProtocolParams, SharingMode, Timestamp,
};
use crate::relay::WearerStep;
use crate::wearer::{Effect, LogEntry, TimerKind, TriggerOutcome, WearerError, WearerInput, THUMB_DEFER_LIMIT_MS};

const ARRIVAL: u8 = 0;
const SCRIPTED: u8 = 1;
const TIMER: u8 = 2;

enum Work {
    Scripted(usize),
    ReachesWearer { text: String, seq: u64 },
    ReachesFriend(ToFriend),
    WearerTimer { kind: TimerKind, key: u64 },
    Countdown(u32),
    Deliver(MediaItem),
}

#[derive(Clone)]
enum ToFriend {
    Notice(NoticeKind),
    Media(MediaItem),
}

struct Due {
    at: Timestamp,
    class: u8,
    order: u64,
    work: Work,
}

struct Trigger {
    id: u64,
    deadline: Timestamp,
    declined: bool,
}

struct Recording {
    media_id: u64,
    kind: MediaKind,
    start: Timestamp,
    end: Timestamp,
    /// `(trigger_id, by_auto_approve)`.
    answers: Option<(u64, bool)>,
}

pub fn reference_run(scenario: &Scenario) -> SimReport {
    let mut r = Ref::new(scenario);
    let mut now: Timestamp = 0;
    while !r.due.is_empty() {
        debug_assert!(r.due.iter().all(|d| d.at >= now));
        loop {
            let mut pick: Option<usize> = None;
            for (i, d) in r.due.iter().enumerate() {
                if d.at != now {
                    continue;
                }
                let better = match pick {
                    None => true,
                    Some(p) => (d.class, d.order) < (r.due[p].class, r.due[p].order),
                };
                if better {
                    pick = Some(i);
                }
            }
            let Some(i) = pick else { break };
            let d = r.due.swap_remove(i);
            r.process(d.work, now);
        }
        now += 1;
    }
    let metrics = compute_metrics(&r.steps, &r.transcript)
        .unwrap_or_else(|e| panic!("reference run of {} is internally inconsistent: {e}", scenario.name));
    SimReport {
        scenario: scenario.name.clone(),
        seed: scenario.network.seed,
        transcript_digest: r.transcript.digest(),
        friend_transcript: r.transcript,
        wearer_log: r.steps,
        led_timeline: r.shown,
        metrics,
    }
}

struct Ref<'a> {
    sc: &'a Scenario,
    p: ProtocolParams,
    due: Vec<Due>,
    arrival_order: u64,
    timer_order: u64,
    rng: ChaCha8Rng,

    // Friend side.
    invited: bool,
    friend_seq: u64,
    transcript: FriendTranscript,

    // Wearer side.
    in_session: bool,
    mode: SharingMode,
    trigger: Option<Trigger>,
    recording: Option<Recording>,
    held: Vec<(MediaItem, Timestamp)>,
    led: Option<LedSignal>,
    flash_gen: Option<u64>,
    gens: u64,
    flashes: Vec<(LedCause, Timestamp)>,
    armed: Vec<(Timestamp, TimerKind, u64)>,
    trigger_ids: u64,
    media_ids: u64,

    steps: Vec<WearerStep>,
    shown: Vec<LedSignal>,
    lit: bool,
}

impl<'a> Ref<'a> {
    fn new(sc: &'a Scenario) -> Self {
        let due = sc
            .events
            .iter()
            .enumerate()
            .map(|(i, e)| Due { at: e.at_ms, class: SCRIPTED, order: i as u64, work: Work::Scripted(i) })
            .collect();
        Ref {
            sc,
            p: sc.params,
            due,
            arrival_order: 0,
            timer_order: 0,
            rng: ChaCha8Rng::seed_from_u64(sc.network.seed),
            invited: false,
            friend_seq: 0,
            transcript: FriendTranscript::new(),
            in_session: false,
            mode: SharingMode::Manual,
            trigger: None,
            recording: None,
            held: Vec::new(),
            led: None,
            flash_gen: None,
            gens: 0,
            flashes: Vec::new(),
            armed: Vec::new(),
            trigger_ids: 0,
            media_ids: 0,
            steps: Vec::new(),
            shown: Vec::new(),
            lit: false,
        }
    }

    fn process(&mut self, work: Work, now: Timestamp) {
        match work {
            Work::Scripted(i) => self.scripted(i, now),
            Work::ReachesWearer { text, seq } => {
                if let ParsedText::Command(cmd) = parse_friend_text(&text) {
                    self.wearer(WearerInput::FriendCommand { cmd, seq }, now);
                }
            }
            Work::ReachesFriend(msg) => {
                let content = match &msg {
                    ToFriend::Notice(n) => {
                        if *n == NoticeKind::Invitation {
                            self.invited = true;
                        }
                        EntryContent::NoticeText { text: render_notice(n).into_owned() }
                    }
                    ToFriend::Media(m) => {
                        EntryContent::MediaRef { kind: m.kind, digest: m.payload_digest.clone(), size_bytes: m.size_bytes }
                    }
                };
                self.transcript
                    .push(TranscriptEntry { ts_ms: now, direction: Direction::Received, content, seq: None })
                    .expect("ticks only move forward");
            }
            Work::WearerTimer { kind, key } => self.wearer(WearerInput::Timer { kind, key }, now),
            Work::Countdown(n) => self.send_friend(ToFriend::Notice(NoticeKind::Countdown(n)), now),
            Work::Deliver(m) => self.send_friend(ToFriend::Media(m), now),
        }
    }

    fn scripted(&mut self, i: usize, now: Timestamp) {
        let input = match &self.sc.events[i].action {
            Action::Command { text } => {
                if !self.invited {
                    return;
                }
                let wire_text = match parse_friend_text(text) {
                    ParsedText::Command(c) => c.code().to_owned(),
                    ParsedText::PlainText(_) => text.clone(),
                };
                self.friend_seq += 1;
                let seq = self.friend_seq;
                self.transcript
                    .push(TranscriptEntry {
                        ts_ms: now,
                        direction: Direction::Sent,
                        content: EntryContent::CommandText { text: wire_text.clone() },
                        seq: Some(seq),
                    })
                    .expect("ticks only move forward");
                let link = self.sc.network.to_wearer;
                if let Some(at) = self.network(&link, now) {
                    self.arrival(at, Work::ReachesWearer { text: wire_text, seq });
                }
                return;
            }
            Action::StartSession { mode } => WearerInput::StartSession {
                friend_id: SIM_FRIEND_ID.to_owned(),
                mode: mode.unwrap_or(self.sc.initial_mode),
            },
            Action::Gesture { gesture } => WearerInput::Gesture { gesture: *gesture },
            Action::SetMode { mode } => WearerInput::SetMode { mode: *mode },
            Action::EndSession => WearerInput::EndSession,
        };
        self.wearer(input, now);
    }

    fn network(&mut self, link: &LinkModel, now: Timestamp) -> Option<Timestamp> {
        let lost: f64 = self.rng.random();
        let extra = self.rng.random_range(0..=link.jitter_ms);
        if lost < link.drop_prob {
            None
        } else {
            Some(now + link.base_latency_ms + extra)
        }
    }

    fn arrival(&mut self, at: Timestamp, work: Work) {
        self.arrival_order += 1;
        self.due.push(Due { at, class: ARRIVAL, order: self.arrival_order, work });
    }

    fn timer(&mut self, at: Timestamp, work: Work) {
        self.timer_order += 1;
        self.due.push(Due { at, class: TIMER, order: self.timer_order, work });
    }

    fn send_friend(&mut self, msg: ToFriend, now: Timestamp) {
        let link = self.sc.network.to_friend;
        if let Some(at) = self.network(&link, now) {
            self.arrival(at, Work::ReachesFriend(msg));
        }
    }

    /// Runs one wearer input, records the step, then carries out its effects in order.
    fn wearer(&mut self, input: WearerInput, now: Timestamp) {
        let mut fx = Vec::new();
        if let Err(e) = self.decide(&input, now, &mut fx) {
            fx = vec![Effect::Log { entry: LogEntry::Rejected { reason: e.to_string() } }];
        }
        for e in &fx {
            match e {
                Effect::SendNotice { notice } => self.send_friend(ToFriend::Notice(notice.clone()), now),
                Effect::SendMedia { media } => self.transmit(media.clone(), now),
                Effect::ArmTimer { fire_at_ms, kind, key } => {
                    self.timer(*fire_at_ms, Work::WearerTimer { kind: *kind, key: *key })
                }
                Effect::SetLed { signal } => {
                    self.unlight(now);
                    self.shown.push(*signal);
                    self.lit = true;
                }
                Effect::ClearLed => self.unlight(now),
                Effect::Log { .. } => {}
            }
        }
        self.steps.push(WearerStep { at_ms: now, input, effects: fx });
    }

    fn unlight(&mut self, now: Timestamp) {
        if !self.lit {
            return;
        }
        self.lit = false;
        let last = self.shown.len() - 1;
        if self.shown[last].end_ms > now {
            self.shown[last].end_ms = now;
        }
        if self.shown[last].end_ms <= self.shown[last].start_ms {
            self.shown.pop();
        }
    }

    fn transmit(&mut self, media: MediaItem, now: Timestamp) {
        let tx = match media.kind {
            MediaKind::Photo => self.p.photo_tx_ms,
            MediaKind::Video => self.p.video_tx_ms,
        };
        let arrive = now + tx;
        self.send_friend(ToFriend::Notice(NoticeKind::Transmitting), now);
        let step = self.p.countdown_interval_ms;
        let mut n = tx.checked_div(step).map_or(0, |n| n.min(self.p.countdown_start as u64));
        while n >= 1 {
            let at = arrive - n * step;
            if at <= now {
                self.send_friend(ToFriend::Notice(NoticeKind::Countdown(n as u32)), now);
            } else {
                self.timer(at, Work::Countdown(n as u32));
            }
            n -= 1;
        }
        if arrive <= now {
            self.send_friend(ToFriend::Media(media), now);
        } else {
            self.timer(arrive, Work::Deliver(media));
        }
    }

    // ---- wearer rules ----

    fn decide(&mut self, input: &WearerInput, now: Timestamp, fx: &mut Vec<Effect>) -> Result<(), WearerError> {
        match input {
            WearerInput::StartSession { mode, .. } => {
                if self.in_session {
                    return Err(WearerError::SessionActive);
                }
                self.in_session = true;
                self.mode = *mode;
                fx.push(say(NoticeKind::Invitation));
            }
            WearerInput::SetMode { mode } => {
                self.need_session()?;
                self.mode = *mode;
                fx.push(say(NoticeKind::ModeChange(*mode)));
            }
            WearerInput::FriendCommand { cmd, .. } => {
                self.need_session()?;
                match cmd {
                    FriendCommand::Trigger => self.trigger_request(now, fx),
                    FriendCommand::ThumbsUp => {
                        self.flashes.push((LedCause::ThumbsUp, now));
                        self.refresh_led(now, fx);
                    }
                    FriendCommand::ThumbsDown => {
                        self.flashes.push((LedCause::ThumbsDown, now));
                        self.refresh_led(now, fx);
                    }
                }
            }
            WearerInput::Gesture { gesture } => {
                self.need_session()?;
                self.gesture(*gesture, now, fx);
            }
            WearerInput::EndSession => {
                self.need_session()?;
                if self.recording.is_some() {
                    return Err(WearerError::CaptureInProgress);
                }
                self.finish_session(fx);
            }
            WearerInput::Timer { kind, key } => {
                let Some(pos) = self.armed.iter().position(|a| *a == (now, *kind, *key)) else {
                    fx.push(note(LogEntry::StaleTimer { kind: *kind, key: *key }));
                    return Ok(());
                };
                self.armed.remove(pos);
                match kind {
                    TimerKind::TriggerDeadline => self.deadline(now, fx),
                    TimerKind::CaptureEnd => self.recording_done(now, fx),
                    TimerKind::HoldRelease => {
                        if let Some(i) = self.held.iter().position(|(m, _)| m.id == *key) {
                            let (m, _) = self.held.remove(i);
                            fx.push(Effect::SendMedia { media: m });
                        }
                    }
                    TimerKind::LedExpire => {
                        if self.flash_gen == Some(*key) {
                            self.flash_gen = None;
                        }
                        self.refresh_led(now, fx);
                    }
                }
            }
        }
        Ok(())
    }

    fn need_session(&self) -> Result<(), WearerError> {
        if self.in_session {
            Ok(())
        } else {
            Err(WearerError::NoSession)
        }
    }

    fn trigger_request(&mut self, now: Timestamp, fx: &mut Vec<Effect>) {
        if self.mode == SharingMode::Off {
            fx.push(say(NoticeKind::TriggersPaused));
        } else if self.trigger.is_some() {
            fx.push(say(NoticeKind::TriggerReceived));
        } else if !self.held.is_empty() {
            let (m, _) = self.held.remove(0);
            self.disarm(TimerKind::HoldRelease, m.id);
            let (id, kind) = (m.id, m.kind);
            fx.push(say(NoticeKind::TriggerReceived));
            fx.push(say(NoticeKind::TriggerApproved(kind)));
            fx.push(Effect::SendMedia { media: m });
            fx.push(note(LogEntry::FastFulfilled { media_id: id }));
        } else {
            self.trigger_ids += 1;
            let id = self.trigger_ids;
            let deadline = now + self.p.trigger_timeout_ms;
            self.trigger = Some(Trigger { id, deadline, declined: false });
            fx.push(say(NoticeKind::TriggerReceived));
            fx.push(note(LogEntry::TriggerCreated { trigger_id: id }));
            self.refresh_led(now, fx);
            self.arm(deadline, TimerKind::TriggerDeadline, id, fx);
        }
    }

    fn gesture(&mut self, g: Gesture, now: Timestamp, fx: &mut Vec<Effect>) {
        if self.recording.is_some() {
            fx.push(note(LogEntry::GestureIgnored { gesture: g, reason: "capture in progress".into() }));
            return;
        }
        let live = self.trigger.as_ref().filter(|t| !t.declined).map(|t| t.id);
        match g {
            Gesture::SwipeBack => match live {
                Some(id) => {
                    self.trigger.as_mut().expect("live").declined = true;
                    fx.push(note(LogEntry::TriggerResolved { trigger_id: id, outcome: TriggerOutcome::Declined }));
                    self.refresh_led(now, fx);
                }
                None => fx.push(note(LogEntry::GestureIgnored { gesture: g, reason: "no pending trigger".into() })),
            },
            Gesture::Press | Gesture::PressHold => {
                let kind = if g == Gesture::Press { MediaKind::Photo } else { MediaKind::Video };
                self.media_ids += 1;
                let media_id = self.media_ids;
                let answers = live.map(|id| {
                    self.trigger = None;
                    self.disarm(TimerKind::TriggerDeadline, id);
                    fx.push(note(LogEntry::TriggerResolved {
                        trigger_id: id,
                        outcome: TriggerOutcome::FulfilledEarly(media_id),
                    }));
                    (id, false)
                });
                self.record(media_id, kind, answers, now, fx);
            }
        }
    }

    fn record(&mut self, media_id: u64, kind: MediaKind, answers: Option<(u64, bool)>, now: Timestamp, fx: &mut Vec<Effect>) {
        let len = match kind {
            MediaKind::Photo => self.p.photo_capture_ms,
            MediaKind::Video => self.p.video_len_ms,
        };
        self.recording = Some(Recording { media_id, kind, start: now, end: now + len, answers });
        self.refresh_led(now, fx);
        self.arm(now + len, TimerKind::CaptureEnd, media_id, fx);
    }

    fn finish_session(&mut self, fx: &mut Vec<Effect>) {
        if let Some(t) = self.trigger.take() {
            self.disarm(TimerKind::TriggerDeadline, t.id);
            if !t.declined {
                fx.push(note(LogEntry::TriggerResolved {
                    trigger_id: t.id,
                    outcome: TriggerOutcome::TimedOutUnavailable,
                }));
            }
            fx.push(say(NoticeKind::Unavailable));
        }
        for (m, _) in std::mem::take(&mut self.held) {
            self.disarm(TimerKind::HoldRelease, m.id);
            fx.push(Effect::SendMedia { media: m });
        }
        fx.push(say(NoticeKind::SessionEnded));
        self.in_session = false;
        self.flashes.clear();
        self.forget_flash_timer();
        if self.led.take().is_some() {
            fx.push(Effect::ClearLed);
        }
        self.armed.clear();
    }

    fn deadline(&mut self, now: Timestamp, fx: &mut Vec<Effect>) {
        let Some(t) = self.trigger.take() else { return };
        if t.declined {
            fx.push(say(NoticeKind::Unavailable));
            self.refresh_led(now, fx);
            return;
        }
        if self.mode == SharingMode::Auto {
            match &mut self.recording {
                None => {
                    self.media_ids += 1;
                    let media_id = self.media_ids;
                    self.record(media_id, MediaKind::Video, Some((t.id, true)), now, fx);
                    return;
                }
                Some(r) if r.answers.is_none() => {
                    r.answers = Some((t.id, true));
                    self.refresh_led(now, fx);
                    return;
                }
                Some(_) => {}
            }
        }
        fx.push(note(LogEntry::TriggerResolved { trigger_id: t.id, outcome: TriggerOutcome::TimedOutUnavailable }));
        fx.push(say(NoticeKind::Unavailable));
        self.refresh_led(now, fx);
    }

    fn recording_done(&mut self, now: Timestamp, fx: &mut Vec<Effect>) {
        let Some(r) = self.recording.take() else { return };
        let answered = match r.answers {
            Some((id, false)) => Some(id),
            Some((id, true)) => {
                fx.push(note(LogEntry::TriggerResolved {
                    trigger_id: id,
                    outcome: TriggerOutcome::AutoFulfilled(r.media_id),
                }));
                Some(id)
            }
            None => match self.trigger.as_ref().filter(|t| !t.declined).map(|t| t.id) {
                Some(id) => {
                    self.trigger = None;
                    self.disarm(TimerKind::TriggerDeadline, id);
                    fx.push(note(LogEntry::TriggerResolved {
                        trigger_id: id,
                        outcome: TriggerOutcome::FulfilledEarly(r.media_id),
                    }));
                    Some(id)
                }
                None => None,
            },
        };
        let initiator = answered.map_or(Initiator::WearerInitiated, Initiator::TriggerFulfillment);
        let media = MediaItem::captured(r.media_id, r.kind, r.start, initiator, &self.p);
        debug_assert_eq!(media.capture_end_ms, r.end);
        if answered.is_some() {
            fx.push(say(NoticeKind::TriggerApproved(r.kind)));
            fx.push(Effect::SendMedia { media });
        } else {
            let release = now + self.p.hold_ms;
            self.held.push((media, release));
            fx.push(note(LogEntry::MediaHeld { media_id: r.media_id, release_at_ms: release }));
            self.arm(release, TimerKind::HoldRelease, r.media_id, fx);
        }
        self.flashes.push((LedCause::Sent, now));
        self.refresh_led(now, fx);
    }

    fn refresh_led(&mut self, now: Timestamp, fx: &mut Vec<Effect>) {
        let current = self.led.map(|s| s.cause);
        if let Some(t) = self.trigger.as_ref().filter(|t| !t.declined) {
            if current != Some(LedCause::TriggerPending) {
                let s = LedSignal::new(LedCause::TriggerPending, now, t.deadline);
                self.light(s, fx);
            }
            return;
        }
        if let Some(r) = &self.recording {
            if !matches!(current, Some(LedCause::Capturing(_))) {
                let s = LedSignal::new(LedCause::Capturing(r.kind), now, r.end);
                self.light(s, fx);
            }
            return;
        }
        if let Some(a) = self.led {
            let flashing = matches!(a.cause, LedCause::Sent | LedCause::ThumbsUp | LedCause::ThumbsDown);
            if flashing && a.end_ms > now && !self.flashes.iter().any(|(c, _)| rank(*c) > rank(a.cause)) {
                return;
            }
        }
        let mut i = 0;
        while i < self.flashes.len() {
            let (c, asked) = self.flashes[i];
            let thumb = matches!(c, LedCause::ThumbsUp | LedCause::ThumbsDown);
            if thumb && now - asked > THUMB_DEFER_LIMIT_MS {
                fx.push(note(LogEntry::FlashDropped { cause: c }));
                self.flashes.remove(i);
            } else {
                i += 1;
            }
        }
        let mut best: Option<usize> = None;
        for (i, (c, _)) in self.flashes.iter().enumerate() {
            if best.is_none_or(|b| rank(*c) > rank(self.flashes[b].0)) {
                best = Some(i);
            }
        }
        match best {
            Some(b) => {
                let (c, _) = self.flashes.remove(b);
                let s = led_signal_for(c, now, &self.p);
                self.light(s, fx);
                self.gens += 1;
                self.flash_gen = Some(self.gens);
                self.arm(s.end_ms, TimerKind::LedExpire, self.gens, fx);
            }
            None => {
                self.forget_flash_timer();
                if self.led.take().is_some() {
                    fx.push(Effect::ClearLed);
                }
            }
        }
    }

    fn light(&mut self, s: LedSignal, fx: &mut Vec<Effect>) {
        self.forget_flash_timer();
        self.led = Some(s);
        fx.push(Effect::SetLed { signal: s });
    }

    fn forget_flash_timer(&mut self) {
        if let Some(g) = self.flash_gen.take() {
            self.disarm(TimerKind::LedExpire, g);
        }
    }

    fn arm(&mut self, at: Timestamp, kind: TimerKind, key: u64, fx: &mut Vec<Effect>) {
        self.armed.push((at, kind, key));
        fx.push(Effect::ArmTimer { fire_at_ms: at, kind, key });
    }

    fn disarm(&mut self, kind: TimerKind, key: u64) {
        self.armed.retain(|&(_, k, x)| !(k == kind && x == key));
    }
}

fn rank(c: LedCause) -> u8 {
    match c {
        LedCause::TriggerPending => 3,
        LedCause::Capturing(_) => 2,
        LedCause::Sent => 1,
        LedCause::ThumbsUp | LedCause::ThumbsDown => 0,
    }
}

fn say(notice: NoticeKind) -> Effect {
    Effect::SendNotice { notice }
}

fn note(entry: LogEntry) -> Effect {
    Effect::Log { entry }
}
