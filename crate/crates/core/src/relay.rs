//! Sans-IO session host.
//!
//! A [`SessionHost`] owns one session's [`WearerState`], executes its effects, and
//! simulates media transmission (the "being transmitted" notice, the countdown, and
//! the delayed media frame). The live relay and the simulator both drive it with
//! injected timestamps.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::protocol::{Frame, LedSignal, MediaItem, NoticeKind, ProtocolParams, SharingMode, Timestamp};
use crate::wearer::{Effect, LogEntry, TimerKind, WearerInput, WearerState};

/// Which endpoint a relay frame is addressed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Audience {
    Friend,
    Wearer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Outbound {
    Notice { notice: NoticeKind },
    Media { media: MediaItem },
    /// `None` turns the LED off.
    Led { signal: Option<LedSignal> },
}

/// A relay-originated message with its relay sequence number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutFrame {
    pub to: Audience,
    pub seq: u64,
    pub at_ms: Timestamp,
    pub msg: Outbound,
}

impl OutFrame {
    pub fn to_frame(&self, session_id: &str) -> Frame {
        match &self.msg {
            Outbound::Notice { notice } => Frame::notice(session_id, self.seq, self.at_ms, notice),
            Outbound::Media { media } => Frame::media(session_id, self.seq, self.at_ms, media),
            Outbound::Led { signal } => Frame::led(session_id, self.seq, self.at_ms, signal.as_ref()),
        }
    }
}

/// One input handled by the wearer agent and the effects it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WearerStep {
    pub at_ms: Timestamp,
    pub input: WearerInput,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmitJob {
    pub media: MediaItem,
    pub enqueued_at_ms: Timestamp,
    pub deliver_at_ms: Timestamp,
    pub countdown_emitted: u32,
}

/// When each friend-facing message of one media transmission goes out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryPlan {
    pub transmitting_at_ms: Timestamp,
    /// `(at_ms, n)` in emission order; `n` counts down to 1.
    pub countdown: Vec<(Timestamp, u32)>,
    pub deliver_at_ms: Timestamp,
}

/// The countdown never has more ticks than whole intervals fit in the transmit time.
pub fn schedule_media_delivery(media: &MediaItem, now: Timestamp, params: &ProtocolParams) -> DeliveryPlan {
    let tx = params.transmit_ms(media.kind);
    let deliver_at_ms = now + tx;
    let ticks = tx.checked_div(params.countdown_interval_ms).map_or(0, |n| n.min(u64::from(params.countdown_start)));
    let countdown = (1..=ticks)
        .rev()
        .map(|n| (deliver_at_ms - n * params.countdown_interval_ms, n as u32))
        .collect();
    DeliveryPlan { transmitting_at_ms: now, countdown, deliver_at_ms }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum HostTimer {
    Wearer { kind: TimerKind, key: u64 },
    Countdown { job: u64, n: u32 },
    Deliver { job: u64 },
}

/// Result of feeding the host one input or firing one of its timers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HostOutput {
    /// Present when the wearer agent handled something.
    pub step: Option<WearerStep>,
    pub out: Vec<OutFrame>,
}

#[derive(Debug, Clone)]
pub struct SessionHost {
    session_id: String,
    friend_id: String,
    params: ProtocolParams,
    wearer: WearerState,
    jobs: BTreeMap<u64, TransmitJob>,
    next_job: u64,
    timers: BinaryHeap<Reverse<(Timestamp, u64, HostTimer)>>,
    arm_seq: u64,
    relay_seq: u64,
}

impl SessionHost {
    pub fn new(session_id: impl Into<String>, friend_id: impl Into<String>, params: ProtocolParams) -> Self {
        Self {
            session_id: session_id.into(),
            friend_id: friend_id.into(),
            params,
            wearer: WearerState::new(params),
            jobs: BTreeMap::new(),
            next_job: 1,
            timers: BinaryHeap::new(),
            arm_seq: 0,
            relay_seq: 0,
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn wearer(&self) -> &WearerState {
        &self.wearer
    }

    pub fn jobs(&self) -> impl Iterator<Item = &TransmitJob> {
        self.jobs.values()
    }

    pub fn start_session(&mut self, mode: SharingMode, now: Timestamp) -> HostOutput {
        let input = WearerInput::StartSession { friend_id: self.friend_id.clone(), mode };
        self.apply(input, now)
    }

    /// Runs one input through the wearer agent and executes the resulting effects.
    /// Rejected inputs are recorded as a single `Rejected` log effect.
    pub fn apply(&mut self, input: WearerInput, now: Timestamp) -> HostOutput {
        let effects = match self.wearer.handle(&input, now) {
            Ok(fx) => fx,
            Err(e) => vec![Effect::Log { entry: LogEntry::Rejected { reason: e.to_string() } }],
        };
        let mut out = Vec::new();
        for effect in &effects {
            self.execute(effect, now, &mut out);
        }
        HostOutput { step: Some(WearerStep { at_ms: now, input, effects }), out }
    }

    pub fn next_timer_at(&self) -> Option<Timestamp> {
        self.timers.peek().map(|Reverse((at, _, _))| *at)
    }

    /// Fires the earliest timer due at or before `now`, if any. Timers fire in
    /// `(time, arm order)` order and at their scheduled time.
    pub fn fire_next(&mut self, now: Timestamp) -> Option<HostOutput> {
        let Reverse((at, _, _)) = *self.timers.peek()?;
        if at > now {
            return None;
        }
        let Reverse((at, _, timer)) = self.timers.pop().expect("peeked");
        Some(match timer {
            HostTimer::Wearer { kind, key } => self.apply(WearerInput::Timer { kind, key }, at),
            HostTimer::Countdown { job, n } => {
                let mut out = Vec::new();
                if let Some(j) = self.jobs.get_mut(&job) {
                    j.countdown_emitted += 1;
                    self.emit(Audience::Friend, at, Outbound::Notice { notice: NoticeKind::Countdown(n) }, &mut out);
                }
                HostOutput { step: None, out }
            }
            HostTimer::Deliver { job } => {
                let mut out = Vec::new();
                if let Some(j) = self.jobs.remove(&job) {
                    self.emit(Audience::Friend, at, Outbound::Media { media: j.media }, &mut out);
                }
                HostOutput { step: None, out }
            }
        })
    }

    /// Fires every timer due at or before `now`.
    pub fn advance(&mut self, now: Timestamp) -> Vec<HostOutput> {
        std::iter::from_fn(|| self.fire_next(now)).collect()
    }

    /// Reserves the next relay sequence number for a frame the host did not produce.
    pub fn next_seq(&mut self) -> u64 {
        self.relay_seq += 1;
        self.relay_seq
    }

    /// Drops undelivered transmissions, returning them.
    pub fn close(&mut self) -> Vec<TransmitJob> {
        self.timers.clear();
        std::mem::take(&mut self.jobs).into_values().collect()
    }

    fn execute(&mut self, effect: &Effect, now: Timestamp, out: &mut Vec<OutFrame>) {
        match effect {
            Effect::SendNotice { notice } => {
                self.emit(Audience::Friend, now, Outbound::Notice { notice: notice.clone() }, out)
            }
            Effect::SendMedia { media } => self.transmit(media.clone(), now, out),
            Effect::SetLed { signal } => self.emit(Audience::Wearer, now, Outbound::Led { signal: Some(*signal) }, out),
            Effect::ClearLed => self.emit(Audience::Wearer, now, Outbound::Led { signal: None }, out),
            Effect::ArmTimer { fire_at_ms, kind, key } => {
                self.arm(*fire_at_ms, HostTimer::Wearer { kind: *kind, key: *key })
            }
            Effect::Log { .. } => {}
        }
    }

    fn transmit(&mut self, media: MediaItem, now: Timestamp, out: &mut Vec<OutFrame>) {
        let plan = schedule_media_delivery(&media, now, &self.params);
        let job = self.next_job;
        self.next_job += 1;
        self.emit(Audience::Friend, now, Outbound::Notice { notice: NoticeKind::Transmitting }, out);
        let mut emitted = 0;
        for &(at, n) in &plan.countdown {
            if at <= now {
                emitted += 1;
                self.emit(Audience::Friend, now, Outbound::Notice { notice: NoticeKind::Countdown(n) }, out);
            } else {
                self.arm(at, HostTimer::Countdown { job, n });
            }
        }
        if plan.deliver_at_ms <= now {
            self.emit(Audience::Friend, now, Outbound::Media { media }, out);
            return;
        }
        self.jobs.insert(
            job,
            TransmitJob { media, enqueued_at_ms: now, deliver_at_ms: plan.deliver_at_ms, countdown_emitted: emitted },
        );
        self.arm(plan.deliver_at_ms, HostTimer::Deliver { job });
    }

    fn arm(&mut self, at: Timestamp, timer: HostTimer) {
        self.arm_seq += 1;
        self.timers.push(Reverse((at, self.arm_seq, timer)));
    }

    fn emit(&mut self, to: Audience, at_ms: Timestamp, msg: Outbound, out: &mut Vec<OutFrame>) {
        self.relay_seq += 1;
        out.push(OutFrame { to, seq: self.relay_seq, at_ms, msg });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{FriendCommand, Initiator, MediaKind};

    fn media(kind: MediaKind) -> MediaItem {
        MediaItem::captured(1, kind, 0, Initiator::WearerInitiated, &ProtocolParams::default())
    }

    #[test]
    fn video_countdown_plan() {
        let plan = schedule_media_delivery(&media(MediaKind::Video), 20_000, &ProtocolParams::default());
        assert_eq!(plan.transmitting_at_ms, 20_000);
        assert_eq!(
            plan.countdown,
            vec![(20_000, 5), (21_000, 4), (22_000, 3), (23_000, 2), (24_000, 1)]
        );
        assert_eq!(plan.deliver_at_ms, 25_000);
    }

    #[test]
    fn photo_countdown_plan() {
        let plan = schedule_media_delivery(&media(MediaKind::Photo), 11_000, &ProtocolParams::default());
        assert_eq!(plan.countdown, vec![(11_000, 1)]);
        assert_eq!(plan.deliver_at_ms, 12_000);
    }

    #[test]
    fn zero_transmit_time_delivers_immediately() {
        let params = ProtocolParams { photo_tx_ms: 0, ..Default::default() };
        let plan = schedule_media_delivery(&media(MediaKind::Photo), 7, &params);
        assert!(plan.countdown.is_empty());
        assert_eq!(plan.deliver_at_ms, 7);

        let mut host = SessionHost::new("s", "fr", params);
        let mut out = Vec::new();
        host.transmit(media(MediaKind::Photo), 7, &mut out);
        let kinds: Vec<_> = out.iter().map(|o| &o.msg).collect();
        assert!(matches!(kinds[0], Outbound::Notice { notice: NoticeKind::Transmitting }));
        assert!(matches!(kinds[1], Outbound::Media { .. }));
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn countdown_clamped_to_transmit_seconds() {
        let params = ProtocolParams { video_tx_ms: 2_500, ..Default::default() };
        let plan = schedule_media_delivery(&media(MediaKind::Video), 0, &params);
        assert_eq!(plan.countdown, vec![(500, 2), (1_500, 1)]);
    }

    #[test]
    fn host_runs_auto_timeout_to_delivery() {
        let mut host = SessionHost::new("s", "fr", ProtocolParams::default());
        let start = host.start_session(SharingMode::Auto, 0);
        assert_eq!(start.out.len(), 1);
        host.apply(WearerInput::FriendCommand { cmd: FriendCommand::Trigger, seq: 1 }, 0);
        let mut friend_msgs = Vec::new();
        while let Some(at) = host.next_timer_at() {
            for o in host.fire_next(at).unwrap().out {
                if o.to == Audience::Friend {
                    friend_msgs.push((o.at_ms, o.msg));
                }
            }
        }
        let media_at: Vec<_> = friend_msgs
            .iter()
            .filter(|(_, m)| matches!(m, Outbound::Media { .. }))
            .map(|(t, _)| *t)
            .collect();
        assert_eq!(media_at, vec![25_000]);
        let countdown: Vec<_> = friend_msgs
            .iter()
            .filter_map(|(t, m)| match m {
                Outbound::Notice { notice: NoticeKind::Countdown(n) } => Some((*t, *n)),
                _ => None,
            })
            .collect();
        assert_eq!(countdown, vec![(20_000, 5), (21_000, 4), (22_000, 3), (23_000, 2), (24_000, 1)]);
    }

    #[test]
    fn relay_seq_is_strictly_increasing() {
        let mut host = SessionHost::new("s", "fr", ProtocolParams::default());
        let mut seqs = Vec::new();
        seqs.extend(host.start_session(SharingMode::Manual, 0).out.iter().map(|o| o.seq));
        let o = host.apply(WearerInput::Gesture { gesture: crate::protocol::Gesture::Press }, 10);
        seqs.extend(o.out.iter().map(|o| o.seq));
        for o in host.advance(100_000) {
            seqs.extend(o.out.iter().map(|o| o.seq));
        }
        assert!(seqs.windows(2).all(|w| w[0] < w[1]), "{seqs:?}");
    }

    #[test]
    fn close_drops_jobs() {
        let mut host = SessionHost::new("s", "fr", ProtocolParams::default());
        host.start_session(SharingMode::Manual, 0);
        host.apply(WearerInput::Gesture { gesture: crate::protocol::Gesture::Press }, 0);
        // Capture ends at 1000, hold until 11000, then a 1 s transmission.
        host.advance(11_000);
        assert_eq!(host.jobs().count(), 1);
        let dropped = host.close();
        assert_eq!(dropped.len(), 1);
        assert_eq!(host.next_timer_at(), None);
    }

    #[test]
    fn rejected_input_is_logged() {
        let mut host = SessionHost::new("s", "fr", ProtocolParams::default());
        let o = host.apply(WearerInput::FriendCommand { cmd: FriendCommand::Trigger, seq: 1 }, 0);
        let step = o.step.unwrap();
        assert!(matches!(step.effects.as_slice(), [Effect::Log { entry: LogEntry::Rejected { .. } }]));
        assert!(o.out.is_empty());
    }
}
