//! Discrete-event engine.
//!
//! One ordered queue holds network arrivals and scenario events; the session host
//! owns the timers. At equal timestamps arrivals go first, then scenario events,
//! then timers, each class in insertion order.

use std::collections::{BTreeMap, HashMap};

use super::metrics::Metrics;
use super::network::{LinkDirection, Network};
use super::report::{led_timeline, SimReport};
use super::scenario::{Action, Scenario};
use crate::friend::FriendAgent;
use crate::protocol::{
    kind, parse_friend_text, Frame, FriendCommand, Initiator, NoticeKind, ParsedText, Timestamp, TriggerId,
};
use crate::relay::{Audience, HostOutput, SessionHost, WearerStep};
use crate::wearer::{Effect, LogEntry, TriggerOutcome, WearerInput, WearerState};

pub const SIM_SESSION_ID: &str = "sim";
pub const SIM_FRIEND_ID: &str = "friend";

const CLASS_ARRIVAL: u8 = 0;
const CLASS_EXTERNAL: u8 = 1;

enum Item {
    Event(usize),
    AtRelay(Frame),
    AtFriend(Frame),
}

pub fn run_scenario(scenario: &Scenario) -> SimReport {
    run_observed(scenario, |_, _| {})
}

/// Runs `scenario`, calling `observe` with the wearer state after every wearer step.
pub fn run_observed(scenario: &Scenario, mut observe: impl FnMut(&WearerState, Timestamp)) -> SimReport {
    let mut engine = Engine {
        scenario,
        host: SessionHost::new(SIM_SESSION_ID, SIM_FRIEND_ID, scenario.params),
        friend: FriendAgent::new(SIM_SESSION_ID),
        net: Network::new(scenario.network),
        queue: BTreeMap::new(),
        arrivals: 0,
        steps: Vec::new(),
        tally: Tally::default(),
        observe: &mut observe,
    };
    for (i, ev) in scenario.events.iter().enumerate() {
        engine.queue.insert((ev.at_ms, CLASS_EXTERNAL, i as u64), Item::Event(i));
    }
    engine.run();
    let Engine { friend, steps, tally, .. } = engine;
    let friend_transcript = friend.into_transcript();
    SimReport {
        scenario: scenario.name.clone(),
        seed: scenario.network.seed,
        transcript_digest: friend_transcript.digest(),
        friend_transcript,
        led_timeline: led_timeline(&steps),
        wearer_log: steps,
        metrics: tally.metrics,
    }
}

struct Engine<'a> {
    scenario: &'a Scenario,
    host: SessionHost,
    friend: FriendAgent,
    net: Network,
    queue: BTreeMap<(Timestamp, u8, u64), Item>,
    arrivals: u64,
    steps: Vec<WearerStep>,
    tally: Tally,
    observe: &'a mut dyn FnMut(&WearerState, Timestamp),
}

impl Engine<'_> {
    fn run(&mut self) {
        loop {
            let next_item = self.queue.first_key_value().map(|(k, _)| k.0);
            let next_timer = self.host.next_timer_at();
            let timer_first = match (next_item, next_timer) {
                (None, None) => break,
                (Some(at), Some(t)) => t < at,
                (None, Some(_)) => true,
                (Some(_), None) => false,
            };
            if timer_first {
                let at = next_timer.expect("timer exists");
                let out = self.host.fire_next(at).expect("timer is due");
                self.absorb(out);
            } else {
                let ((at, _, _), item) = self.queue.pop_first().expect("queue is non-empty");
                self.handle(item, at);
            }
        }
    }

    fn handle(&mut self, item: Item, now: Timestamp) {
        match item {
            Item::Event(i) => self.scenario_event(i, now),
            Item::AtRelay(frame) => {
                let text = frame.body_str("text").unwrap_or_default();
                if let ParsedText::Command(cmd) = parse_friend_text(text) {
                    let out = self.host.apply(WearerInput::FriendCommand { cmd, seq: frame.seq }, now);
                    self.absorb(out);
                }
            }
            Item::AtFriend(frame) => {
                self.friend.ingest(&frame, now).expect("simulated frames are routed to the simulated friend");
                if frame.kind == kind::MEDIA {
                    let id = frame.body.get("id").and_then(|v| v.as_u64()).expect("media frames carry an id");
                    self.tally.delivered(id, now);
                }
            }
        }
    }

    fn scenario_event(&mut self, i: usize, now: Timestamp) {
        let input = match &self.scenario.events[i].action {
            Action::StartSession { mode } => WearerInput::StartSession {
                friend_id: SIM_FRIEND_ID.into(),
                mode: mode.unwrap_or(self.scenario.initial_mode),
            },
            Action::Gesture { gesture } => WearerInput::Gesture { gesture: *gesture },
            Action::SetMode { mode } => WearerInput::SetMode { mode: *mode },
            Action::EndSession => WearerInput::EndSession,
            Action::Command { text } => {
                let sent = match parse_friend_text(text) {
                    ParsedText::Command(cmd) => self.friend.send_command(cmd, now).map(|f| (Some(cmd), f)),
                    ParsedText::PlainText(_) => self.friend.send_text(text, now).map(|f| (None, f)),
                };
                // Before the invitation arrives the Friend has nobody to text.
                if let Ok((cmd, frame)) = sent {
                    self.tally.friend_sent(cmd, frame.seq, now);
                    if let Some(at) = self.net.send(LinkDirection::ToWearer, now) {
                        self.enqueue_arrival(at, Item::AtRelay(frame));
                    }
                }
                return;
            }
        };
        let out = self.host.apply(input, now);
        self.absorb(out);
    }

    fn absorb(&mut self, out: HostOutput) {
        if let Some(step) = out.step {
            self.tally.step(&step);
            (self.observe)(self.host.wearer(), step.at_ms);
            self.steps.push(step);
        }
        for o in out.out {
            if o.to != Audience::Friend {
                continue;
            }
            let frame = o.to_frame(SIM_SESSION_ID);
            if let Some(at) = self.net.send(LinkDirection::ToFriend, o.at_ms) {
                self.enqueue_arrival(at, Item::AtFriend(frame));
            }
        }
    }

    fn enqueue_arrival(&mut self, at: Timestamp, item: Item) {
        self.arrivals += 1;
        self.queue.insert((at, CLASS_ARRIVAL, self.arrivals), item);
    }
}

/// Metrics counted as the run happens.
#[derive(Default)]
struct Tally {
    metrics: Metrics,
    sent_at: HashMap<u64, Timestamp>,
    trigger_seq: HashMap<TriggerId, u64>,
    media_seq: HashMap<u64, u64>,
}

impl Tally {
    fn friend_sent(&mut self, cmd: Option<FriendCommand>, seq: u64, now: Timestamp) {
        self.sent_at.insert(seq, now);
        if cmd == Some(FriendCommand::Trigger) {
            self.metrics.triggers_sent += 1;
        }
    }

    fn step(&mut self, step: &WearerStep) {
        let trigger_seq = match step.input {
            WearerInput::FriendCommand { cmd: FriendCommand::Trigger, seq } => Some(seq),
            _ => None,
        };
        let mut acks = 0;
        let mut other = 0;
        let mut fast_media = Vec::new();
        for effect in &step.effects {
            match effect {
                Effect::SendNotice { notice: NoticeKind::TriggerReceived } => acks += 1,
                Effect::SendNotice { notice: NoticeKind::Unavailable } => {
                    other += 1;
                    self.metrics.unavailable_count += 1;
                }
                Effect::Log { entry: LogEntry::TriggerCreated { trigger_id } } => {
                    other += 1;
                    if let Some(seq) = trigger_seq {
                        self.trigger_seq.insert(*trigger_id, seq);
                    }
                }
                Effect::Log { entry: LogEntry::TriggerResolved { outcome, .. } } => {
                    other += 1;
                    match outcome {
                        TriggerOutcome::FulfilledEarly(_) => self.metrics.fulfilled_early += 1,
                        TriggerOutcome::AutoFulfilled(_) => self.metrics.fulfilled_auto += 1,
                        _ => {}
                    }
                }
                Effect::Log { entry: LogEntry::FastFulfilled { media_id } } => {
                    other += 1;
                    self.metrics.fulfilled_fast += 1;
                    fast_media.push(*media_id);
                }
                Effect::SendMedia { media } => {
                    other += 1;
                    if let Initiator::TriggerFulfillment(id) = media.initiator {
                        if let Some(&seq) = self.trigger_seq.get(&id) {
                            self.media_seq.insert(media.id, seq);
                        }
                    }
                }
                _ => other += 1,
            }
        }
        if let Some(seq) = trigger_seq {
            for id in fast_media {
                self.media_seq.insert(id, seq);
            }
            if acks == 1 && other == 0 {
                self.metrics.triggers_coalesced += 1;
            }
        }
    }

    fn delivered(&mut self, media_id: u64, now: Timestamp) {
        self.metrics.media_delivered += 1;
        if let Some(sent) = self.media_seq.get(&media_id).and_then(|seq| self.sent_at.get(seq)) {
            self.metrics.push_latency(now - sent);
        }
    }
}
