//! Run metrics and their recomputation from logs.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::friend::{Direction, EntryContent, FriendTranscript};
use crate::protocol::{FriendCommand, Initiator, NoticeKind, Timestamp, TriggerId};
use crate::relay::WearerStep;
use crate::wearer::{Effect, LogEntry, TriggerOutcome, WearerInput};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub triggers_sent: u64,
    pub triggers_coalesced: u64,
    pub fulfilled_fast: u64,
    pub fulfilled_early: u64,
    pub fulfilled_auto: u64,
    pub unavailable_count: u64,
    pub media_delivered: u64,
    /// Media arrival minus the send time of the originating `T`, in arrival order.
    pub latencies_ms: Vec<u64>,
    pub mean_latency_ms: Option<f64>,
    pub max_latency_ms: Option<u64>,
}

impl Metrics {
    pub fn push_latency(&mut self, latency_ms: u64) {
        self.latencies_ms.push(latency_ms);
        let n = self.latencies_ms.len() as f64;
        let sum: u64 = self.latencies_ms.iter().sum();
        self.mean_latency_ms = Some(sum as f64 / n);
        self.max_latency_ms = self.latencies_ms.iter().copied().max();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntegrityError {
    #[error("step at {at_ms} ms: {reason}")]
    Step { at_ms: Timestamp, reason: String },
    #[error("transcript entry at {at_ms} ms: {reason}")]
    Transcript { at_ms: Timestamp, reason: String },
    #[error("embedded metrics differ from recomputed ones: {0}")]
    Mismatch(String),
}

/// A coalesced `T` produces a lone `TriggerReceived` and nothing else.
fn is_coalesced(step: &WearerStep) -> bool {
    matches!(step.input, WearerInput::FriendCommand { cmd: FriendCommand::Trigger, .. })
        && matches!(step.effects.as_slice(), [Effect::SendNotice { notice: NoticeKind::TriggerReceived }])
}

/// Recomputes metrics from the wearer log and the Friend transcript alone.
pub fn compute_metrics(steps: &[WearerStep], transcript: &FriendTranscript) -> Result<Metrics, IntegrityError> {
    let mut m = Metrics::default();
    let mut sent_at: HashMap<u64, Timestamp> = HashMap::new();
    for e in transcript.entries() {
        if let (Direction::Sent, EntryContent::CommandText { text }) = (e.direction, &e.content) {
            if let Some(seq) = e.seq {
                sent_at.insert(seq, e.ts_ms);
            }
            if text == "T" {
                m.triggers_sent += 1;
            }
        }
    }

    let mut trigger_origin: HashMap<TriggerId, u64> = HashMap::new();
    let mut resolved: HashSet<TriggerId> = HashSet::new();
    let mut media_origin: HashMap<String, Option<u64>> = HashMap::new();
    for step in steps {
        let fail = |reason: String| IntegrityError::Step { at_ms: step.at_ms, reason };
        let cmd_seq = match step.input {
            WearerInput::FriendCommand { cmd: FriendCommand::Trigger, seq } => Some(seq),
            _ => None,
        };
        if is_coalesced(step) {
            m.triggers_coalesced += 1;
        }
        let fast_ids: Vec<u64> = step
            .effects
            .iter()
            .filter_map(|e| match e {
                Effect::Log { entry: LogEntry::FastFulfilled { media_id } } => Some(*media_id),
                _ => None,
            })
            .collect();
        for effect in &step.effects {
            match effect {
                Effect::Log { entry: LogEntry::TriggerCreated { trigger_id } } => {
                    let seq = cmd_seq.ok_or_else(|| fail(format!("trigger {trigger_id} created outside a 'T'")))?;
                    if trigger_origin.insert(*trigger_id, seq).is_some() {
                        return Err(fail(format!("trigger {trigger_id} created twice")));
                    }
                }
                Effect::Log { entry: LogEntry::TriggerResolved { trigger_id, outcome } } => {
                    if !trigger_origin.contains_key(trigger_id) {
                        return Err(fail(format!("unknown trigger {trigger_id} resolved")));
                    }
                    if !resolved.insert(*trigger_id) {
                        return Err(fail(format!("trigger {trigger_id} resolved twice")));
                    }
                    match outcome {
                        TriggerOutcome::FulfilledEarly(_) => m.fulfilled_early += 1,
                        TriggerOutcome::AutoFulfilled(_) => m.fulfilled_auto += 1,
                        TriggerOutcome::Pending => return Err(fail(format!("trigger {trigger_id} resolved to pending"))),
                        TriggerOutcome::Declined | TriggerOutcome::TimedOutUnavailable => {}
                    }
                }
                Effect::Log { entry: LogEntry::FastFulfilled { .. } } => {
                    if cmd_seq.is_none() {
                        return Err(fail("fast fulfillment outside a 'T'".into()));
                    }
                    m.fulfilled_fast += 1;
                }
                Effect::SendNotice { notice: NoticeKind::Unavailable } => m.unavailable_count += 1,
                Effect::SendMedia { media } => {
                    let origin = match media.initiator {
                        Initiator::TriggerFulfillment(id) => Some(
                            *trigger_origin.get(&id).ok_or_else(|| fail(format!("media for unknown trigger {id}")))?,
                        ),
                        Initiator::WearerInitiated if fast_ids.contains(&media.id) => cmd_seq,
                        Initiator::WearerInitiated => None,
                    };
                    if media_origin.insert(media.payload_digest.clone(), origin).is_some() {
                        return Err(fail(format!("media {} sent twice", media.id)));
                    }
                }
                _ => {}
            }
        }
    }

    let mut delivered: HashSet<&str> = HashSet::new();
    for e in transcript.entries() {
        let EntryContent::MediaRef { digest, .. } = &e.content else { continue };
        let fail = |reason: String| IntegrityError::Transcript { at_ms: e.ts_ms, reason };
        if !delivered.insert(digest) {
            return Err(fail(format!("media {digest} delivered twice")));
        }
        m.media_delivered += 1;
        let origin = media_origin.get(digest).ok_or_else(|| fail(format!("media {digest} was never sent")))?;
        if let Some(seq) = origin {
            let sent = sent_at.get(seq).ok_or_else(|| fail(format!("originating command {seq} missing")))?;
            let latency = e.ts_ms.checked_sub(*sent).ok_or_else(|| fail("media arrived before its trigger".into()))?;
            m.push_latency(latency);
        }
    }
    Ok(m)
}
