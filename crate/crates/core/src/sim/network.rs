//! Seeded per-direction network model.
//!
//! Every frame put on the network consumes exactly two draws from one ChaCha8 stream,
//! a drop draw then a jitter draw, in frame-send order. The schedule is therefore a
//! pure function of the seed and the send sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::protocol::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkModel {
    pub base_latency_ms: u64,
    /// Upper bound of the uniform jitter added to each frame, inclusive.
    pub jitter_ms: u64,
    pub drop_prob: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self { base_latency_ms: 0, jitter_ms: 0, drop_prob: 0.0 }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(format!("drop_prob must be within [0, 1], got {}", self.drop_prob));
        }
        Ok(())
    }

    pub fn max_latency_ms(&self) -> u64 {
        self.base_latency_ms + self.jitter_ms
    }
}

/// The relay sits next to the Wearer, so only the Friend's two directions are modeled.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkModel {
    pub seed: u64,
    /// Friend to relay.
    pub to_wearer: LinkModel,
    /// Relay to Friend.
    pub to_friend: LinkModel,
}

impl NetworkModel {
    pub fn validate(&self) -> Result<(), String> {
        self.to_wearer.validate().map_err(|m| format!("to_wearer: {m}"))?;
        self.to_friend.validate().map_err(|m| format!("to_friend: {m}"))
    }

    pub fn link(&self, dir: LinkDirection) -> &LinkModel {
        match dir {
            LinkDirection::ToWearer => &self.to_wearer,
            LinkDirection::ToFriend => &self.to_friend,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkDirection {
    ToWearer,
    ToFriend,
}

#[derive(Debug, Clone)]
pub struct Network {
    model: NetworkModel,
    rng: ChaCha8Rng,
}

impl Network {
    pub fn new(model: NetworkModel) -> Self {
        Self { model, rng: ChaCha8Rng::seed_from_u64(model.seed) }
    }

    /// Arrival time of a frame sent at `now`, or `None` if it is dropped.
    pub fn send(&mut self, dir: LinkDirection, now: Timestamp) -> Option<Timestamp> {
        let link = *self.model.link(dir);
        let drop_draw: f64 = self.rng.random();
        let jitter = self.rng.random_range(0..=link.jitter_ms);
        (drop_draw >= link.drop_prob).then(|| now + link.base_latency_ms + jitter)
    }
}
