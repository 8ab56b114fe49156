//! Seeded random scenarios for equivalence and invariant testing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{LinkModel, NetworkModel};
use super::scenario::{Action, Scenario, ScenarioEvent};
use crate::protocol::{Gesture, ProtocolParams, SharingMode};

#[derive(Debug, Clone, Copy)]
pub struct FuzzConfig {
    pub max_events: usize,
    pub horizon_ms: u64,
    /// Also vary the protocol timings instead of keeping the defaults.
    pub vary_params: bool,
    /// Also use lossy, jittery links.
    pub noisy_network: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self { max_events: 20, horizon_ms: 120_000, vary_params: true, noisy_network: true }
    }
}

const MODES: [SharingMode; 3] = [SharingMode::Off, SharingMode::Auto, SharingMode::Manual];

pub fn random_scenario(seed: u64, cfg: &FuzzConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sc = Scenario::new(format!("fuzz-{seed}"), MODES[rng.random_range(0..3)]);
    if cfg.vary_params && rng.random_bool(0.5) {
        sc.params = random_params(&mut rng);
    }
    sc.network = if cfg.noisy_network && rng.random_bool(0.5) {
        NetworkModel { seed: rng.random(), to_wearer: random_link(&mut rng), to_friend: random_link(&mut rng) }
    } else {
        NetworkModel { seed: rng.random(), ..NetworkModel::default() }
    };

    let n = rng.random_range(0..=cfg.max_events);
    // Coarse times make equal-timestamp collisions with timers common.
    let grid = *[1u64, 100, 1_000].get(rng.random_range(0..3)).expect("index in range");
    let mut times: Vec<u64> = (0..n).map(|_| rng.random_range(0..=cfg.horizon_ms / grid) * grid).collect();
    times.sort_unstable();
    let starts_with_session = n > 0 && rng.random_bool(0.9);
    for (i, at_ms) in times.into_iter().enumerate() {
        let action = if i == 0 && starts_with_session {
            Action::StartSession { mode: None }
        } else {
            random_action(&mut rng)
        };
        sc.events.push(ScenarioEvent { at_ms, action });
    }
    sc
}

fn random_action(rng: &mut ChaCha8Rng) -> Action {
    let command = |t: &str| Action::Command { text: t.to_owned() };
    match rng.random_range(0..100) {
        0..=25 => command(if rng.random_bool(0.8) { "T" } else { " t " }),
        26..=32 => command("U"),
        33..=39 => command("D"),
        40..=41 => command("on my way"),
        42..=53 => Action::Gesture { gesture: Gesture::Press },
        54..=63 => Action::Gesture { gesture: Gesture::PressHold },
        64..=75 => Action::Gesture { gesture: Gesture::SwipeBack },
        76..=87 => Action::SetMode { mode: MODES[rng.random_range(0..3)] },
        88..=93 => Action::EndSession,
        _ => Action::StartSession {
            mode: rng.random_bool(0.5).then(|| MODES[rng.random_range(0..3)]),
        },
    }
}

fn random_link(rng: &mut ChaCha8Rng) -> LinkModel {
    LinkModel {
        base_latency_ms: rng.random_range(0..=300),
        jitter_ms: rng.random_range(0..=200),
        drop_prob: [0.0, 0.05, 0.3, 1.0][rng.random_range(0..4)],
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> ProtocolParams {
    let interval = rng.random_range(1..=2_000);
    let video_tx = rng.random_range(1..=8_000);
    let photo_tx = rng.random_range(1..=3_000);
    let max_start = (video_tx.max(photo_tx) + interval) / interval;
    ProtocolParams {
        trigger_timeout_ms: rng.random_range(1..=15_000),
        video_len_ms: rng.random_range(1..=12_000),
        hold_ms: rng.random_range(1..=15_000),
        photo_capture_ms: rng.random_range(1..=2_000),
        video_tx_ms: video_tx,
        photo_tx_ms: photo_tx,
        countdown_start: rng.random_range(0..=max_start.min(8)) as u32,
        countdown_interval_ms: interval,
        thumb_flash_ms: rng.random_range(1..=4_000),
        sent_flash_ms: rng.random_range(1..=3_000),
    }
}
