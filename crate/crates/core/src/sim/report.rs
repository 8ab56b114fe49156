//! Simulation reports: structure, LED timeline derivation, and the two output formats.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, IntegrityError, Metrics};
use crate::friend::FriendTranscript;
use crate::protocol::{LedSignal, Timestamp};
use crate::relay::WearerStep;
use crate::wearer::Effect;

/// Version of the machine output. Bump on any change to its shape.
pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const REPORT_FORMAT_NAME: &str = "sharecam-sim-report";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario: String,
    pub seed: u64,
    pub friend_transcript: FriendTranscript,
    pub transcript_digest: String,
    pub wearer_log: Vec<WearerStep>,
    pub led_timeline: Vec<LedSignal>,
    pub metrics: Metrics,
}

#[derive(Serialize, Deserialize)]
struct MachineReport<R> {
    format: String,
    version: u32,
    report: R,
}

impl SimReport {
    /// Versioned JSON, one document followed by a newline.
    pub fn to_machine(&self) -> String {
        let doc = MachineReport { format: REPORT_FORMAT_NAME.to_owned(), version: REPORT_FORMAT_VERSION, report: self };
        let mut out = serde_json::to_string_pretty(&doc).expect("report serialization is infallible");
        out.push('\n');
        out
    }

    pub fn from_machine(text: &str) -> Result<SimReport, String> {
        let doc: MachineReport<SimReport> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if doc.format != REPORT_FORMAT_NAME || doc.version != REPORT_FORMAT_VERSION {
            return Err(format!("unsupported report format {} v{}", doc.format, doc.version));
        }
        Ok(doc.report)
    }

    /// Recomputes the metrics from the logs and compares them with the embedded ones.
    pub fn check_metrics(&self) -> Result<(), IntegrityError> {
        let recomputed = compute_metrics(&self.wearer_log, &self.friend_transcript)?;
        if recomputed != self.metrics {
            return Err(IntegrityError::Mismatch(format!("embedded {:?}, recomputed {:?}", self.metrics, recomputed)));
        }
        Ok(())
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario   {}", self.scenario);
        let _ = writeln!(out, "seed       {}", self.seed);
        let _ = writeln!(out, "transcript {} ({} entries)", self.transcript_digest, self.friend_transcript.len());
        let _ = writeln!(out);
        out.push_str(&self.friend_transcript.render());
        let _ = writeln!(out);
        let _ = writeln!(out, "LED");
        if self.led_timeline.is_empty() {
            let _ = writeln!(out, "  (never lit)");
        }
        for s in &self.led_timeline {
            let _ = writeln!(out, "  {:>9} - {:<9} {:?} {:?}", s.start_ms, s.end_ms, s.color, s.pattern);
        }
        let m = &self.metrics;
        let _ = writeln!(out);
        let _ = writeln!(out, "triggers sent       {}", m.triggers_sent);
        let _ = writeln!(out, "triggers coalesced  {}", m.triggers_coalesced);
        let _ = writeln!(out, "fulfilled fast      {}", m.fulfilled_fast);
        let _ = writeln!(out, "fulfilled early     {}", m.fulfilled_early);
        let _ = writeln!(out, "fulfilled auto      {}", m.fulfilled_auto);
        let _ = writeln!(out, "unavailable         {}", m.unavailable_count);
        let _ = writeln!(out, "media delivered     {}", m.media_delivered);
        let latencies: Vec<String> = m.latencies_ms.iter().map(|l| format!("{l} ms")).collect();
        let _ = writeln!(
            out,
            "latency             {}",
            if latencies.is_empty() { "-".to_owned() } else { latencies.join(", ") }
        );
        if let (Some(mean), Some(max)) = (m.mean_latency_ms, m.max_latency_ms) {
            let _ = writeln!(out, "latency mean/max    {mean:.1} ms / {max} ms");
        }
        out
    }
}

/// The LED as actually shown: each signal is cut short by the next `SetLed` or a
/// `ClearLed`, and signals cut to nothing are omitted.
pub fn led_timeline(steps: &[WearerStep]) -> Vec<LedSignal> {
    let mut out: Vec<LedSignal> = Vec::new();
    let mut lit = false;
    let close = |out: &mut Vec<LedSignal>, lit: &mut bool, at: Timestamp| {
        if std::mem::take(lit) {
            let last = out.last_mut().expect("lit implies a signal");
            last.end_ms = last.end_ms.min(at);
            if last.end_ms <= last.start_ms {
                out.pop();
            }
        }
    };
    for step in steps {
        for effect in &step.effects {
            match effect {
                Effect::SetLed { signal } => {
                    close(&mut out, &mut lit, step.at_ms);
                    out.push(*signal);
                    lit = true;
                }
                Effect::ClearLed => close(&mut out, &mut lit, step.at_ms),
                _ => {}
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{LedCause, MediaKind};
    use crate::wearer::WearerInput;

    fn step(at: Timestamp, effects: Vec<Effect>) -> WearerStep {
        WearerStep { at_ms: at, input: WearerInput::EndSession, effects }
    }

    #[test]
    fn timeline_truncates_and_drops_empty() {
        let green = LedSignal::new(LedCause::TriggerPending, 0, 10_000);
        let white = LedSignal::new(LedCause::Capturing(MediaKind::Photo), 4_000, 5_000);
        let blip = LedSignal::new(LedCause::Sent, 5_000, 6_000);
        let steps = vec![
            step(0, vec![Effect::SetLed { signal: green }]),
            step(4_000, vec![Effect::SetLed { signal: white }]),
            step(5_000, vec![Effect::SetLed { signal: blip }, Effect::ClearLed]),
            step(7_000, vec![Effect::ClearLed]),
        ];
        let tl = led_timeline(&steps);
        assert_eq!(tl.len(), 2);
        assert_eq!((tl[0].start_ms, tl[0].end_ms), (0, 4_000));
        assert_eq!((tl[1].start_ms, tl[1].end_ms), (4_000, 5_000));
    }

    #[test]
    fn machine_format_round_trips() {
        let r = SimReport {
            scenario: "x".into(),
            seed: 3,
            friend_transcript: FriendTranscript::new(),
            transcript_digest: FriendTranscript::new().digest(),
            wearer_log: vec![],
            led_timeline: vec![],
            metrics: Metrics::default(),
        };
        let text = r.to_machine();
        assert!(text.contains("\"version\": 1"));
        assert_eq!(SimReport::from_machine(&text).unwrap(), r);
        r.check_metrics().unwrap();
    }
}
