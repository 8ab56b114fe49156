//! Scenario files: TOML with a name, optional parameter and network overrides, and a
//! time-ordered `[[events]]` list.
//!
//! ```toml
//! name = "auto_timeout"
//! initial_mode = "auto"
//!
//! [[events]]
//! at_ms = 0
//! actor = "wearer"
//! action = "start_session"
//!
//! [[events]]
//! at_ms = 0
//! actor = "friend"
//! action = "command"
//! text = "T"
//! ```
//!
//! Headless agent scripts use the same `[[events]]` grammar without the other tables.

use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

use super::network::NetworkModel;
use crate::protocol::{Gesture, ProtocolParams, Role, SharingMode, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Wearer,
    Friend,
}

impl Actor {
    pub fn role(self) -> Role {
        match self {
            Actor::Wearer => Role::Wearer,
            Actor::Friend => Role::Friend,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action")]
pub enum Action {
    /// `mode: None` starts in the scenario's initial mode.
    StartSession { mode: Option<SharingMode> },
    Gesture { gesture: Gesture },
    SetMode { mode: SharingMode },
    EndSession,
    /// Text typed by the Friend, sent verbatim.
    Command { text: String },
}

impl Action {
    pub fn actor(&self) -> Actor {
        match self {
            Action::Command { .. } => Actor::Friend,
            _ => Actor::Wearer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub at_ms: Timestamp,
    pub action: Action,
}

impl ScenarioEvent {
    pub fn actor(&self) -> Actor {
        self.action.actor()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub params: ProtocolParams,
    pub network: NetworkModel,
    pub initial_mode: SharingMode,
    pub events: Vec<ScenarioEvent>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, initial_mode: SharingMode) -> Self {
        Self {
            name: name.into(),
            params: ProtocolParams::default(),
            network: NetworkModel::default(),
            initial_mode,
            events: Vec::new(),
        }
    }

    pub fn event(mut self, at_ms: Timestamp, action: Action) -> Self {
        self.events.push(ScenarioEvent { at_ms, action });
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.network.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |message: String| ScenarioError::Invalid { line: None, message };
        self.params.validate().map_err(|e| invalid(format!("params: {e}")))?;
        self.network.validate().map_err(|m| invalid(format!("network: {m}")))?;
        if self.events.windows(2).any(|w| w[1].at_ms < w[0].at_ms) {
            return Err(invalid("events not sorted".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{}{message}", LinePrefix(*line))]
    Syntax { line: Option<usize>, message: String },
    #[error("{}{message}", LinePrefix(*line))]
    Invalid { line: Option<usize>, message: String },
}

impl ScenarioError {
    pub fn is_io(&self) -> bool {
        matches!(self, ScenarioError::Io { .. })
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ScenarioError::Io { .. } => None,
            ScenarioError::Syntax { line, .. } | ScenarioError::Invalid { line, .. } => *line,
        }
    }
}

struct LinePrefix(Option<usize>);

impl fmt::Display for LinePrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(line) => write!(f, "line {line}: "),
            None => Ok(()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    initial_mode: Option<Spanned<String>>,
    #[serde(default)]
    params: Option<Spanned<ProtocolParams>>,
    #[serde(default)]
    network: Option<Spanned<NetworkModel>>,
    #[serde(default)]
    events: Vec<Spanned<RawEvent>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    #[serde(default)]
    events: Vec<Spanned<RawEvent>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    at_ms: i64,
    actor: String,
    action: String,
    text: Option<String>,
    gesture: Option<String>,
    mode: Option<String>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    parse_scenario(&read(path.as_ref())?)
}

pub fn parse_scenario(src: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = toml::from_str(src).map_err(|e| syntax(src, &e))?;
    let initial_mode = match raw.initial_mode {
        Some(m) => parse_mode(m.as_ref()).map_err(|msg| invalid_at(src, m.span(), msg))?,
        None => SharingMode::Manual,
    };
    let params = match raw.params {
        Some(p) => {
            p.as_ref().validate().map_err(|e| invalid_at(src, p.span(), format!("params: {e}")))?;
            p.into_inner()
        }
        None => ProtocolParams::default(),
    };
    let network = match raw.network {
        Some(n) => {
            n.as_ref().validate().map_err(|m| invalid_at(src, n.span(), format!("network: {m}")))?;
            n.into_inner()
        }
        None => NetworkModel::default(),
    };
    let events = convert_events(src, raw.events)?;
    Ok(Scenario { name: raw.name, params, network, initial_mode, events })
}

/// Loads an agent script. Every event must belong to `actor`.
pub fn load_script(path: impl AsRef<Path>, actor: Actor) -> Result<Vec<ScenarioEvent>, ScenarioError> {
    parse_script(&read(path.as_ref())?, actor)
}

pub fn parse_script(src: &str, actor: Actor) -> Result<Vec<ScenarioEvent>, ScenarioError> {
    let raw: RawScript = toml::from_str(src).map_err(|e| syntax(src, &e))?;
    let spans: Vec<Range<usize>> = raw.events.iter().map(Spanned::span).collect();
    let events = convert_events(src, raw.events)?;
    for (ev, span) in events.iter().zip(spans) {
        if ev.actor() != actor {
            return Err(invalid_at(
                src,
                span,
                format!("event for {} in a {} script", role_name(ev.actor()), role_name(actor)),
            ));
        }
    }
    Ok(events)
}

fn role_name(actor: Actor) -> &'static str {
    actor.role().as_str()
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
}

fn convert_events(src: &str, raw: Vec<Spanned<RawEvent>>) -> Result<Vec<ScenarioEvent>, ScenarioError> {
    let mut events: Vec<ScenarioEvent> = Vec::with_capacity(raw.len());
    for spanned in raw {
        let span = spanned.span();
        let ev = convert_event(spanned.as_ref()).map_err(|msg| invalid_at(src, span.clone(), msg))?;
        if events.last().is_some_and(|prev| ev.at_ms < prev.at_ms) {
            return Err(invalid_at(src, span, "events not sorted".into()));
        }
        events.push(ev);
    }
    Ok(events)
}

fn convert_event(raw: &RawEvent) -> Result<ScenarioEvent, String> {
    let at_ms = u64::try_from(raw.at_ms).map_err(|_| format!("at_ms must be non-negative, got {}", raw.at_ms))?;
    let actor = match raw.actor.as_str() {
        "wearer" => Actor::Wearer,
        "friend" => Actor::Friend,
        other => return Err(format!("unknown actor '{other}'")),
    };
    let known_wearer = ["start_session", "gesture", "set_mode", "end_session"];
    let known_friend = ["command"];
    let action = raw.action.as_str();
    let valid_for_actor = match actor {
        Actor::Wearer => known_wearer.contains(&action),
        Actor::Friend => known_friend.contains(&action),
    };
    if !valid_for_actor {
        return Err(if known_wearer.contains(&action) || known_friend.contains(&action) {
            format!("actor/action mismatch: {} cannot {action}", raw.actor)
        } else {
            format!("unknown action '{action}'")
        });
    }
    let allowed: &[&str] = match action {
        "start_session" | "set_mode" => &["mode"],
        "gesture" => &["gesture"],
        "command" => &["text"],
        _ => &[],
    };
    for (field, present) in [("text", raw.text.is_some()), ("gesture", raw.gesture.is_some()), ("mode", raw.mode.is_some())]
    {
        if present && !allowed.contains(&field) {
            return Err(format!("field '{field}' is not allowed for action {action}"));
        }
    }
    let action = match action {
        "start_session" => Action::StartSession { mode: raw.mode.as_deref().map(parse_mode).transpose()? },
        "set_mode" => {
            let mode = raw.mode.as_deref().ok_or("set_mode requires 'mode'")?;
            Action::SetMode { mode: parse_mode(mode)? }
        }
        "gesture" => {
            let g = raw.gesture.as_deref().ok_or("gesture requires 'gesture'")?;
            Action::Gesture { gesture: g.parse()? }
        }
        "end_session" => Action::EndSession,
        "command" => Action::Command { text: raw.text.clone().ok_or("command requires 'text'")? },
        _ => unreachable!("action validated above"),
    };
    Ok(ScenarioEvent { at_ms, action })
}

fn parse_mode(s: &str) -> Result<SharingMode, String> {
    s.parse()
}

fn line_of(src: &str, offset: usize) -> usize {
    src.as_bytes()[..offset.min(src.len())].iter().filter(|&&b| b == b'\n').count() + 1
}

fn syntax(src: &str, e: &toml::de::Error) -> ScenarioError {
    ScenarioError::Syntax { line: e.span().map(|s| line_of(src, s.start)), message: e.message().to_owned() }
}

fn invalid_at(src: &str, span: Range<usize>, message: String) -> ScenarioError {
    ScenarioError::Invalid { line: Some(line_of(src, span.start)), message }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_uses_defaults() {
        let s = parse_scenario("name = \"empty\"\n").unwrap();
        assert_eq!(s.name, "empty");
        assert!(s.events.is_empty());
        assert_eq!(s.params, ProtocolParams::default());
        assert_eq!(s.network, NetworkModel::default());
        assert_eq!(s.initial_mode, SharingMode::Manual);
    }

    #[test]
    fn full_file() {
        let src = r#"
name = "x"
initial_mode = "auto"

[params]
hold_ms = 5000

[network]
seed = 9
to_friend = { base_latency_ms = 20, jitter_ms = 5, drop_prob = 0.1 }

[[events]]
at_ms = 0
actor = "wearer"
action = "start_session"

[[events]]
at_ms = 10
actor = "friend"
action = "command"
text = "T"

[[events]]
at_ms = 20
actor = "wearer"
action = "gesture"
gesture = "press_hold"

[[events]]
at_ms = 30
actor = "wearer"
action = "set_mode"
mode = "off"
"#;
        let s = parse_scenario(src).unwrap();
        assert_eq!(s.initial_mode, SharingMode::Auto);
        assert_eq!(s.params.hold_ms, 5000);
        assert_eq!(s.params.video_tx_ms, 5000);
        assert_eq!(s.network.seed, 9);
        assert_eq!(s.network.to_friend.base_latency_ms, 20);
        assert_eq!(s.network.to_wearer.base_latency_ms, 0);
        assert_eq!(
            s.events.iter().map(|e| e.action.clone()).collect::<Vec<_>>(),
            vec![
                Action::StartSession { mode: None },
                Action::Command { text: "T".into() },
                Action::Gesture { gesture: Gesture::PressHold },
                Action::SetMode { mode: SharingMode::Off },
            ]
        );
    }

    fn err(src: &str) -> ScenarioError {
        parse_scenario(src).unwrap_err()
    }

    #[test]
    fn unsorted_events() {
        let e = err("name = \"u\"\n[[events]]\nat_ms = 5\nactor = \"wearer\"\naction = \"end_session\"\n[[events]]\nat_ms = 1\nactor = \"wearer\"\naction = \"end_session\"\n");
        assert!(e.to_string().contains("events not sorted"), "{e}");
        assert_eq!(e.line(), Some(6));
    }

    #[test]
    fn actor_action_mismatch() {
        let e = err("name = \"m\"\n[[events]]\nat_ms = 0\nactor = \"friend\"\naction = \"gesture\"\ngesture = \"press\"\n");
        assert!(e.to_string().contains("actor/action mismatch"), "{e}");
        let e = err("name = \"m\"\n[[events]]\nat_ms = 0\nactor = \"wearer\"\naction = \"command\"\ntext = \"T\"\n");
        assert!(e.to_string().contains("actor/action mismatch"), "{e}");
    }

    #[test]
    fn rejects_bad_values() {
        for (src, needle) in [
            ("name = \"n\"\n[[events]]\nat_ms = -1\nactor = \"wearer\"\naction = \"end_session\"\n", "non-negative"),
            ("name = \"n\"\n[[events]]\nat_ms = 0\nactor = \"dog\"\naction = \"end_session\"\n", "unknown actor"),
            ("name = \"n\"\n[[events]]\nat_ms = 0\nactor = \"wearer\"\naction = \"fly\"\n", "unknown action"),
            ("name = \"n\"\n[[events]]\nat_ms = 0\nactor = \"wearer\"\naction = \"gesture\"\ngesture = \"wave\"\n", "wave"),
            ("name = \"n\"\n[[events]]\nat_ms = 0\nactor = \"wearer\"\naction = \"set_mode\"\n", "requires 'mode'"),
            ("name = \"n\"\n[[events]]\nat_ms = 0\nactor = \"wearer\"\naction = \"end_session\"\ntext = \"x\"\n", "not allowed"),
            ("name = \"n\"\ninitial_mode = \"sometimes\"\n", "sometimes"),
            ("name = \"n\"\n[params]\nhold_ms = 0\n", "hold_ms"),
            ("name = \"n\"\n[network]\nto_wearer = { drop_prob = 1.5 }\n", "drop_prob"),
        ] {
            let e = err(src);
            assert!(matches!(e, ScenarioError::Invalid { line: Some(_), .. }), "{src}: {e:?}");
            assert!(e.to_string().contains(needle), "{src}: {e}");
        }
    }

    #[test]
    fn syntax_errors_carry_line() {
        let e = err("name = \"n\"\n\n[[events]]\nat_ms = \"soon\"\nactor = \"wearer\"\naction = \"end_session\"\n");
        assert!(matches!(e, ScenarioError::Syntax { .. }), "{e:?}");
        assert_eq!(e.line(), Some(4));
        assert!(matches!(err("name = \n"), ScenarioError::Syntax { line: Some(1), .. }));
        assert!(matches!(err("title = \"x\"\n"), ScenarioError::Syntax { .. }));
    }

    #[test]
    fn script_filters_role() {
        let src = "[[events]]\nat_ms = 0\nactor = \"friend\"\naction = \"command\"\ntext = \"T\"\n";
        assert_eq!(parse_script(src, Actor::Friend).unwrap().len(), 1);
        let e = parse_script(src, Actor::Wearer).unwrap_err();
        assert!(e.to_string().contains("friend"), "{e}");
    }

    #[test]
    fn missing_file_is_io() {
        assert!(load_scenario("/nonexistent/nothing.scn").unwrap_err().is_io());
    }
}
