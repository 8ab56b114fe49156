//! Deterministic simulation: scenarios, a seeded network, the discrete-event engine,
//! and the tick-level reference interpreter it is checked against.

mod engine;
pub mod fuzz;
mod metrics;
mod network;
mod reference;
mod report;
mod scenario;

pub use engine::{run_observed, run_scenario, SIM_FRIEND_ID, SIM_SESSION_ID};
pub use metrics::{compute_metrics, IntegrityError, Metrics};
pub use network::{LinkDirection, LinkModel, Network, NetworkModel};
pub use reference::reference_run;
pub use report::{led_timeline, SimReport, REPORT_FORMAT_NAME, REPORT_FORMAT_VERSION};
pub use scenario::{
    load_scenario, load_script, parse_scenario, parse_script, Action, Actor, Scenario, ScenarioError, ScenarioEvent,
};
