use std::path::Path;

use sharecam_core::protocol::Role;
use sharecam_core::sim::{load_scenario, load_script, run_scenario, Actor, ScenarioError};

use crate::{Failure, OutputFormat, SimRunArgs, EXIT_IO, EXIT_VALIDATION};

pub(crate) fn run(args: &SimRunArgs) -> Result<(), Failure> {
    let mut scenario = load_scenario(&args.path).map_err(scenario_failure)?;
    if let Some(seed) = args.seed {
        scenario = scenario.with_seed(seed);
    }
    scenario.validate().map_err(scenario_failure)?;
    let report = run_scenario(&scenario);
    match args.format {
        OutputFormat::Table => print!("{}", report.render_table()),
        OutputFormat::Machine => print!("{}", report.to_machine()),
    }
    Ok(())
}

pub(crate) fn validate(path: &Path, script_role: Option<Role>) -> Result<(), Failure> {
    let events = match script_role {
        None => {
            let scenario = load_scenario(path).map_err(scenario_failure)?;
            scenario.validate().map_err(scenario_failure)?;
            scenario.events.len()
        }
        Some(role) => load_script(path, actor(role)).map_err(scenario_failure)?.len(),
    };
    println!("{}: ok, {events} events", path.display());
    Ok(())
}

pub(crate) fn actor(role: Role) -> Actor {
    match role {
        Role::Friend => Actor::Friend,
        _ => Actor::Wearer,
    }
}

pub(crate) fn scenario_failure(e: ScenarioError) -> Failure {
    let code = if e.is_io() { EXIT_IO } else { EXIT_VALIDATION };
    Failure::new(code, e.to_string())
}
