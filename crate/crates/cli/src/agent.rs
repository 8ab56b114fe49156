use std::time::Duration;

use sharecam_core::sim::load_script;
use sharecam_relay::agent::{run_agent, AgentConfig};
use sharecam_relay::client::Client;

use crate::relay::connect_failure;
use crate::sim::{actor, scenario_failure};
use crate::{AttachArgs, Failure};

pub(crate) async fn run(args: &AttachArgs) -> Result<(), Failure> {
    let events = load_script(&args.script, actor(args.role)).map_err(scenario_failure)?;
    let cfg = AgentConfig {
        role: args.role,
        session_id: args.session_id.clone(),
        token: args.token.clone(),
        events,
        linger: Duration::from_millis(args.linger_ms),
    };
    let mut client = Client::connect(args.addr).await.map_err(|e| connect_failure(args.addr, e.into()))?;
    let outcome = run_agent(&mut client, &cfg).await.map_err(|e| connect_failure(args.addr, e))?;
    print!("{}", outcome.render());
    Ok(())
}
