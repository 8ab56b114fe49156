//! The `sharecam` command line: simulations, scenario checks, the relay service
//! and headless scripted agents.
//!
//! Exit codes are the contract: 0 ok, 2 validation, 3 IO, 4 bind, 5 connect.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sharecam_core::protocol::{Role, SharingMode};

mod agent;
mod relay;
mod sim;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_BIND: u8 = 4;
pub const EXIT_CONNECT: u8 = 5;

/// Environment variable holding the default relay log directory.
pub const LOG_DIR_ENV: &str = "FRIENDSCOPE_LOG_DIR";

#[derive(Debug, Parser)]
#[command(name = "sharecam", version, about = "Shared-camera sessions: simulator, relay and scripted agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the deterministic simulator.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Check scenario files.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Run or talk to the relay service.
    #[command(subcommand)]
    Relay(RelayCommand),
    /// Headless endpoints that play a script against a live relay.
    #[command(subcommand)]
    Agent(AgentCommand),
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// Simulate a scenario and print its report.
    Run(SimRunArgs),
}

#[derive(Debug, Args)]
pub struct SimRunArgs {
    pub path: PathBuf,
    /// Network seed, replacing the scenario's.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    /// Human-readable; may change between versions.
    Table,
    /// Versioned JSON.
    Machine,
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCommand {
    /// Exit 0 if the scenario is valid, 2 with the first error otherwise.
    Validate {
        path: PathBuf,
        /// Validate an agent script for this role instead of a full scenario.
        #[arg(long, value_parser = parse_endpoint_role)]
        script_role: Option<Role>,
    },
}

#[derive(Debug, Subcommand)]
pub enum RelayCommand {
    /// Serve sessions until interrupted.
    Serve(ServeArgs),
    /// Ask a running relay for a new session and print its id and token.
    CreateSession(CreateSessionArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Address for newline-delimited frames.
    #[arg(long)]
    pub listen: SocketAddr,
    /// Address for the WebSocket bridge at `/ws`.
    #[arg(long)]
    pub http: Option<SocketAddr>,
    /// Static files served next to the bridge.
    #[arg(long, requires = "http")]
    pub console_dir: Option<PathBuf>,
    /// One `<session_id>.fslog` per session.
    #[arg(long, env = LOG_DIR_ENV)]
    pub log_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CreateSessionArgs {
    #[arg(long)]
    pub addr: SocketAddr,
    #[arg(long)]
    pub friend_id: String,
    #[arg(long, default_value_t = SharingMode::Manual)]
    pub mode: SharingMode,
}

#[derive(Debug, Subcommand)]
pub enum AgentCommand {
    /// Attach to a session, play a script and print what was received.
    Attach(AttachArgs),
}

#[derive(Debug, Args)]
pub struct AttachArgs {
    #[arg(long, value_parser = parse_endpoint_role)]
    pub role: Role,
    #[arg(long)]
    pub addr: SocketAddr,
    #[arg(long)]
    pub session_id: String,
    #[arg(long)]
    pub token: String,
    /// Timed events in the scenario grammar, all for `role`.
    #[arg(long)]
    pub script: PathBuf,
    /// How long to keep listening after the last event.
    #[arg(long, default_value_t = 30_000)]
    pub linger_ms: u64,
}

fn parse_endpoint_role(s: &str) -> Result<Role, String> {
    match s.parse::<Role>() {
        Ok(role @ (Role::Wearer | Role::Friend)) => Ok(role),
        _ => Err(format!("expected 'wearer' or 'friend', got '{s}'")),
    }
}

/// A command's failure: what to print on stderr and the exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Sim(SimCommand::Run(args)) => sim::run(&args),
        Command::Scenario(ScenarioCommand::Validate { path, script_role }) => sim::validate(&path, script_role),
        Command::Relay(cmd) => runtime().and_then(|rt| rt.block_on(relay::run(cmd))),
        Command::Agent(AgentCommand::Attach(args)) => runtime().and_then(|rt| rt.block_on(agent::run(&args))),
    };
    match result {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Runtime::new().map_err(|e| Failure::new(EXIT_IO, format!("cannot start runtime: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn console_dir_needs_http() {
        let args = ["sharecam", "relay", "serve", "--listen", "127.0.0.1:0", "--log-dir", "x", "--console-dir", "c"];
        assert!(Cli::try_parse_from(args).is_err());
    }

    #[test]
    fn agents_are_wearers_or_friends() {
        assert!(parse_endpoint_role("relay").is_err());
        assert_eq!(parse_endpoint_role("friend"), Ok(Role::Friend));
    }
}
