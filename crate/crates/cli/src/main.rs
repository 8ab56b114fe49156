use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    sharecam_cli::run(sharecam_cli::Cli::parse())
}
