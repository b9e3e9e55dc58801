//! `roundtrip` command-line tool.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or I/O error.

mod args;
mod commands;

use std::fs;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(roundtrip::Error),
}

impl From<roundtrip::Error> for CliError {
    fn from(e: roundtrip::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn run() -> Result<(), CliError> {
    let argv = args::merge_config(std::env::args_os().collect())?;
    let matches = Cli::command()
        .args_override_self(true)
        .try_get_matches_from(argv)
        .unwrap_or_else(|e| e.exit());
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());

    let out = &cli.command.common().out;
    fs::create_dir_all(out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out.display())))?;
    fs::write(out.join("resolved_config.txt"), args::resolved_config(&matches))
        .map_err(|e| CliError::Usage(format!("cannot write to {}: {e}", out.display())))?;

    match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Train(a) => commands::train(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Grid(a) => commands::grid(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Outlier(a) => commands::outlier(a),
        Command::Kde(a) => commands::kde(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
