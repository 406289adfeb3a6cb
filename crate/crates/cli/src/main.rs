//! `ddimpl`: implementability checks and canonical controller synthesis from data.
//!
//! Exit codes: 0 success / implementable, 1 definite negative, 2 usage or input error.
//! JSON reports go to stdout, diagnostics to stderr.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Status;
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "ddimpl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a model with seeded uniform inputs and write a trajectory CSV.
    Simulate(RunConfig),
    /// Decide implementability of a reference from plant and reference data.
    Check(RunConfig),
    /// Synthesize the canonical controller basis and verify the closed loop.
    Synth(RunConfig),
    /// Run seeded random agreement and closed-loop experiments.
    Proptest(RunConfig),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Usage as u8 } else { 0 });
        }
    };
    let (run, cfg): (fn(&RunConfig) -> commands::Outcome, RunConfig) = match cli.command {
        Command::Simulate(c) => (commands::simulate, c),
        Command::Check(c) => (commands::check, c),
        Command::Synth(c) => (commands::synth, c),
        Command::Proptest(c) => (commands::proptest, c),
    };
    let status = cfg.checked().and_then(|cfg| run(&cfg)).unwrap_or_else(|msg| {
        eprintln!("error: {msg}");
        Status::Usage
    });
    ExitCode::from(status as u8)
}
