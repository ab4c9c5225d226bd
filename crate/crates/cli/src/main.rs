//! Experiment driver for the integral-boundary-condition finite-element
//! library.
//!
//! Exit codes: 0 when every requested solve met its residual contract,
//! 1 when a solve missed it (or the run failed), 2 for usage and
//! configuration errors.

mod config;
mod expr;
mod pool;
mod run;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = config::Cli::parse();
    let (kind, args) = cli.command.split();

    let experiment = match config::resolve(kind, args) {
        Ok(experiment) => experiment,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    };

    match run::run(&experiment) {
        Ok(outcome) if outcome.contracts_met => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("one or more solves missed their residual target");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
