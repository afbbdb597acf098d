//! `reluwrap`: file-based pipeline over the core library.
//!
//! Exit codes: 0 success, 2 input error, 3 numeric failure, 4 infeasible
//! configuration.

mod args;
mod artifacts;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use reluwrap_core::{Error, ErrorKind};

use crate::args::{Cli, Command};

fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Input => 2,
        ErrorKind::Numeric => 3,
        ErrorKind::Infeasible => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Unwrap(a) => commands::unwrap_cmd(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Merge(a) => commands::merge(a),
        Command::Flatten(a) => commands::flatten_cmd(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
