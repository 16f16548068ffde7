//! `regscore` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (unreadable input,
//! schema mismatch, failed verification), 3 solver budget exhausted.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] regscore::Error),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Budget(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) if e.is_budget() => 3,
            CliError::Lib(_) | CliError::Data(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("regscore: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
