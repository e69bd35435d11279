//! `vlsae`: generate pairs, train alignment and concept models, evaluate
//! concepts and apply them to scoring and refinement.
//!
//! Exit codes: 0 success, 2 usage, 3 data or file problem, 4 numerical
//! failure. `VLSAE_THREADS` caps the worker pool.

mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::error::{CliError, CliResult, EXIT_USAGE};

fn init_threads() -> CliResult<()> {
    let Ok(text) = std::env::var("VLSAE_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("VLSAE_THREADS must be a positive integer, got {text:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = init_threads().and_then(|()| commands::run(&cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            eprintln!("vlsae {}: {line}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
