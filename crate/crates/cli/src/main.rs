//! `vnet`: command-line pipeline around the tensor-learning library.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or configuration error,
//! 3 numerical failure (non-convergence, gradient mismatch, non-finite
//! values).

mod args;
mod commands;
mod config;
mod data;
mod manifest;

use clap::Parser;
use std::process::ExitCode;
use vnet_core::Error;

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Numerical failures are distinguished from data problems so scripted
/// pipelines can retry or escalate appropriately.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NonConvergence { .. } | Error::Numerical(_) | Error::NonFinite(_) => 3,
        _ => 2,
    }
}
