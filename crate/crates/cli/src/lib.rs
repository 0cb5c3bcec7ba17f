//! Command-line runner: argument handling, report envelopes, and the
//! expected-verdict manifest for the catalog.

pub mod args;
pub mod commands;
pub mod manifest;
pub mod report;

use std::ffi::OsString;

use clap::Parser;
use thiserror::Error;

pub use args::{Cli, Command, Format, RunConfig};
pub use report::{Check, ReportEnvelope, Table};

/// All checks met their expected verdicts.
pub const EXIT_OK: i32 = 0;
/// At least one check diverged from its expected verdict.
pub const EXIT_UNEXPECTED: i32 = 1;
/// Bad arguments, unloadable input, or a failed evaluation.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot load model: {0}")]
    Load(String),
    #[error("{0}")]
    Run(String),
    #[error("output: {0}")]
    Output(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Runs a parsed command and returns the report; does not write it.
pub fn execute(cli: &Cli) -> Result<(ReportEnvelope, Format, Option<std::path::PathBuf>), CliError> {
    let (report, common) = match &cli.command {
        Command::Audit(a) => (commands::audit::run(a)?, &a.common),
        Command::Geometry(g) => (commands::geometry::run(g)?, &g.common),
        Command::Singularity(s) => (commands::singularity::run(s)?, &s.common),
    };
    Ok((report, common.format, common.out.clone()))
}

/// Parses `args`, runs, writes the report, and returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = execute(&cli).and_then(|(report, format, out)| {
        report.write(format, out.as_deref())?;
        Ok(report.exit_status)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("norm-audit: {e}");
            EXIT_USAGE
        }
    }
}
