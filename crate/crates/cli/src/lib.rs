//! Command-line driver: trajectory I/O, detection runs, summaries and
//! simulation studies, with a reproducibility manifest next to every output.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors. The
//! `CPLASS_THREADS` environment variable bounds the worker pool; outputs do
//! not depend on it.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;

use std::ffi::OsString;

use clap::Parser;

pub use error::{CliError, Result};

pub const THREADS_VAR: &str = "CPLASS_THREADS";

fn thread_count(value: Option<String>) -> Result<Option<usize>> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got {v:?}"))),
        },
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match args::Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let ctx = commands::Context { args: argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect() };
    let outcome = thread_count(std::env::var(THREADS_VAR).ok()).and_then(|threads| match threads {
        None => commands::execute(cli.command, &ctx),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?
            .install(|| commands::execute(cli.command, &ctx)),
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
