//! Command-line front end for the `issvd` library: simulation, fitting,
//! evaluation and Monte-Carlo benchmarking.

pub mod args;
pub mod benchmark;
pub mod commands;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

pub use args::Cli;

/// Exit status for malformed flags or unreadable input.
pub const EXIT_INPUT: u8 = 2;
/// Exit status when the data admit no numerically meaningful fit.
pub const EXIT_NUMERICAL: u8 = 3;

/// A command failure tagged with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_INPUT, error: error.into() }
    }
}

impl From<issvd::Error> for Failure {
    fn from(e: issvd::Error) -> Self {
        let code = match e {
            issvd::Error::Degenerate(_) => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        Self { code, error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self::input(error)
    }
}

pub type CmdResult = Result<(), Failure>;

fn configure_threads(threads: Option<usize>) -> CmdResult {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Failure::input(anyhow::anyhow!("thread count must be positive")));
    }
    // A pool may already exist when called twice in one process, as in tests.
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("global thread pool already initialised");
    }
    Ok(())
}

/// Parses `args` and runs the selected command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let outcome = configure_threads(cli.threads).and_then(|()| commands::dispatch(cli.command));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
