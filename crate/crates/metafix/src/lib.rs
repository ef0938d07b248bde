//! Command-line harness around `metafix-core`: fixed-point solvers,
//! scenario simulation and parameter sweeps, with reproducible outputs.
//!
//! Exit codes are a stable contract: 0 success, 1 usage or configuration
//! error, 2 numeric non-convergence.

use std::ffi::OsString;
use std::fmt;
use std::process::ExitCode;

use clap::Parser;

pub mod cli;
pub mod manifest;
pub mod output;
pub mod simulate;
pub mod solve;
pub mod sweep;

pub use cli::Cli;
pub use manifest::RunManifest;

/// Why a command failed, and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, unreadable or invalid inputs.
    Usage(String),
    /// A solver stopped without meeting its tolerance.
    Numeric(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numeric(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<metafix_core::Error> for Failure {
    fn from(e: metafix_core::Error) -> Self {
        use metafix_core::Error as E;
        match e {
            E::NonConvergence { .. } | E::MarkovNonConvergence { .. } | E::Divergence { .. } | E::BudgetExhausted { .. } => {
                Failure::Numeric(e.to_string())
            }
            E::Config(v) => Failure::Usage(format!("invalid configuration:\n  {}", v.join("\n  "))),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Parses `args` (program name first) and runs the selected command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
