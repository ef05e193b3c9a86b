//! The `pacroute` command line: score, split, calibrate, route, evaluate,
//! label and simulate.
//!
//! Exit codes: 0 success, 1 failed simulation assertion, 2 infeasible
//! budget (the policy is still written), 3 endpoint failure, 4 bad
//! configuration or input.

pub mod args;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod report;

pub use args::{Cli, Command};
pub use error::{CliError, FailureKind, Status};
pub use manifest::RunManifest;
pub use report::RunReport;

/// Runs a parsed command line, writing tables and summaries to `out`.
pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> Result<Status, CliError> {
    commands::dispatch(&cli.command, out)
}
