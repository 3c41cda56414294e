//! Command-line front end for the quaternion sampling library.

pub mod commands;
pub mod config;
pub mod error;
pub mod verify;

use config::{Cli, Command, RunConfig};
use error::CliError;

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::from_args(&cli.global)?;
    match cli.command {
        Command::Eigensys { dump_eigenfunctions, direct } => {
            commands::eigensys(&cfg, dump_eigenfunctions.as_deref(), direct)
        }
        Command::Reconstruct { input, method, eval_points, modes } => {
            commands::reconstruct(&cfg, &input, method, &eval_points, modes)
        }
        Command::Verify { report, trials } => commands::verify(&cfg, report.as_deref(), trials),
        Command::Concentrate { trials } => commands::concentrate(&cfg, trials),
        Command::Admissibility { trials } => commands::admissibility(&cfg, trials),
        Command::Sample { n_max, degree, eval_points, exact_out } => {
            commands::sample(&cfg, n_max, degree, eval_points.as_deref(), exact_out.as_deref())
        }
    }
}
