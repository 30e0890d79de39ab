//! Command-line driver for the `rho1d` toolkit.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::io::Write;

pub use config::{Cli, Command, Mode, RunArgs, RunConfig};
pub use error::CliError;

/// Runs a parsed command line and returns the process exit code. Errors
/// are reported on `stderr`.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Solve(args) => RunConfig::from_args(args, Mode::Solve)
            .and_then(|cfg| commands::cmd_solve(&cfg, stdout).map(drop)),
        Command::Family(args) => RunConfig::from_args(args, Mode::Family)
            .and_then(|cfg| commands::cmd_family(&cfg, stdout).map(drop)),
        Command::Table1(args) => RunConfig::from_args(args, Mode::Table1)
            .and_then(|cfg| commands::cmd_table1(&cfg, stdout).map(drop)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "rho1d: {e}");
            e.exit_code()
        }
    }
}
