//! Command-line frontend for the `mpsa` library.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod files;

use args::{Cli, Command};
use error::CliResult;

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Generate(a) => commands::generate::run(a),
        Command::Fit(a) => commands::fit::run(a),
        Command::Cluster(a) => commands::cluster::run(a),
        Command::Denoise(a) => commands::denoise::run(a),
        Command::Benchmark(a) => commands::benchmark::run(a),
    }
}
