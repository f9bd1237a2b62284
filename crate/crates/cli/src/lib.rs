//! Command-line front end: reads grouped data from a manifest, runs the
//! sampler or the screening pipeline, and writes JSON and CSV results.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;

pub use args::Cli;
pub use error::{CliError, Result};

use args::Command;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Screen(a) => commands::screen(a),
        Command::Score(a) => commands::score(a),
    }
}
