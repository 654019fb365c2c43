//! Command-line front end: argument parsing, file formats and the six
//! subcommands.

pub mod args;
pub mod commands;
pub mod data;
pub mod error;
pub mod table;
pub mod validate;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult};

/// Runs one parsed invocation and returns what should go to stdout.
pub fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::BiasCurve(a) => commands::bias_curve(&a, "bias-curve"),
        Command::Figure1Data(g) => commands::figure1(&g),
        Command::Minimax(a) => commands::minimax(&a),
        Command::Table1(a) => commands::table1(&a),
        Command::Audit(a) => commands::audit(&a),
        Command::Validate(a) => validate::validate(&a),
    }
}
