//! `exitcal` command-line front end: validate, simulate, grid, refine, report.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;

use std::io::Write;

use clap::Parser;

pub use args::Cli;
pub use error::{CliError, Result};

pub fn run(cli: Cli, argv: &[String], out: &mut dyn Write) -> Result<()> {
    use args::Command;
    match cli.command {
        Command::Validate { data } => commands::validate::run(&data, out),
        Command::Simulate(a) => commands::simulate::run(&a, argv, out),
        Command::Grid(a) => commands::grid::run(&a, argv, out),
        Command::Refine(a) => commands::refine::run(&a, argv, out),
        Command::Report(a) => commands::report::run(&a, out),
    }
}

/// Parses `argv`, runs the command, and returns the process exit code.
pub fn main_with<W: Write, E: Write>(argv: Vec<String>, out: &mut W, err: &mut E) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match run(cli, &argv, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "exitcal: {e}");
            e.exit_code()
        }
    }
}
