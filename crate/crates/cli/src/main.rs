mod args;
mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, Format};
use config::{resolve_seed, RunConfig};
use error::{CliError, EXIT_CONFIG};

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("{}", serde_json::to_string(&e.to_json()).expect("errors serialize"));
            ExitCode::from(e.exit)
        }
    }
}

fn run() -> Result<(), CliError> {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            return Err(CliError {
                code: "usage",
                message: first,
                context: Default::default(),
                exit: EXIT_CONFIG,
            }
            .with("kind", format!("{:?}", e.kind()))
            .with("usage", message));
        }
    };
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let seed = resolve_seed(cli.seed, file.seed)?;
    let format = cli.format.or(file.output_format).unwrap_or(Format::Table);
    let outcome = match &cli.command {
        Command::Solve(a) => commands::solve(a, &file)?,
        Command::Verify(a) => commands::verify(a, &file, seed)?,
        Command::Reconstruct(a) => commands::reconstruct(a, &file)?,
        Command::Geodesic(a) => commands::geodesic(a, &file)?,
    };
    let stdout = std::io::stdout();
    output::render(&outcome.output, format, &mut stdout.lock())?;
    match outcome.breach {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
