mod args;
mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};
use commands::Context;
use error::{CliError, EXIT_USAGE};

enum ParseFailure {
    Clap(clap::Error),
    Config(CliError),
}

impl From<clap::Error> for ParseFailure {
    fn from(e: clap::Error) -> Self {
        Self::Clap(e)
    }
}

/// Parses twice: once to find the config file, once more with its values
/// appended.
fn parse(argv: Vec<OsString>) -> Result<Cli, ParseFailure> {
    let root = Cli::command();
    let first = root.clone().try_get_matches_from(&argv)?;
    let argv = config::merge_config(&root, argv, &first).map_err(ParseFailure::Config)?;
    let matches = root.try_get_matches_from(argv)?;
    Ok(Cli::from_arg_matches(&matches)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", cli.threads)))?;
    let ctx = Context { seed: cli.seed, pool };
    match &cli.command {
        Command::Propose(a) => commands::propose(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Bench(a) => commands::bench(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Viz(a) => commands::viz(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(ParseFailure::Clap(e)) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE as u8),
            };
        }
        Err(ParseFailure::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
