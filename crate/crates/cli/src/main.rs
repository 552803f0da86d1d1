use std::process::ExitCode;

use clap::Parser;
use pgru_core::Error;

mod args;
mod run;

use args::{Cli, Command};

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidInput(_) => 2,
        Error::Io { .. } | Error::Format { .. } | Error::DimensionMismatch(_) => 3,
        Error::Numerical(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => run::synth(a),
        Command::Features(a) => run::features(a),
        Command::Unmix(a) => run::unmix(a),
        Command::Eval(a) => run::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
