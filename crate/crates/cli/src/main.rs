mod cli;
mod commands;
mod config;
mod suite;

use std::process::ExitCode;

use clap::Parser;

use crate::cli::Cli;
use crate::config::CliError;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("UNRECT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version go to stdout and are not errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<CliError>() {
                Some(CliError::Failed(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
