use std::process::ExitCode;

use clap::Parser;
use tempofuse_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match tempofuse_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
