use std::process::ExitCode;

use clap::Parser;
use evpo::cli::{run, Cli};

fn try_main() -> anyhow::Result<bool> {
    Ok(run(Cli::parse())?)
}

fn main() -> ExitCode {
    match try_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
