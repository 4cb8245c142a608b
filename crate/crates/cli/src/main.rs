use std::process::ExitCode;

use clap::Parser;
use mbeseg_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(out) => {
            if !cli.quiet || matches!(cli.command, mbeseg_cli::Command::Metrics { .. }) {
                print!("{out}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
