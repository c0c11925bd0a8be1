use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match mcms_cli::run(mcms_cli::Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
