use std::process::ExitCode;

use clap::Parser;

use apollon::cli::{configure_threads, emit, execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let arguments: Vec<String> = std::env::args().skip(2).collect();
    let result = configure_threads().and_then(|_| execute(cli.command, arguments));
    match result {
        Ok(outcome) => {
            if let Err(e) = emit(&outcome) {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(1);
            }
            if outcome.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
