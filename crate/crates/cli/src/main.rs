use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = footlab_cli::Cli::parse();
    match footlab_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", footlab_cli::error_line(&e));
            ExitCode::FAILURE
        }
    }
}
