use std::process::ExitCode;

use airpid_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("airpid: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
