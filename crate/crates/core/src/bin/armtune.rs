use std::process::ExitCode;

use armtune::cli::{self, Cli, EXIT_ERROR};
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap's own usage-error code (2) would collide with "diverged".
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    ExitCode::from(cli::run(&cli))
}
