mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

fn run(cli: Cli) -> error::Result<()> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Score(a) => commands::score(a),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
        Command::Grid(a) => commands::grid(a),
        Command::Label(a) => commands::label(a),
        Command::Serve(a) => commands::serve(a),
        Command::Dump(a) => commands::dump(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version go to stdout and succeed; everything else is
            // a usage error.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
