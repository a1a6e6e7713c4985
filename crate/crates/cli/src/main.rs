mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use output::{read_manifest, write_all, CliResult};

fn execute(cli: &Cli) -> CliResult<()> {
    let command = match &cli.command {
        Command::Replay(r) => read_manifest(&r.manifest)?.parameters,
        other => other.clone(),
    };
    let output = commands::run(&command)?;
    let written = write_all(&cli.out, &output.artifacts)?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
