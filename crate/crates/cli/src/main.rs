//! `fdp`: guarantees, audits, curve comparison and mechanism simulation.
//!
//! Exit status: 0 on success (an audit violation is a result, not an error),
//! 2 for invalid input, 3 for numerical failures, 4 for I/O and audit
//! infrastructure failures.

mod args;
mod commands;
mod error;
mod spec;

use args::{Cli, Command, OutputArgs};
use clap::Parser;
use error::CliError;
use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

fn emit(out: &OutputArgs, text: &str) -> Result<(), CliError> {
    let res = match &out.output {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(|e| format!("cannot write output: {e}")),
    };
    res.map_err(CliError::infra)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::infra(format!("cannot start thread pool: {e}")))?;
    }
    let start = Instant::now();
    let (out, rendered) = match &cli.command {
        Command::Guarantee(a) => (&a.out, commands::guarantee(a)?),
        Command::Audit(a) => (&a.out, commands::audit(a)?),
        Command::Compare(a) => (&a.out, commands::compare(a)?),
        Command::Simulate(a) => (&a.out, commands::simulate(a)?),
    };
    if cli.verbose > 0 {
        eprintln!("resolved config: {}", rendered.config);
    }
    emit(out, &rendered.text)?;
    if cli.verbose > 0 {
        eprintln!("done in {:.2}s", start.elapsed().as_secs_f64());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
