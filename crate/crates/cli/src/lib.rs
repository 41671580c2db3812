pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod protocol_file;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

use args::{Cli, Command};
pub use error::CliError;

fn dispatch(cli: &Cli) -> Result<(String, i32), CliError> {
    Ok(match &cli.command {
        Command::Optimal(a) => (commands::optimal(a)?, 0),
        Command::FreeFinal(a) => (commands::free_final(a)?, 0),
        Command::SpeedLimit(a) => (commands::speed_limit(a)?, 0),
        Command::ErasureSweep(a) => {
            let (csv, any_ok) = commands::erasure_sweep(a)?;
            let shown = if a.out.is_some() { String::new() } else { csv };
            (shown, if any_ok { 0 } else { 1 })
        }
        Command::Simulate(a) => (commands::simulate(a)?, 0),
        Command::Oracle(a) => (commands::oracle(a)?, 0),
    })
}

/// Run the CLI on `argv` (including the program name) and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let merged = match config::merge(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(merged) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        pool = pool.num_threads(jobs.max(1));
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(&cli)),
        Err(e) => Err(CliError::usage(format!("cannot start worker pool: {e}"))),
    };
    match result {
        Ok((out, code)) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.as_bytes());
            code
        }
        Err(e) => {
            if let CliError::Core(thermoctl_core::Error::InfeasibleDuration { tau_min, .. }) = &e {
                eprintln!("error: {e}\ntau_min = {tau_min}");
            } else {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}
