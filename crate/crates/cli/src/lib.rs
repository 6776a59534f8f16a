//! Command-line front end for the `cvqkd` analysis library.
//!
//! [`run`] drives everything; the binary is a thin wrapper so tests can call
//! it with captured output streams.

pub mod commands;
pub mod config;
pub mod csv;

use std::ffi::OsString;
use std::fs;
use std::io::Write;

use clap::Parser;
use thiserror::Error;

use crate::commands::CommandOutput;
use crate::config::{Cli, Command, RunConfig};
use crate::csv::render_tables;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INSECURE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] cvqkd::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    match execute(&cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INVALID
        }
    }
}

fn execute(command: &Command, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(command.args())?;
    let output = match command {
        Command::Keyrate(_) => commands::cmd_keyrate(&cfg)?,
        Command::SweepDistance(_) => commands::cmd_sweep_distance(&cfg)?,
        Command::GridT(_) => commands::cmd_grid_t(&cfg)?,
        Command::FiniteSize(_) => commands::cmd_finite_size(&cfg)?,
    };
    emit(&cfg, &output, stdout)?;
    Ok(output.exit_code)
}

fn emit(cfg: &RunConfig, output: &CommandOutput, stdout: &mut dyn Write) -> Result<(), CliError> {
    let csv = render_tables(&output.tables);
    let io_err = |path: String| move |source| CliError::Io { path, source };
    match &cfg.out {
        Some(path) => {
            fs::write(path, &csv).map_err(io_err(path.display().to_string()))?;
            writeln!(stdout, "{}", output.summary).map_err(io_err("stdout".into()))?;
        }
        None => {
            write!(stdout, "{csv}").map_err(io_err("stdout".into()))?;
            writeln!(stdout, "# {}", output.summary).map_err(io_err("stdout".into()))?;
        }
    }
    Ok(())
}
