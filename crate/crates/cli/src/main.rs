//! `qgpart` command-line tool.
//!
//! Exit status is 0 on success, 1 for invalid input or usage, and 2 when a
//! numerical routine fails.

mod commands;
mod io;
mod options;

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use options::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(qgpart::Error),
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Prefixes the message with the file it concerns.
    pub fn in_file(self, path: &Path) -> Self {
        CliError::Usage(format!("{}: {self}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(qgpart::Error::Numerical(_)) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{path}: {source}"),
        }
    }
}

impl From<qgpart::Error> for CliError {
    fn from(e: qgpart::Error) -> Self {
        CliError::Core(e)
    }
}

fn run(command: &Command) -> Result<(), CliError> {
    let flags = command.flags().resolve()?;
    let text = match command {
        Command::Fit(_) => commands::fit_cmd(&flags)?,
        Command::Classify(_) => commands::classify_cmd(&flags)?,
        Command::Risk(_) => commands::risk_cmd(&flags)?,
        Command::GridLp(_) => commands::grid_lp_cmd(&flags)?,
        Command::Simulate(_) => commands::simulate_cmd(&flags)?,
        Command::Recovery(_) => commands::recovery_cmd(&flags)?,
        Command::PolarTest(_) => commands::polar_test_cmd(&flags)?,
    };
    io::write_output(flags.output.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qgpart {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
