//! `homtree`: command-line access to the tree analysis library.

mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use crate::config::Cli;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VIOLATION: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const MALFORMED: u8 = 3;
    pub const PRECONDITION: u8 = 4;
    pub const IO: u8 = 5;
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Malformed(String),
    Precondition(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Malformed(_) => exit::MALFORMED,
            CliError::Precondition(_) => exit::PRECONDITION,
            CliError::Io(_) => exit::IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Malformed(m) | CliError::Precondition(m) | CliError::Io(m) => m,
        }
    }
}

impl From<homtree::error::Error> for CliError {
    fn from(e: homtree::error::Error) -> Self {
        use homtree::error::Error as E;
        match e {
            E::MalformedFunction(_) | E::RegionNotCanonical(_) | E::InvalidSelector(_) | E::ScaleMismatch { .. } => {
                CliError::Malformed(e.to_string())
            }
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    match commands::run(cli) {
        Ok(passed) => ExitCode::from(if passed { exit::OK } else { exit::VIOLATION }),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use homtree::error::Error;

    #[test]
    fn library_errors_map_to_exit_codes() {
        assert_eq!(CliError::from(Error::MalformedFunction("x".into())).code(), exit::MALFORMED);
        assert_eq!(CliError::from(Error::LevelTooSmall { lambda: 0.3, threshold: 0.4 }).code(), exit::PRECONDITION);
        assert_eq!(CliError::from(Error::NotAnAtom("x".into())).code(), exit::PRECONDITION);
    }
}
