use std::path::PathBuf;

use cll_core::ErrorClass;
use serde::Serialize;
use thiserror::Error;

use crate::config::COMMANDS;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_GATE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("referenced file does not exist: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unknown command `{0}`; expected one of {}", COMMANDS.join(", "))]
    UnknownCommand(String),

    #[error(transparent)]
    Core(#[from] cll_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingFile(_) | CliError::UnknownCommand(_) => EXIT_INPUT,
            CliError::Core(e) => match e.class() {
                ErrorClass::Input | ErrorClass::Io => EXIT_INPUT,
                ErrorClass::Gate => EXIT_GATE,
                ErrorClass::Numerical => EXIT_NUMERICAL,
            },
        }
    }

    pub fn class(&self) -> &'static str {
        match self.exit_code() {
            EXIT_GATE => "gate",
            EXIT_NUMERICAL => "numerical",
            _ => "input",
        }
    }

    /// Gate name when the failure is a named gate.
    pub fn gate(&self) -> Option<String> {
        match self {
            CliError::Core(cll_core::Error::Gate { gate, .. }) => Some(gate.clone()),
            CliError::Core(cll_core::Error::NotNilpotent { .. }) => Some("nilpotency".into()),
            CliError::Core(cll_core::Error::NotWkb(_)) => Some("wkb".into()),
            CliError::Core(cll_core::Error::LoopNotFound { .. }) => Some("wkb-loop".into()),
            CliError::Core(cll_core::Error::Degenerate(_)) => Some("degeneracy".into()),
            CliError::Core(cll_core::Error::PowerOverflow { .. }) => Some("power-range".into()),
            _ => None,
        }
    }

    pub fn diagnostic(&self, command: Option<&str>) -> Diagnostic {
        Diagnostic {
            command: command.map(str::to_string),
            class: self.class(),
            exit_code: self.exit_code(),
            gate: self.gate(),
            message: self.to_string(),
        }
    }
}

/// Machine-readable failure record.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub command: Option<String>,
    pub class: &'static str,
    pub exit_code: i32,
    pub gate: Option<String>,
    pub message: String,
}
