//! Scenario runner for decoherence metric tensor sweeps.
//!
//! A scenario file describes the bath, the atom geometry, the selected atoms,
//! a time grid and an optional parameter sweep. [`run::run`] evaluates it and
//! writes one curve CSV per sweep value plus a text report.

pub mod curve;
pub mod run;
pub mod scenario;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    /// 1 for configuration problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Numerical(_) => 2,
        }
    }
}
