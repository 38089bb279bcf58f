//! Command-line front end for the chain verification toolkit: config
//! parsing, command orchestration and report serialization.

pub mod config;
pub mod report;
pub mod runner;

/// Process exit codes: 0 = conclusive/pass, 2 = inconclusive/fail,
/// 1 = operational error.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;

/// Errors surfaced to the user with exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] chainverifier_core::CoreError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
