//! Configuration, run driver, verification suites and reports of the
//! `prismdg` command.

use std::path::PathBuf;

pub mod bench;
pub mod checks;
pub mod config;
pub mod output;
pub mod run;

pub use config::RunConfig;

/// Environment variable that overrides every output directory.
pub const OUTPUT_DIR_ENV: &str = "PRISMDG_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] prismdg_core::Error),
}

/// Output directory: the environment override if set, else `fallback`.
pub fn output_dir(fallback: PathBuf) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or(fallback)
}
