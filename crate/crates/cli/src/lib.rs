//! Experiment runner for `bergman-dpp`.
//!
//! ```text
//! bergman-dpp <sample|probe> --config <file> [--seed N] [--threads N] [--out DIR] [--probe KIND]
//! bergman-dpp report <DIR> [--out DIR]
//! ```
//!
//! Exit codes: 0 pass, 1 probe failed, 2 configuration or I/O error,
//! 3 numeric contract violation.

pub mod build;
pub mod commands;
pub mod config;
mod error;
pub mod output;

pub use commands::Outcome;
pub use config::{ExperimentConfig, Format, KernelMode, ProbeKind, Selection};
pub use error::CliError;

use std::path::{Path, PathBuf};

/// Default output directory when neither `--out` nor `output.dir` is given.
pub const DEFAULT_OUT: &str = "out";

/// Read and parse a configuration file; diagnostics name the file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ExperimentConfig::parse(&text).map_err(|e| match e {
        CliError::Config { line, message } => CliError::Config {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// `--out`, else `output.dir`, else [`DEFAULT_OUT`].
pub fn out_dir(cfg: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}
