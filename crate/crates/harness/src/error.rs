use std::path::PathBuf;

use thiserror::Error;

/// Everything that stops a run before a verdict exists. All of these map to
/// exit code 2; failed checks are reported, not raised.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid scenario at {location}: {message}")]
    Invalid { location: String, message: String },

    /// A check could not be evaluated at all, typically a horizon overflow.
    #[error("check {check} failed to run on instance {instance} (seed {seed}): {source}")]
    Check {
        check: &'static str,
        instance: usize,
        seed: u64,
        source: qstop_core::Error,
    },

    #[error("cannot write report to {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        2
    }
}
