use std::path::Path;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing upstream artifact: {0} (run `{1}` first)")]
    Dependency(String, &'static str),
    #[error("invalid artifact {0}: {1}")]
    Artifact(String, String),
    #[error(transparent)]
    Core(#[from] artefact_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub(crate) fn dependency(path: &Path, producing_stage: &'static str) -> Self {
        CliError::Dependency(path.display().to_string(), producing_stage)
    }

    pub(crate) fn artifact(path: &Path, msg: impl Into<String>) -> Self {
        CliError::Artifact(path.display().to_string(), msg.into())
    }
}
