//! Staged driver around the analysis crate: corpus synthesis, image
//! normalisation, landmark matching, partition inference, embedding,
//! and outline-based reconstruction, each stage handing artifacts to
//! the next through a run directory.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod stages;

pub use config::{Pipeline, RunConfig, Stage};
pub use error::{CliError, Result};

/// Runs one stage against the configured run directory.
pub fn run_stage(cfg: &RunConfig, stage: Stage) -> Result<()> {
    stages::run(cfg, stage)
}
