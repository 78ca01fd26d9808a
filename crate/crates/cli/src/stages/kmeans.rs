//! Clusters the 2-d embedding and votes rows up to image assignments.

use artefact_core::embed::{kmeans, majority_image_assignment};
use artefact_core::Embedding2D;

use crate::artifacts::{
    self, stage_seed, AssignmentArtifact, EmbedSummary, PartitionArtifact, Workspace,
};
use crate::config::RunConfig;
use crate::error::Result;

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ws = Workspace::from_config(cfg);
    let (points, provenance) =
        artifacts::read_embedding_csv(&ws.require(artifacts::EMBEDDING, "embed")?)?;
    let summary: EmbedSummary =
        artifacts::read_json(&ws.require(artifacts::EMBED_SUMMARY, "embed")?)?;
    let embedding = Embedding2D { points, final_kl: summary.final_kl };

    let rows = kmeans(&embedding, cfg.kmeans.k, stage_seed(cfg.seed, "kmeans"))?;
    let assignments = majority_image_assignment(&provenance, &rows)?;

    let mut sizes = vec![0usize; cfg.kmeans.k];
    for &(_, c) in &assignments {
        sizes[c] += 1;
    }
    sizes.retain(|&s| s > 0);
    println!("kmeans clusters: {}", artifacts::format_sizes(&sizes));

    artifacts::write_json(&ws.output(artifacts::ROW_LABELS)?, &PartitionArtifact::of(&rows))?;
    artifacts::write_json(
        &ws.output(artifacts::ASSIGNMENTS)?,
        &AssignmentArtifact { assignments },
    )?;
    Ok(())
}
