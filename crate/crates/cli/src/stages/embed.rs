//! Projects all keypoint descriptors to two dimensions.

use artefact_core::embed::{build_feature_matrix, tsne};
use artefact_core::synth::read_ground_truth;

use crate::artifacts::{self, stage_seed, EmbedSummary, Workspace};
use crate::config::RunConfig;
use crate::error::Result;

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ws = Workspace::from_config(cfg);
    let items = super::read_items(&ws)?;
    let sets = super::load_descriptor_sets(&ws, &items)?;

    // Set ids come from the corpus truth when present; otherwise every
    // row shares set 0. They ride along as provenance only.
    let truth_path = ws.input(artifacts::GROUND_TRUTH);
    let set_ids: Vec<usize> = if truth_path.exists() {
        read_ground_truth(&truth_path)?.labels
    } else {
        vec![0; items.len()]
    };
    if set_ids.len() != items.len() {
        return Err(crate::error::CliError::artifact(
            &truth_path,
            "ground truth does not cover the item list",
        ));
    }

    let tagged: Vec<_> = sets
        .into_iter()
        .enumerate()
        .map(|(i, set)| (set, i, set_ids[i]))
        .collect();
    let matrix = build_feature_matrix(&tagged)?;
    let embedding = tsne(&matrix, cfg.embed.perplexity, stage_seed(cfg.seed, "embed"))?;

    artifacts::write_embedding_csv(
        &ws.output(artifacts::EMBEDDING)?,
        &embedding,
        matrix.provenance(),
    )?;
    artifacts::write_json(
        &ws.output(artifacts::EMBED_SUMMARY)?,
        &EmbedSummary { final_kl: embedding.final_kl, perplexity: cfg.embed.perplexity },
    )?;
    println!(
        "embed: {} rows -> 2-d (final KL {:.4})",
        matrix.rows(),
        embedding.final_kl
    );
    Ok(())
}
