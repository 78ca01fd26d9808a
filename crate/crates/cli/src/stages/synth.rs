//! Corpus generation: labelled coin strikes or fractured sherd sets.

use std::path::Path;

use artefact_core::synth::{synth_coin_corpus, synth_sherd_sets_with_counts, write_corpus};
use artefact_core::{GroundTruth, RasterImage};
use serde::Serialize;

use crate::artifacts::{stage_seed, Workspace};
use crate::config::{Pipeline, RunConfig};
use crate::error::Result;

#[derive(Serialize)]
struct CorpusSpec<'a> {
    pipeline: &'static str,
    seed: u64,
    synth: &'a crate::config::SynthSection,
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ws = Workspace::from_config(cfg);
    match cfg.pipeline {
        Pipeline::Coins => {
            let (images, truth) = coins(cfg)?;
            write(&ws.output("corpus")?, "coins", cfg, &images, &truth)?;
            println!("synth: wrote {} coin images", images.len());
        }
        Pipeline::CeramicsCluster | Pipeline::CeramicsReconstruct => {
            let (images, truth) = sherds(cfg)?;
            write(&ws.output("corpus")?, "ceramics", cfg, &images, &truth)?;
            println!("synth: wrote {} sherd images", images.len());
        }
        Pipeline::Synth => {
            let (coin_images, coin_truth) = coins(cfg)?;
            write(&ws.output("corpus-coins")?, "coins", cfg, &coin_images, &coin_truth)?;
            let (sherd_images, sherd_truth) = sherds(cfg)?;
            write(&ws.output("corpus-sherds")?, "ceramics", cfg, &sherd_images, &sherd_truth)?;
            println!(
                "synth: wrote {} coin and {} sherd images",
                coin_images.len(),
                sherd_images.len()
            );
        }
    }
    Ok(())
}

fn coins(cfg: &RunConfig) -> Result<(Vec<RasterImage>, GroundTruth)> {
    let s = &cfg.synth;
    Ok(synth_coin_corpus(
        s.n_dies,
        s.coins_per_die,
        &s.die,
        &s.strike,
        stage_seed(cfg.seed, "synth-coins"),
    )?)
}

fn sherds(cfg: &RunConfig) -> Result<(Vec<RasterImage>, GroundTruth)> {
    Ok(synth_sherd_sets_with_counts(
        &cfg.synth.sherd_counts,
        stage_seed(cfg.seed, "synth-sherds"),
    )?)
}

fn write(
    dir: &Path,
    pipeline: &'static str,
    cfg: &RunConfig,
    images: &[RasterImage],
    truth: &GroundTruth,
) -> Result<()> {
    let spec = CorpusSpec { pipeline, seed: cfg.seed, synth: &cfg.synth };
    write_corpus(dir, images, truth, &spec)?;
    Ok(())
}
