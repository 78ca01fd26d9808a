//! Stage implementations behind `run_stage`.
//!
//! Each stage is a plain function from config to artifacts; the shared
//! helpers here resolve item order, which every downstream index-based
//! artifact inherits from `preprocess`.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use artefact_core::keypoints::import_descriptors;
use artefact_core::raster::load_image;
use artefact_core::synth::read_ground_truth;
use artefact_core::{GroundTruth, KeypointDescriptorSet, RasterImage};

use crate::artifacts::{self, Workspace};
use crate::config::{Pipeline, RunConfig, Stage};
use crate::error::{CliError, Result};

pub mod cluster;
pub mod contours;
pub mod detect;
pub mod dist;
pub mod embed;
pub mod eval;
pub mod impute;
pub mod kmeans;
pub mod matching;
pub mod preprocess;
pub mod sherd_match;
pub mod synth;

pub fn run(cfg: &RunConfig, stage: Stage) -> Result<()> {
    if cfg.pipeline == Pipeline::Synth && stage != Stage::Synth {
        return Err(CliError::config(
            "pipeline `synth` only generates corpora; use coins or ceramics-* to run stages",
        ));
    }
    match stage {
        Stage::Synth => synth::run(cfg),
        Stage::Preprocess => preprocess::run(cfg),
        Stage::Detect => detect::run(cfg),
        Stage::Match => matching::run(cfg),
        Stage::Dist => dist::run(cfg),
        Stage::Impute => impute::run(cfg),
        Stage::Cluster => cluster::run(cfg),
        Stage::Eval => eval::run(cfg),
        Stage::Embed => embed::run(cfg),
        Stage::Kmeans => kmeans::run(cfg),
        Stage::Contours => contours::run(cfg),
        Stage::SherdMatch => sherd_match::run(cfg),
    }
}

/// Item ids in corpus order: the ground-truth listing when present,
/// otherwise the PNG file stems sorted by name.
pub(crate) fn corpus_item_ids(ws: &Workspace) -> Result<Vec<String>> {
    let dir = ws.input("corpus");
    if !dir.is_dir() {
        return Err(CliError::dependency(&dir, "synth"));
    }
    let truth_path = dir.join("ground_truth.json");
    if truth_path.exists() {
        return Ok(read_ground_truth(&truth_path)?.item_ids);
    }
    let mut ids = Vec::new();
    for entry in fs::read_dir(&dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "png") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    if ids.is_empty() {
        return Err(CliError::dependency(&dir.join("*.png"), "synth"));
    }
    ids.sort();
    Ok(ids)
}

/// Item order fixed by `preprocess`; all index-based artifacts use it.
pub(crate) fn read_items(ws: &Workspace) -> Result<Vec<String>> {
    let path = ws.require(artifacts::ITEMS, "preprocess")?;
    artifacts::read_json(&path)
}

pub(crate) fn read_truth(ws: &Workspace) -> Result<GroundTruth> {
    let path = ws.require(artifacts::GROUND_TRUTH, "synth")?;
    Ok(read_ground_truth(&path)?)
}

pub(crate) fn load_preprocessed(ws: &Workspace, items: &[String]) -> Result<Vec<RasterImage>> {
    items
        .iter()
        .map(|id| {
            let path = ws.require(artifacts::preprocessed_image(id), "preprocess")?;
            Ok(load_image(&path)?)
        })
        .collect()
}

pub(crate) fn load_descriptor_sets(
    ws: &Workspace,
    items: &[String],
) -> Result<Vec<KeypointDescriptorSet>> {
    items
        .iter()
        .map(|id| {
            let path = ws.require(artifacts::descriptor_file(id), "detect")?;
            let reader = BufReader::new(fs::File::open(&path)?);
            Ok(import_descriptors(reader)?)
        })
        .collect()
}

pub(crate) fn buf_writer(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}
