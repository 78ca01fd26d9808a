//! Procedural ground-truth corpora: struck coins from engraved dies and
//! fractured textured vessels. Stand-ins for unavailable photograph
//! collections, with the generating labels kept as evaluation truth.

mod coins;
mod sherds;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use coins::{render_die, synth_coin_corpus, StrikeSpec, SynthDieSpec, COIN_IMAGE_SIZE};
pub use sherds::{
    synth_sherd_sets, synth_sherd_sets_with_counts, DEFAULT_PIECE_COUNTS, VESSEL_FRAME_SIZE,
};

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::raster::{save_png_gray, RasterImage};

/// Labels and relations the generator knows by construction.
/// `offsets` maps each item image's origin into the common source frame
/// (all zeros for coins, piece crop offsets for sherds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub item_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub adjacency: Vec<(usize, usize)>,
    pub offsets: Vec<(f64, f64)>,
}

impl GroundTruth {
    pub fn partition(&self) -> Result<Partition> {
        Partition::from_labels(&self.labels)
    }

    fn validate(&self) -> Result<()> {
        let n = self.item_ids.len();
        if self.labels.len() != n || self.offsets.len() != n {
            return Err(Error::validation("ground truth field lengths disagree"));
        }
        if self.adjacency.iter().any(|&(a, b)| a >= n || b >= n) {
            return Err(Error::validation("adjacency references an unknown item"));
        }
        Ok(())
    }
}

/// splitmix64 finalizer: the standard 64-bit avalanche mix.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent substream seed for item `index` of a named domain.
/// Every generator derives its private stream here, so items can be
/// rendered in parallel without sharing generator state.
pub(crate) fn stream_seed(master: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(domain)) ^ splitmix64(index))
}

/// Writes a corpus directory: one PNG per item named by its id, the
/// ground truth as JSON, and the caller's generation parameters as
/// `spec.json`.
pub fn write_corpus<S: Serialize>(
    dir: &Path,
    images: &[RasterImage],
    truth: &GroundTruth,
    spec: &S,
) -> Result<()> {
    truth.validate()?;
    if images.len() != truth.item_ids.len() {
        return Err(Error::validation(format!(
            "{} images but {} ground-truth items",
            images.len(),
            truth.item_ids.len()
        )));
    }
    fs::create_dir_all(dir)?;
    for (img, id) in images.iter().zip(&truth.item_ids) {
        save_png_gray(img, &dir.join(format!("{id}.png")))?;
    }
    let truth_json = serde_json::to_vec_pretty(truth)
        .map_err(|e| Error::format(format!("ground truth serialization: {e}")))?;
    fs::write(dir.join("ground_truth.json"), truth_json)?;
    let spec_json = serde_json::to_vec_pretty(spec)
        .map_err(|e| Error::format(format!("spec serialization: {e}")))?;
    fs::write(dir.join("spec.json"), spec_json)?;
    Ok(())
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let bytes = fs::read(path)?;
    let truth: GroundTruth = serde_json::from_slice(&bytes)
        .map_err(|e| Error::format(format!("ground truth parse: {e}")))?;
    truth.validate()?;
    Ok(truth)
}
