//! Per-pair similarity metrics and their combination into a single
//! dissimilarity matrix over a corpus.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matching::{MatchSet, SimilarityTransform};
use crate::raster::RasterImage;

mod matrix;
mod ssim;

pub use matrix::{
    assemble_matrix, read_matrix_csv, ultrametric_impute, write_matrix_csv, DissimilarityMatrix,
};
pub use ssim::{ssim, warp_similarity};

/// Raw similarity evidence for one image pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    /// Matched landmark count.
    pub n_matched: usize,
    /// Rank-weighted Euclidean descriptor distance.
    pub weighted_euclid: f64,
    /// Structural similarity after alignment, in [-1, 1].
    pub ssim: f64,
}

/// Computes the metric vector for one pair: the match count, the
/// rank-weighted descriptor distance (weights 1/(rank+1), normalised to
/// sum to one), and SSIM of `img_a` warped onto `img_b` by `alignment`
/// (unwarped when no alignment is available, e.g. under three matches).
pub fn pair_metrics(
    img_a: &RasterImage,
    img_b: &RasterImage,
    m: &MatchSet,
    alignment: Option<&SimilarityTransform>,
) -> Result<PairMetrics> {
    let n_matched = m.len();
    let weighted_euclid = if n_matched == 0 {
        0.0
    } else {
        let weight_sum: f64 = m.ranks.iter().map(|&r| 1.0 / (r as f64 + 1.0)).sum();
        let sq: f64 = m
            .matches
            .iter()
            .zip(&m.ranks)
            .map(|(&(_, _, d), &r)| (1.0 / (r as f64 + 1.0)) / weight_sum * d * d)
            .sum();
        sq.sqrt()
    };
    let structural = match alignment {
        Some(t) => ssim(&warp_similarity(img_a, t), img_b)?,
        None => ssim(img_a, img_b)?,
    };
    Ok(PairMetrics { n_matched, weighted_euclid, ssim: structural })
}
