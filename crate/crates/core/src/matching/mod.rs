//! Pairwise landmark matching between descriptor sets.
//!
//! Candidate matches come from an approximate nearest-neighbour search
//! over descriptors, filtered by Lowe's ratio test in both directions,
//! mutual consistency, and the coin-circle mask, then made one-to-one
//! greedily by ascending descriptor distance. Matched landmarks are
//! ranked for downstream metric weighting by GP uncertainty sampling.

use serde::{Deserialize, Serialize};

use crate::keypoints::{CoinCircle, KeypointDescriptorSet};

mod ann;
mod gp;
mod procrustes;

pub use gp::rank_landmarks_gp;
pub use procrustes::{estimate_alignment, SimilarityTransform};

use ann::{NearestForest, Neighbours, QueryScratch};

/// Lowe ratio test threshold on descriptor distances.
pub const RATIO_THRESHOLD: f64 = 0.8;

/// Matched landmark indices between one pair of images.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchSet {
    /// Image ids (source, target).
    pub image_pair: (String, String),
    /// `(index in source set, index in target set, descriptor distance)`.
    pub matches: Vec<(usize, usize, f64)>,
    /// `ranks[l]` is the importance rank of match `l`; identity until a
    /// ranking pass fills it. Always a permutation of `0..matches.len()`.
    pub ranks: Vec<usize>,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// The same matches viewed from the other image.
    pub fn swapped(&self) -> MatchSet {
        MatchSet {
            image_pair: (self.image_pair.1.clone(), self.image_pair.0.clone()),
            matches: self.matches.iter().map(|&(i, j, d)| (j, i, d)).collect(),
            ranks: self.ranks.clone(),
        }
    }
}

/// Matches two descriptor sets. Keypoints outside their coin circle are
/// discarded; an empty result is valid. Swapping the arguments yields
/// the same pair set with tuple members swapped.
pub fn match_pair(
    a: &KeypointDescriptorSet,
    b: &KeypointDescriptorSet,
    circle_a: &CoinCircle,
    circle_b: &CoinCircle,
) -> MatchSet {
    let mut out = MatchSet {
        image_pair: (a.image_id.clone(), b.image_id.clone()),
        matches: Vec::new(),
        ranks: Vec::new(),
    };
    if a.is_empty() || b.is_empty() {
        return out;
    }

    let forest_b = NearestForest::build(b.descriptors(), b.len());
    let forest_a = NearestForest::build(a.descriptors(), a.len());
    let mut scratch = QueryScratch::new();

    let forward: Vec<Neighbours> =
        (0..a.len()).map(|i| forest_b.top2(a.descriptor(i), &mut scratch).unwrap()).collect();
    let backward: Vec<Neighbours> =
        (0..b.len()).map(|j| forest_a.top2(b.descriptor(j), &mut scratch).unwrap()).collect();

    let ratio_ok = |nb: &Neighbours| match nb.second_d2 {
        Some(second) => nb.best_d2 < RATIO_THRESHOLD * RATIO_THRESHOLD * second,
        None => true,
    };

    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for (i, fwd) in forward.iter().enumerate() {
        let j = fwd.best;
        if backward[j].best != i || !ratio_ok(fwd) || !ratio_ok(&backward[j]) {
            continue;
        }
        let (ka, kb) = (&a.keypoints[i], &b.keypoints[j]);
        if !circle_a.contains(ka.x, ka.y) || !circle_b.contains(kb.x, kb.y) {
            continue;
        }
        candidates.push((i, j, fwd.best_d2.sqrt()));
    }

    // Mutual NN is already one-to-one; the greedy pass keeps that a hard
    // guarantee regardless of upstream behaviour.
    candidates.sort_by(|x, y| x.2.partial_cmp(&y.2).unwrap().then(x.0.cmp(&y.0)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    for (i, j, d) in candidates {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        out.matches.push((i, j, d));
    }
    out.ranks = (0..out.matches.len()).collect();
    out
}
