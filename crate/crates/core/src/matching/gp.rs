//! Landmark importance ranking by Gaussian-process uncertainty sampling.
//!
//! Matched landmarks are ranked greedily: the strongest detection first,
//! then repeatedly the landmark whose coordinates have the largest
//! posterior predictive variance under a squared-exponential GP
//! conditioned on the landmarks ranked so far. Spatially redundant
//! landmarks (near or on top of ranked ones) therefore sink to the
//! bottom.

use crate::error::{Error, Result};
use crate::keypoints::KeypointDescriptorSet;
use crate::matching::MatchSet;

const JITTER: f64 = 1e-10;

/// Fills `m.ranks`: `ranks[l]` is the importance rank of match `l`
/// (0 = most important). The kernel bandwidth is the median pairwise
/// distance between the matched landmarks in `a`; if that is zero
/// (coincident landmarks) the ranking falls back to detector strength.
pub fn rank_landmarks_gp(m: &MatchSet, a: &KeypointDescriptorSet) -> Result<MatchSet> {
    let n = m.matches.len();
    if n == 0 {
        return Err(Error::validation("cannot rank an empty match set"));
    }
    let coords: Vec<(f64, f64)> = m
        .matches
        .iter()
        .map(|&(i, _, _)| {
            let kp = &a.keypoints[i];
            (kp.x, kp.y)
        })
        .collect();
    let strengths: Vec<f64> = m.matches.iter().map(|&(i, _, _)| a.keypoints[i].strength).collect();

    let order = match bandwidth(&coords) {
        Some(h) => greedy_variance_order(&coords, &strengths, h),
        None => strength_order(&strengths),
    };
    let mut ranks = vec![0usize; n];
    for (rank, &l) in order.iter().enumerate() {
        ranks[l] = rank;
    }
    let mut out = m.clone();
    out.ranks = ranks;
    Ok(out)
}

/// Median pairwise distance; `None` when no positive distance exists.
fn bandwidth(coords: &[(f64, f64)]) -> Option<f64> {
    let n = coords.len();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = (coords[i].0 - coords[j].0, coords[i].1 - coords[j].1);
            dists.push((dx * dx + dy * dy).sqrt());
        }
    }
    if dists.is_empty() {
        return None;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = dists.len() / 2;
    let h = if dists.len() % 2 == 1 { dists[mid] } else { (dists[mid - 1] + dists[mid]) / 2.0 };
    (h > 0.0).then_some(h)
}

fn strength_order(strengths: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..strengths.len()).collect();
    order.sort_by(|&a, &b| {
        strengths[b].partial_cmp(&strengths[a]).unwrap().then(a.cmp(&b))
    });
    order
}

fn kernel(a: (f64, f64), b: (f64, f64), h: f64) -> f64 {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    (-(dx * dx + dy * dy) / (2.0 * h * h)).exp()
}

/// Greedy maximum-posterior-variance ordering with an incrementally
/// extended Cholesky factor. For each unranked candidate c we maintain
/// z_c = L^{-1} k(S, c); its posterior variance is 1 + jitter - |z_c|^2.
fn greedy_variance_order(coords: &[(f64, f64)], strengths: &[f64], h: f64) -> Vec<usize> {
    let n = coords.len();
    let first = strength_order(strengths)[0];

    let mut order = vec![first];
    let mut remaining: Vec<usize> = (0..n).filter(|&i| i != first).collect();
    // Cholesky rows of K(S, S); z[c] tracks L^{-1} k(S, c).
    let mut chol: Vec<Vec<f64>> = Vec::new();
    let mut z: Vec<Vec<f64>> = vec![Vec::new(); n];

    while !remaining.is_empty() {
        let s = *order.last().unwrap();
        // Extend the factor by the row for s.
        let w = z[s].clone();
        let d2 = 1.0 + JITTER - w.iter().map(|v| v * v).sum::<f64>();
        let d = d2.max(JITTER).sqrt();
        let mut row = w;
        row.push(d);
        chol.push(row);
        for &c in &remaining {
            let k_sc = kernel(coords[s], coords[c], h);
            let dot: f64 = chol.last().unwrap()[..z[c].len()]
                .iter()
                .zip(&z[c])
                .map(|(a, b)| a * b)
                .sum();
            z[c].push((k_sc - dot) / d);
        }
        // Pick the candidate with maximal posterior variance.
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for &c in &remaining {
            let var = 1.0 + JITTER - z[c].iter().map(|v| v * v).sum::<f64>();
            if var > best.0 || (var == best.0 && c < best.1) {
                best = (var, c);
            }
        }
        order.push(best.1);
        remaining.retain(|&c| c != best.1);
    }
    order
}
