//! Fracture-edge matching between sherd outlines.
//!
//! Fixed-length windows are slid around each outline; each window,
//! closed by its chord, is summarised by moment invariants, and window
//! pairs are scored by log-moment distances. Because a mating edge is
//! traversed in opposite directions on the two sherds, the second
//! outline is walked in reverse.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hu::{hu_from_polygon, HuVector};
use super::ContourPolyline;
use crate::error::{Error, Result};

/// Default window stride in contour points.
pub const DEFAULT_STRIDE: usize = 5;
const MIN_WINDOW: usize = 8;
/// Invariants smaller than this in magnitude carry no usable signal.
const HU_FLOOR: f64 = 1e-30;

/// One scored window pair. `start_a` indexes the first point of the
/// forward window on the first outline; `start_b` indexes the first
/// point of the reverse-walked window on the second, which then runs
/// backwards through it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubContourMatch {
    pub start_a: usize,
    pub start_b: usize,
    pub window_len: usize,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub score: f64,
}

/// Best window pairs for one pair of sherds, ascending by score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub sherd_a: usize,
    pub sherd_b: usize,
    pub window_len: usize,
    pub stride: usize,
    pub matches: Vec<SubContourMatch>,
}

impl MatchReport {
    /// Score of the best window pair; infinity when nothing matched.
    pub fn best_score(&self) -> f64 {
        self.matches.first().map_or(f64::INFINITY, |m| m.score)
    }
}

/// Log-moment signature distances between two invariant vectors:
/// with m_i = sign(h_i) log10 |h_i|, returns
/// (sum |1/m_a - 1/m_b|, sum |m_a - m_b|, max |m_a - m_b| / |m_a|).
/// Components with |h_i| below a floor on either side are skipped.
pub fn shape_distance(a: &HuVector, b: &HuVector) -> (f64, f64, f64) {
    let mut i1 = 0.0;
    let mut i2 = 0.0;
    let mut i3 = 0.0f64;
    for (&ha, &hb) in a.values().iter().zip(b.values()) {
        if ha.abs() < HU_FLOOR || hb.abs() < HU_FLOOR {
            continue;
        }
        let ma = ha.signum() * ha.abs().log10();
        let mb = hb.signum() * hb.abs().log10();
        if ma != 0.0 && mb != 0.0 {
            i1 += (1.0 / ma - 1.0 / mb).abs();
        }
        i2 += (ma - mb).abs();
        if ma != 0.0 {
            i3 = i3.max((ma - mb).abs() / ma.abs());
        }
    }
    (i1, i2, i3)
}

/// Points of one window. Forward windows walk `start, start+1, ...`;
/// reverse windows walk `start, start-1, ...`, both wrapping.
pub fn subcontour_points(
    contour: &ContourPolyline,
    start: usize,
    window_len: usize,
    reversed: bool,
) -> Vec<(f64, f64)> {
    let pts = contour.points();
    let n = pts.len();
    (0..window_len)
        .map(|k| {
            let step = k % n;
            let idx = if reversed { (start % n + n - step) % n } else { (start + step) % n };
            pts[idx]
        })
        .collect()
}

fn window_signatures(
    contour: &ContourPolyline,
    window_len: usize,
    stride: usize,
    reversed: bool,
) -> Vec<(usize, HuVector)> {
    let n = contour.len();
    let starts: Vec<usize> = (0..n)
        .step_by(stride)
        .map(|r| if reversed { (n - 1 - r) % n } else { r })
        .collect();
    starts
        .into_par_iter()
        .filter_map(|s| {
            let poly = subcontour_points(contour, s, window_len, reversed);
            // Collinear windows have no enclosed area; skip them.
            hu_from_polygon(&poly).ok().map(|h| (s, h))
        })
        .collect()
}

/// Scores every window of `ca` against every reverse-walked window of
/// `cb` and keeps the best `top_k` pairs, ascending by score with index
/// order breaking ties.
pub fn match_subcontours(
    ca: &ContourPolyline,
    cb: &ContourPolyline,
    window_len: usize,
    stride: usize,
    top_k: usize,
) -> Result<Vec<SubContourMatch>> {
    if window_len < MIN_WINDOW {
        return Err(Error::validation(format!(
            "window_len {window_len} is below the minimum of {MIN_WINDOW}"
        )));
    }
    if window_len > ca.len().min(cb.len()) {
        return Err(Error::validation(format!(
            "window_len {} exceeds the shorter contour ({} points)",
            window_len,
            ca.len().min(cb.len())
        )));
    }
    if stride == 0 {
        return Err(Error::validation("stride must be at least 1"));
    }
    let sig_a = window_signatures(ca, window_len, stride, false);
    let sig_b = window_signatures(cb, window_len, stride, true);
    let mut scored: Vec<SubContourMatch> = sig_a
        .par_iter()
        .flat_map_iter(|&(sa, ha)| {
            sig_b.iter().map(move |&(sb, hb)| {
                let (i1, i2, i3) = shape_distance(&ha, &hb);
                SubContourMatch {
                    start_a: sa,
                    start_b: sb,
                    window_len,
                    i1,
                    i2,
                    i3,
                    score: i1 * i1 + i2 * i2 + i3 * i3,
                }
            })
        })
        .collect();
    scored.sort_by(|p, q| {
        p.score
            .total_cmp(&q.score)
            .then(p.start_a.cmp(&q.start_a))
            .then(p.start_b.cmp(&q.start_b))
    });
    scored.truncate(top_k);
    Ok(scored)
}

/// Recommended window length: 15% of the shortest outline, never
/// below twice the minimum window.
pub fn suggested_window_len(contours: &[ContourPolyline]) -> usize {
    let shortest = contours.iter().map(|c| c.len()).min().unwrap_or(0);
    ((shortest as f64 * 0.15).round() as usize).max(2 * MIN_WINDOW)
}

/// Scores every unordered pair of outlines, keeping the top 3 window
/// matches per pair, reports sorted so the most promising joins come
/// first. Within a report the lower-indexed sherd is always `sherd_a`.
pub fn reconstruct_pairs(
    contours: &[ContourPolyline],
    window_len: usize,
    stride: usize,
) -> Result<Vec<MatchReport>> {
    if contours.len() < 2 {
        return Err(Error::validation("pair reconstruction needs at least two outlines"));
    }
    let mut reports = Vec::with_capacity(contours.len() * (contours.len() - 1) / 2);
    for i in 0..contours.len() {
        for j in i + 1..contours.len() {
            let matches = match_subcontours(&contours[i], &contours[j], window_len, stride, 3)?;
            reports.push(MatchReport { sherd_a: i, sherd_b: j, window_len, stride, matches });
        }
    }
    reports.sort_by(|p, q| {
        p.best_score()
            .total_cmp(&q.best_score())
            .then(p.sherd_a.cmp(&q.sherd_a))
            .then(p.sherd_b.cmp(&q.sherd_b))
    });
    Ok(reports)
}
