//! Least-squares similarity alignment between matched coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keypoints::KeypointDescriptorSet;
use crate::matching::MatchSet;

/// Rotation, isotropic scale and translation mapping one image's
/// coordinates onto another's: `q = scale * R(rotation) * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub rotation: f64,
    pub scale: f64,
    pub translation: (f64, f64),
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform { rotation: 0.0, scale: 1.0, translation: (0.0, 0.0) }
    }

    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        (
            self.scale * (c * p.0 - s * p.1) + self.translation.0,
            self.scale * (s * p.0 + c * p.1) + self.translation.1,
        )
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = self.rotation.sin_cos();
        let inv_scale = 1.0 / self.scale;
        let (tx, ty) = self.translation;
        SimilarityTransform {
            rotation: -self.rotation,
            scale: inv_scale,
            translation: (
                -inv_scale * (c * tx + s * ty),
                -inv_scale * (-s * tx + c * ty),
            ),
        }
    }
}

/// Least-squares similarity transform from `a`'s matched coordinates onto
/// `b`'s, with the root-mean-square residual of the fit. Requires at
/// least three matches, mirroring the exclusion threshold used when
/// assembling dissimilarities.
pub fn estimate_alignment(
    m: &MatchSet,
    a: &KeypointDescriptorSet,
    b: &KeypointDescriptorSet,
) -> Result<(SimilarityTransform, f64)> {
    let n = m.matches.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "alignment needs at least 3 matches, got {n}"
        )));
    }
    let pts: Vec<((f64, f64), (f64, f64))> = m
        .matches
        .iter()
        .map(|&(i, j, _)| {
            let (ka, kb) = (&a.keypoints[i], &b.keypoints[j]);
            ((ka.x, ka.y), (kb.x, kb.y))
        })
        .collect();

    let nf = n as f64;
    let (mut pax, mut pay, mut pbx, mut pby) = (0.0, 0.0, 0.0, 0.0);
    for &((ax, ay), (bx, by)) in &pts {
        pax += ax;
        pay += ay;
        pbx += bx;
        pby += by;
    }
    let (ca, cb) = ((pax / nf, pay / nf), (pbx / nf, pby / nf));

    // Centered cross terms: dot accumulates <p, q>, cross accumulates
    // the 2-D cross product; rotation = atan2(cross, dot) and
    // scale = |(dot, cross)| / |p|^2 minimise the squared residual.
    let (mut dot, mut cross, mut norm_a) = (0.0, 0.0, 0.0);
    for &((ax, ay), (bx, by)) in &pts {
        let (px, py) = (ax - ca.0, ay - ca.1);
        let (qx, qy) = (bx - cb.0, by - cb.1);
        dot += px * qx + py * qy;
        cross += px * qy - py * qx;
        norm_a += px * px + py * py;
    }
    if norm_a < 1e-18 {
        return Err(Error::InsufficientData(
            "all source landmarks coincide; similarity transform undetermined".into(),
        ));
    }
    let rotation = cross.atan2(dot);
    let scale = (dot * dot + cross * cross).sqrt() / norm_a;
    if scale <= 0.0 {
        return Err(Error::InsufficientData(
            "matched landmarks give a degenerate (zero-scale) fit".into(),
        ));
    }
    let (s, c) = rotation.sin_cos();
    let translation = (
        cb.0 - scale * (c * ca.0 - s * ca.1),
        cb.1 - scale * (s * ca.0 + c * ca.1),
    );
    let transform = SimilarityTransform { rotation, scale, translation };

    let mut sq = 0.0;
    for &(p, q) in &pts {
        let t = transform.apply(p);
        sq += (t.0 - q.0).powi(2) + (t.1 - q.1).powi(2);
    }
    Ok((transform, (sq / nf).sqrt()))
}
