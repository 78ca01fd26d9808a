//! Circular Hough transform for locating the object outline.

use crate::edges::{canny, gaussian_blur, sobel};
use crate::error::{Error, Result};
use crate::keypoints::CoinCircle;
use crate::raster::RasterImage;

const CANNY_SIGMA: f64 = 2.0;
/// Canny thresholds relative to the maximum gradient magnitude.
const REL_T_HIGH: f64 = 0.25;
const REL_T_LOW: f64 = 0.10;
/// A circle needs at least this fraction of its perimeter voting for it.
const MIN_SUPPORT: f64 = 0.3;
/// Radii whose support is within this factor of the best are tied; the
/// largest tied radius wins (the outline beats interior design rings).
const TIE_FACTOR: f64 = 0.9;

/// Scans radii `r_min..=r_max` with gradient-directed voting and returns
/// the best-supported circle.
pub fn detect_coin_circle(img: &RasterImage, r_min: usize, r_max: usize) -> Result<CoinCircle> {
    let (w, h) = (img.width(), img.height());
    if r_min == 0 || r_min >= r_max || 2 * r_max > w.min(h) {
        return Err(Error::validation(format!(
            "radius range {r_min}..{r_max} invalid for {w}x{h} image"
        )));
    }

    let max_mag = sobel(&gaussian_blur(img, CANNY_SIGMA))
        .magnitude
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    if max_mag <= 0.0 {
        return Err(Error::Detection("image has no gradient structure".into()));
    }
    let edges = canny(img, CANNY_SIGMA, REL_T_LOW * max_mag, REL_T_HIGH * max_mag)?;
    let grad = &edges.gradients;

    // Edge pixels with their unit gradient direction.
    let mut voters: Vec<(f64, f64, f64, f64)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if edges.mask[i] && grad.magnitude[i] > 0.0 {
                let inv = 1.0 / grad.magnitude[i];
                voters.push((x as f64, y as f64, grad.gx[i] * inv, grad.gy[i] * inv));
            }
        }
    }
    if voters.is_empty() {
        return Err(Error::Detection("no edges above threshold".into()));
    }

    struct RadiusBest {
        r: usize,
        support: f64,
        cx: f64,
        cy: f64,
    }
    let mut per_radius: Vec<RadiusBest> = Vec::new();
    let mut acc = vec![0u32; w * h];

    for r in r_min..=r_max {
        for a in acc.iter_mut() {
            *a = 0;
        }
        let rf = r as f64;
        for &(x, y, nx, ny) in &voters {
            // The gradient may point into or out of the object; vote both.
            for sign in [-1.0, 1.0] {
                let cx = (x + sign * rf * nx).round();
                let cy = (y + sign * rf * ny).round();
                if cx >= 0.0 && cy >= 0.0 && (cx as usize) < w && (cy as usize) < h {
                    acc[cy as usize * w + cx as usize] += 1;
                }
            }
        }
        // Best 3x3 neighbourhood sum for this radius.
        let mut best = (0u32, 0usize, 0usize);
        for y in 1..h.saturating_sub(1) {
            for x in 1..w.saturating_sub(1) {
                let mut s = 0u32;
                for dy in 0..3 {
                    for dx in 0..3 {
                        s += acc[(y + dy - 1) * w + (x + dx - 1)];
                    }
                }
                if s > best.0 {
                    best = (s, x, y);
                }
            }
        }
        if best.0 == 0 {
            continue;
        }
        // Sub-cell centre: vote-weighted centroid of the 3x3 block.
        let (_, bx, by) = best;
        let mut sw = 0.0;
        let mut sx = 0.0;
        let mut sy = 0.0;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let v = acc[(by as i64 + dy) as usize * w + (bx as i64 + dx) as usize] as f64;
                sw += v;
                sx += v * (bx as i64 + dx) as f64;
                sy += v * (by as i64 + dy) as f64;
            }
        }
        let support = best.0 as f64 / (2.0 * std::f64::consts::PI * rf);
        per_radius.push(RadiusBest { r, support, cx: sx / sw, cy: sy / sw });
    }

    let best_support = per_radius.iter().map(|b| b.support).fold(0.0f64, f64::max);
    if best_support < MIN_SUPPORT {
        return Err(Error::Detection(format!(
            "no circle with support >= {MIN_SUPPORT} (best {best_support:.3})"
        )));
    }
    let winner = per_radius
        .iter()
        .filter(|b| b.support >= TIE_FACTOR * best_support)
        .max_by_key(|b| b.r)
        .unwrap();
    Ok(CoinCircle { cx: winner.cx, cy: winner.cy, radius: winner.r as f64 })
}
