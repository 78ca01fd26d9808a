//! Contrast-limited adaptive histogram equalisation.
//!
//! The image is divided into a `tiles x tiles` grid. Each tile gets a
//! 256-bin histogram, clipped at `clip * tile_pixels` per bin with the
//! excess redistributed uniformly, and the resulting CDF becomes the tile's
//! intensity mapping. Per-pixel output bilinearly interpolates the mappings
//! of the four surrounding tile centres. A tile whose histogram is
//! concentrated in a single bin (a constant patch) keeps the identity
//! mapping, so constant images pass through unchanged.

use crate::error::{Error, Result};
use crate::raster::RasterImage;

pub const CLAHE_BINS: usize = 256;

#[inline]
fn bin_of(v: f64) -> usize {
    ((v * CLAHE_BINS as f64) as usize).min(CLAHE_BINS - 1)
}

enum TileMap {
    /// Degenerate histogram; maps every value to itself.
    Identity,
    /// CDF of the clipped histogram, evaluated at the value's bin.
    Lut(Box<[f64; CLAHE_BINS]>),
}

impl TileMap {
    #[inline]
    fn apply(&self, v: f64) -> f64 {
        match self {
            TileMap::Identity => v,
            TileMap::Lut(lut) => lut[bin_of(v)],
        }
    }
}

pub fn clahe(img: &RasterImage, tiles: usize, clip: f64) -> Result<RasterImage> {
    if tiles == 0 {
        return Err(Error::validation("clahe tile count must be positive"));
    }
    if tiles > img.width() || tiles > img.height() {
        return Err(Error::validation(format!(
            "clahe grid {tiles}x{tiles} exceeds image {}x{}",
            img.width(),
            img.height()
        )));
    }
    if !(clip > 0.0 && clip <= 1.0) || !clip.is_finite() {
        return Err(Error::validation("clahe clip must be in (0, 1]"));
    }

    let (w, h) = (img.width(), img.height());
    // Tile bounds partition the image exactly; centres drive interpolation.
    let xb: Vec<usize> = (0..=tiles).map(|t| t * w / tiles).collect();
    let yb: Vec<usize> = (0..=tiles).map(|t| t * h / tiles).collect();
    let cx: Vec<f64> = (0..tiles).map(|t| (xb[t] + xb[t + 1]) as f64 / 2.0 - 0.5).collect();
    let cy: Vec<f64> = (0..tiles).map(|t| (yb[t] + yb[t + 1]) as f64 / 2.0 - 0.5).collect();

    let mut maps = Vec::with_capacity(tiles * tiles);
    for ty in 0..tiles {
        for tx in 0..tiles {
            maps.push(tile_map(img, xb[tx], xb[tx + 1], yb[ty], yb[ty + 1], clip));
        }
    }

    let mut out = RasterImage::new(w, h);
    for y in 0..h {
        let (ty0, ty1, fy) = interp_cell(&cy, y as f64);
        for x in 0..w {
            let (tx0, tx1, fx) = interp_cell(&cx, x as f64);
            let v = img.get(x, y);
            let m00 = maps[ty0 * tiles + tx0].apply(v);
            let m10 = maps[ty0 * tiles + tx1].apply(v);
            let m01 = maps[ty1 * tiles + tx0].apply(v);
            let m11 = maps[ty1 * tiles + tx1].apply(v);
            let top = m00 * (1.0 - fx) + m10 * fx;
            let bot = m01 * (1.0 - fx) + m11 * fx;
            out.set(x, y, top * (1.0 - fy) + bot * fy);
        }
    }
    Ok(out)
}

/// Finds the two neighbouring tile centres along one axis and the blend
/// weight; positions outside the first/last centre clamp to that tile.
fn interp_cell(centres: &[f64], pos: f64) -> (usize, usize, f64) {
    if pos <= centres[0] {
        return (0, 0, 0.0);
    }
    if pos >= centres[centres.len() - 1] {
        let last = centres.len() - 1;
        return (last, last, 0.0);
    }
    let mut t = 0;
    while centres[t + 1] < pos {
        t += 1;
    }
    let span = centres[t + 1] - centres[t];
    (t, t + 1, (pos - centres[t]) / span)
}

fn tile_map(img: &RasterImage, x0: usize, x1: usize, y0: usize, y1: usize, clip: f64) -> TileMap {
    let mut hist = [0.0f64; CLAHE_BINS];
    let mut area = 0usize;
    for y in y0..y1 {
        for x in x0..x1 {
            hist[bin_of(img.get(x, y))] += 1.0;
            area += 1;
        }
    }
    if area == 0 {
        return TileMap::Identity;
    }
    if hist.iter().any(|&c| c == area as f64) {
        return TileMap::Identity;
    }

    let cap = clip * area as f64;
    let mut excess = 0.0;
    for c in hist.iter_mut() {
        if *c > cap {
            excess += *c - cap;
            *c = cap;
        }
    }
    let share = excess / CLAHE_BINS as f64;
    let mut lut = Box::new([0.0f64; CLAHE_BINS]);
    let mut cum = 0.0;
    let inv_area = 1.0 / area as f64;
    for b in 0..CLAHE_BINS {
        cum += hist[b] + share;
        lut[b] = (cum * inv_area).min(1.0);
    }
    TileMap::Lut(lut)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_image_equalises_to_cdf_values() {
        // Half the pixels at 0.3, half at 0.7; single tile, no clipping.
        let img = RasterImage::from_fn(16, 16, |x, _| if x < 8 { 0.3 } else { 0.7 });
        let out = clahe(&img, 1, 1.0).unwrap();
        for y in 0..16 {
            assert!((out.get(0, y) - 0.5).abs() < 1e-12);
            assert!((out.get(15, y) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_clip_is_identity_within_one_bin() {
        let img = RasterImage::from_fn(32, 32, |x, y| ((x * 11 + y * 5) % 64) as f64 / 63.0);
        let out = clahe(&img, 1, 1e-9).unwrap();
        for (a, b) in img.data().iter().zip(out.data()) {
            assert!(
                (a - b).abs() <= 2.0 / CLAHE_BINS as f64 + 1e-9,
                "{a} mapped to {b}"
            );
        }
    }

    #[test]
    fn constant_image_is_unchanged() {
        let img = RasterImage::from_fn(20, 20, |_, _| 0.37);
        let out = clahe(&img, 4, 0.01).unwrap();
        assert_eq!(img, out);
    }

    #[test]
    fn equalised_cdf_is_uniform_on_support() {
        let img = RasterImage::from_fn(64, 64, |x, y| {
            let t = (x + 64 * y) as f64 / (64.0 * 64.0);
            t * t
        });
        let out = clahe(&img, 1, 1.0).unwrap();
        let n = out.data().len() as f64;
        let mut hist = [0.0f64; CLAHE_BINS];
        for v in img.data() {
            hist[bin_of(*v)] += 1.0;
        }
        let max_bin_mass = hist.iter().fold(0.0f64, |a, &b| a.max(b)) / n;
        let mut vals: Vec<f64> = out.data().to_vec();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Empirical CDF at each output value must sit within one bin's mass
        // of the value itself (output = CDF of input by construction).
        for (k, v) in vals.iter().enumerate() {
            let ecdf = (k + 1) as f64 / n;
            assert!(
                (ecdf - v).abs() <= max_bin_mass + 1e-9,
                "ecdf {ecdf} vs value {v}"
            );
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        let img = RasterImage::new(16, 16);
        assert!(clahe(&img, 0, 0.5).is_err());
        assert!(clahe(&img, 17, 0.5).is_err());
        assert!(clahe(&img, 2, 0.0).is_err());
        assert!(clahe(&img, 2, 1.5).is_err());
    }

    #[test]
    fn output_stays_in_range_with_tiling() {
        let img = RasterImage::from_fn(50, 41, |x, y| {
            0.5 + 0.5 * ((x as f64 / 9.0).sin() * (y as f64 / 7.0).cos())
        });
        let out = clahe(&img, 5, 0.02).unwrap();
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
