//! Structural similarity between equally sized images.

use crate::error::{Error, Result};
use crate::matching::SimilarityTransform;
use crate::raster::RasterImage;

const WINDOW: usize = 8;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// Mean local SSIM over non-overlapping 8x8 windows (the whole image if a
/// side is smaller). Population statistics per window; constants for the
/// [0, 1] dynamic range.
pub fn ssim(x: &RasterImage, y: &RasterImage) -> Result<f64> {
    if x.width() != y.width() || x.height() != y.height() {
        return Err(Error::validation(format!(
            "image sizes differ: {}x{} vs {}x{}",
            x.width(),
            y.width(),
            x.height(),
            y.height()
        )));
    }
    let (w, h) = (x.width(), x.height());
    let (wx, wy) = (WINDOW.min(w), WINDOW.min(h));
    let mut total = 0.0;
    let mut windows = 0usize;
    let mut by = 0;
    while by + wy <= h {
        let mut bx = 0;
        while bx + wx <= w {
            total += window_ssim(x, y, bx, by, wx, wy);
            windows += 1;
            bx += wx;
        }
        by += wy;
    }
    Ok(total / windows as f64)
}

fn window_ssim(x: &RasterImage, y: &RasterImage, bx: usize, by: usize, wx: usize, wy: usize) -> f64 {
    let n = (wx * wy) as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for dy in 0..wy {
        for dx in 0..wx {
            let a = x.get(bx + dx, by + dy);
            let b = y.get(bx + dx, by + dy);
            sx += a;
            sy += b;
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
        }
    }
    let (mx, my) = (sx / n, sy / n);
    let vx = sxx / n - mx * mx;
    let vy = syy / n - my * my;
    let cov = sxy / n - mx * my;
    ((2.0 * mx * my + C1) * (2.0 * cov + C2))
        / ((mx * mx + my * my + C1) * (vx + vy + C2))
}

/// Resamples `img` into the target frame of `transform` (which maps
/// `img`'s coordinates onto the target's): each output pixel is the
/// bilinear sample of `img` at the inverse-mapped position, zero when
/// that falls outside `img`.
pub fn warp_similarity(img: &RasterImage, transform: &SimilarityTransform) -> RasterImage {
    let inv = transform.inverse();
    RasterImage::from_fn(img.width(), img.height(), |x, y| {
        let (sx, sy) = inv.apply((x as f64, y as f64));
        if sx < 0.0 || sy < 0.0 || sx > (img.width() - 1) as f64 || sy > (img.height() - 1) as f64 {
            0.0
        } else {
            img.sample_bilinear(sx, sy)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(seed: u64, w: usize, h: usize) -> RasterImage {
        let mut state = seed | 1;
        RasterImage::from_fn(w, h, |x, y| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let noise = (state >> 40) as f64 / (1u64 << 24) as f64;
            0.25 + 0.5 * ((x as f64 * 0.37).sin() * (y as f64 * 0.23).cos() * 0.5 + 0.5) * 0.8
                + 0.1 * noise
        })
    }

    #[test]
    fn identical_images_score_one() {
        let img = textured(5, 32, 24);
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_zero_versus_constant_one_closed_form() {
        let a = RasterImage::from_fn(16, 16, |_, _| 0.0);
        let b = RasterImage::from_fn(16, 16, |_, _| 1.0);
        // Zero variances and zero means on one side collapse the formula
        // to C1 / (1 + C1).
        let expect = C1 / (1.0 + C1);
        assert!((ssim(&a, &b).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 9.999e-5).abs() < 1e-8);
    }

    #[test]
    fn contrast_inverted_window_matches_per_window_oracle() {
        let base = textured(11, 16, 16);
        // Invert the top-left 8x8 window about its own mean.
        let mut mean = 0.0;
        for y in 0..8 {
            for x in 0..8 {
                mean += base.get(x, y);
            }
        }
        mean /= 64.0;
        let flipped = RasterImage::from_fn(16, 16, |x, y| {
            if x < 8 && y < 8 {
                (2.0 * mean - base.get(x, y)).clamp(0.0, 1.0)
            } else {
                base.get(x, y)
            }
        });

        // Oracle: mean of hand-computed per-window scores.
        let mut scores = Vec::new();
        for &(bx, by) in &[(0usize, 0usize), (8, 0), (0, 8), (8, 8)] {
            let n = 64.0;
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..8 {
                for dx in 0..8 {
                    let a = base.get(bx + dx, by + dy);
                    let b = flipped.get(bx + dx, by + dy);
                    sx += a;
                    sy += b;
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                }
            }
            let (mx, my) = (sx / n, sy / n);
            let (vx, vy) = (sxx / n - mx * mx, syy / n - my * my);
            let cov = sxy / n - mx * my;
            scores.push(
                (2.0 * mx * my + C1) * (2.0 * cov + C2)
                    / ((mx * mx + my * my + C1) * (vx + vy + C2)),
            );
        }
        let want: f64 = scores.iter().sum::<f64>() / 4.0;
        let got = ssim(&base, &flipped).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!(got < 1.0);
        assert!(scores[1] > 0.999 && scores[2] > 0.999 && scores[3] > 0.999);
        assert!(scores[0] < 0.5, "inverted window still scores {}", scores[0]);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        for seed in 1..8u64 {
            let a = textured(seed, 24, 24);
            let b = textured(seed + 100, 24, 24);
            let ab = ssim(&a, &b).unwrap();
            let ba = ssim(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-12);
            assert!((-1.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn small_images_use_a_single_window() {
        let a = RasterImage::from_fn(5, 5, |x, y| ((x + y) % 2) as f64);
        let b = RasterImage::from_fn(5, 5, |x, y| ((x + y) % 2) as f64);
        assert!((ssim(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_sizes_are_rejected() {
        let a = RasterImage::new(8, 8);
        let b = RasterImage::new(8, 9);
        assert!(ssim(&a, &b).is_err());
    }

    #[test]
    fn translation_warp_realigns_a_shifted_image() {
        let img = textured(23, 40, 32);
        // b is img shifted 3 px right, zero-filled on the left.
        let shifted = RasterImage::from_fn(40, 32, |x, y| {
            if x >= 3 {
                img.get(x - 3, y)
            } else {
                0.0
            }
        });
        let t = SimilarityTransform { rotation: 0.0, scale: 1.0, translation: (3.0, 0.0) };
        let warped = warp_similarity(&img, &t);
        assert!((ssim(&warped, &shifted).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identity_warp_returns_the_image() {
        let img = textured(3, 20, 20);
        let warped = warp_similarity(&img, &SimilarityTransform::identity());
        for (a, b) in img.data().iter().zip(warped.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
