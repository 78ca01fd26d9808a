//! Multi-scale Harris corner detection and descriptor extraction.

use crate::edges::{gaussian_blur, sobel};
use crate::error::{Error, Result};
use crate::keypoints::{Keypoint, KeypointDescriptorSet, DESCRIPTOR_WIDTH};
use crate::raster::RasterImage;

/// Detection scales (derivative sigma, pixels).
const SCALES: [f64; 3] = [1.0, 2.0, 4.0];
/// Harris trace weight.
const HARRIS_K: f64 = 0.05;
/// Responses below this fraction of the per-scale maximum are ignored.
const RELATIVE_THRESHOLD: f64 = 1e-3;
/// Descriptor patch is 16x16 samples spaced by the keypoint scale.
const PATCH: usize = 16;
const MIN_IMAGE_SIDE: usize = 32;

/// Detects up to `max_keypoints` multi-scale Harris corners, strongest
/// first (ties by row, column, then scale), each with a unit-norm
/// 64-dimensional gradient-histogram descriptor.
pub fn detect_and_describe(img: &RasterImage, max_keypoints: usize) -> Result<KeypointDescriptorSet> {
    if max_keypoints == 0 {
        return Err(Error::validation("max_keypoints must be positive"));
    }
    if img.width() < MIN_IMAGE_SIDE || img.height() < MIN_IMAGE_SIDE {
        return Err(Error::validation(format!(
            "image {}x{} below descriptor support ({MIN_IMAGE_SIDE} px)",
            img.width(),
            img.height()
        )));
    }

    let mut candidates: Vec<Keypoint> = Vec::new();
    for &scale in &SCALES {
        harris_at_scale(img, scale, &mut candidates);
    }
    candidates.sort_by(|a, b| {
        b.strength
            .partial_cmp(&a.strength)
            .unwrap()
            .then(a.y.partial_cmp(&b.y).unwrap())
            .then(a.x.partial_cmp(&b.x).unwrap())
            .then(a.scale.partial_cmp(&b.scale).unwrap())
    });

    let mut set = KeypointDescriptorSet::empty("");
    for kp in candidates {
        if set.len() == max_keypoints {
            break;
        }
        if let Some(desc) = describe_at(img, kp.x, kp.y, kp.scale) {
            set.push(kp, &desc);
        }
    }
    Ok(set)
}

fn harris_at_scale(img: &RasterImage, scale: f64, out: &mut Vec<Keypoint>) {
    let (w, h) = (img.width(), img.height());
    let blurred = gaussian_blur(img, scale);
    let grad = sobel(&blurred);

    let mut xx = RasterImage::new(w, h);
    let mut xy = RasterImage::new(w, h);
    let mut yy = RasterImage::new(w, h);
    let mut xy_offset = 0.0f64;
    // Gradient products are scaled into [0, 1] buffers so the blur helper
    // applies; Ixy is shifted by 0.5 to keep its sign.
    let g_scale = {
        let m = grad.magnitude.iter().cloned().fold(0.0f64, f64::max);
        if m > 0.0 {
            1.0 / (m * m)
        } else {
            0.0
        }
    };
    if g_scale == 0.0 {
        return;
    }
    for i in 0..w * h {
        xx.data_mut()[i] = (grad.gx[i] * grad.gx[i] * g_scale).clamp(0.0, 1.0);
        yy.data_mut()[i] = (grad.gy[i] * grad.gy[i] * g_scale).clamp(0.0, 1.0);
        xy.data_mut()[i] = (grad.gx[i] * grad.gy[i] * g_scale * 0.5 + 0.5).clamp(0.0, 1.0);
        xy_offset = 0.5;
    }
    let sigma_i = 2.0 * scale;
    let sxx = gaussian_blur(&xx, sigma_i);
    let sxy = gaussian_blur(&xy, sigma_i);
    let syy = gaussian_blur(&yy, sigma_i);

    let mut response = vec![0.0f64; w * h];
    for i in 0..w * h {
        let a = sxx.data()[i];
        let c = syy.data()[i];
        let b = (sxy.data()[i] - xy_offset) * 2.0;
        let det = a * c - b * b;
        let tr = a + c;
        response[i] = det - HARRIS_K * tr * tr;
    }
    let max_r = response.iter().cloned().fold(0.0f64, f64::max);
    if max_r <= 0.0 {
        return;
    }
    let threshold = max_r * RELATIVE_THRESHOLD;

    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let r = response[i];
            if r < threshold {
                continue;
            }
            let mut is_max = true;
            'nb: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let j = ((y as i64 + dy) as usize) * w + (x as i64 + dx) as usize;
                    if response[j] > r || (response[j] == r && j < i) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if !is_max {
                continue;
            }
            let dx = quadratic_offset(response[i - 1], r, response[i + 1]);
            let dy = quadratic_offset(response[i - w], r, response[i + w]);
            out.push(Keypoint {
                x: x as f64 + dx,
                y: y as f64 + dy,
                scale,
                strength: r,
            });
        }
    }
}

/// Sub-pixel peak offset from a 1-d quadratic fit, clamped to half a pixel.
fn quadratic_offset(prev: f64, centre: f64, next: f64) -> f64 {
    let denom = prev - 2.0 * centre + next;
    if denom.abs() < 1e-18 {
        return 0.0;
    }
    (0.5 * (prev - next) / denom).clamp(-0.5, 0.5)
}

/// Extracts the 4x4x4 gradient-orientation descriptor at `(x, y)`.
///
/// The sampling spacing shrinks near the border so the patch stays inside
/// the image; keypoints whose effective spacing would fall below half a
/// pixel yield `None` and are dropped.
pub(crate) fn describe_at(
    img: &RasterImage,
    x: f64,
    y: f64,
    scale: f64,
) -> Option<[f64; DESCRIPTOR_WIDTH]> {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let border = x.min(y).min(w - 1.0 - x).min(h - 1.0 - y) - 1.0;
    if border <= 0.0 {
        return None;
    }
    let half = PATCH as f64 / 2.0 - 0.5;
    let spacing = scale.min(border / (half + 1.0));
    if spacing < 0.5 {
        return None;
    }

    let mut patch = [[0.0f64; PATCH]; PATCH];
    for (i, row) in patch.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let sx = x + (j as f64 - half) * spacing;
            let sy = y + (i as f64 - half) * spacing;
            *v = img.sample_bilinear(sx, sy);
        }
    }

    let mut hist = [0.0f64; DESCRIPTOR_WIDTH];
    for i in 0..PATCH {
        for j in 0..PATCH {
            let jm = j.saturating_sub(1);
            let jp = (j + 1).min(PATCH - 1);
            let im = i.saturating_sub(1);
            let ip = (i + 1).min(PATCH - 1);
            let dx = patch[i][jp] - patch[i][jm];
            let dy = patch[ip][j] - patch[im][j];
            let mag = (dx * dx + dy * dy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let angle = dy.atan2(dx);
            let sector = (((angle + std::f64::consts::PI) / std::f64::consts::FRAC_PI_2)
                .floor() as usize)
                .min(3);
            let cell = (i / 4) * 4 + j / 4;
            hist[cell * 4 + sector] += mag;
        }
    }
    let norm: f64 = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return None;
    }
    for v in hist.iter_mut() {
        *v /= norm;
    }
    Some(hist)
}
