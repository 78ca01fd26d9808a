//! Gaussian smoothing, Sobel gradients and Canny edge maps.
//!
//! Shared by circular-feature detection (gradient votes) and fragment
//! contour extraction (edge mask + tracing).

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Per-pixel image gradients (Sobel, scaled to intensity units per pixel).
#[derive(Debug, Clone)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
}

/// Binary edge mask plus the gradients it was thinned from.
#[derive(Debug, Clone)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
    pub gradients: GradientField,
}

impl EdgeMap {
    pub fn edge_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Separable Gaussian blur with kernel radius `ceil(3 sigma)` and
/// border replication. `sigma = 0` returns the input unchanged.
pub fn gaussian_blur(img: &RasterImage, sigma: f64) -> RasterImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let inv = -0.5 / (sigma * sigma);
    for k in -radius..=radius {
        kernel.push(((k * k) as f64 * inv).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= sum;
    }

    let (w, h) = (img.width() as i64, img.height() as i64);
    let src = img.data();
    let mut tmp = vec![0.0f64; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                let sx = (x + ki as i64 - radius).clamp(0, w - 1);
                acc += kv * src[(y * w + sx) as usize];
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = RasterImage::new(img.width(), img.height());
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                let sy = (y + ki as i64 - radius).clamp(0, h - 1);
                acc += kv * tmp[(sy * w + x) as usize];
            }
            out.data_mut()[(y * w + x) as usize] = acc.clamp(0.0, 1.0);
        }
    }
    out
}

/// Sobel gradients with border replication, divided by 8 so a unit ramp
/// reports unit slope.
pub fn sobel(img: &RasterImage) -> GradientField {
    let (w, h) = (img.width(), img.height());
    let at = |x: i64, y: i64| -> f64 {
        let cx = x.clamp(0, w as i64 - 1) as usize;
        let cy = y.clamp(0, h as i64 - 1) as usize;
        img.get(cx, cy)
    };
    let mut gx = vec![0.0f64; w * h];
    let mut gy = vec![0.0f64; w * h];
    let mut magnitude = vec![0.0f64; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let tl = at(x - 1, y - 1);
            let tc = at(x, y - 1);
            let tr = at(x + 1, y - 1);
            let ml = at(x - 1, y);
            let mr = at(x + 1, y);
            let bl = at(x - 1, y + 1);
            let bc = at(x, y + 1);
            let br = at(x + 1, y + 1);
            let sx = ((tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl)) / 8.0;
            let sy = ((bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr)) / 8.0;
            let i = (y as usize) * w + x as usize;
            gx[i] = sx;
            gy[i] = sy;
            magnitude[i] = (sx * sx + sy * sy).sqrt();
        }
    }
    GradientField { width: w, height: h, gx, gy, magnitude }
}

/// Canny edges: Gaussian blur, Sobel, non-maximum suppression along the
/// quantised gradient direction, then hysteresis from strong pixels
/// through weak ones (8-connected).
pub fn canny(img: &RasterImage, sigma: f64, t_low: f64, t_high: f64) -> Result<EdgeMap> {
    if !(t_low >= 0.0 && t_low < t_high) || !t_high.is_finite() {
        return Err(Error::validation("canny thresholds require 0 <= t_low < t_high"));
    }
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::validation("canny sigma must be finite and non-negative"));
    }
    let blurred = gaussian_blur(img, sigma);
    let grad = sobel(&blurred);
    let (w, h) = (grad.width, grad.height);
    let mag = &grad.magnitude;

    let mut thin = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m < t_low {
                continue;
            }
            let (dx, dy) = quantised_direction(grad.gx[i], grad.gy[i]);
            let fwd = neighbour_mag(mag, w, h, x as i64 + dx, y as i64 + dy);
            let bwd = neighbour_mag(mag, w, h, x as i64 - dx, y as i64 - dy);
            if m >= fwd && m >= bwd {
                thin[i] = true;
            }
        }
    }

    // Hysteresis: seed from strong pixels, grow through thinned weak ones.
    let mut mask = vec![false; w * h];
    let mut stack = Vec::new();
    for i in 0..w * h {
        if thin[i] && mag[i] >= t_high && !mask[i] {
            mask[i] = true;
            stack.push(i);
            while let Some(j) = stack.pop() {
                let (jx, jy) = ((j % w) as i64, (j / w) as i64);
                for ny in jy - 1..=jy + 1 {
                    for nx in jx - 1..=jx + 1 {
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let k = ny as usize * w + nx as usize;
                        if thin[k] && !mask[k] {
                            mask[k] = true;
                            stack.push(k);
                        }
                    }
                }
            }
        }
    }
    Ok(EdgeMap { width: w, height: h, mask, gradients: grad })
}

/// Maps a gradient vector to one of four pixel-step directions.
fn quantised_direction(gx: f64, gy: f64) -> (i64, i64) {
    let angle = gy.atan2(gx);
    let sector = ((angle + std::f64::consts::PI) / (std::f64::consts::PI / 4.0)).round() as i64 % 4;
    match sector.rem_euclid(4) {
        0 => (1, 0),
        1 => (1, 1),
        2 => (0, 1),
        _ => (-1, 1),
    }
}

fn neighbour_mag(mag: &[f64], w: usize, h: usize, x: i64, y: i64) -> f64 {
    if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
        0.0
    } else {
        mag[y as usize * w + x as usize]
    }
}
