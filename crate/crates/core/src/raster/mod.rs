//! Greyscale raster images and the photograph preprocessing chain.
//!
//! Images are single-channel, row-major `f64` buffers with intensities in
//! `[0, 1]`. The preprocessing chain used before feature detection is:
//! resize to a square working resolution, total-variation denoise, local
//! contrast enhancement (CLAHE), then a second denoising pass to remove
//! enhancement artefacts.

mod clahe;
mod io;
mod tv;

pub use clahe::{clahe, CLAHE_BINS};
pub use io::{load_image, load_pgm, save_pgm, save_png_gray};
pub use tv::{total_variation, tv_denoise, TV_DUAL_STEP};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-channel image, row-major, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RasterImage {
    /// All-zero image of the given dimensions.
    pub fn new(width: usize, height: usize) -> Self {
        RasterImage { width, height, data: vec![0.0; width * height] }
    }

    /// Wraps a row-major buffer. Fails if the length does not match or any
    /// value is non-finite or outside `[0, 1]`.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::validation(format!(
                "buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::validation("intensities must be finite and in [0, 1]"));
        }
        Ok(RasterImage { width, height, data })
    }

    /// Builds an image by evaluating `f(x, y)`; values are clamped to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        RasterImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    /// Stores a value, clamped to `[0, 1]` to preserve the type invariant.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = v.clamp(0.0, 1.0);
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Bilinear sample at continuous coordinates; coordinates are clamped to
    /// the image rectangle, so out-of-range reads replicate the border.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bot = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }
}

/// Parameters of the preprocessing chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// Side of the square working resolution the photograph is stretched to.
    pub target_size: usize,
    /// Fidelity weight of the TV data term; larger keeps more detail.
    pub tv_weight: f64,
    /// Dual-projection iterations per TV pass.
    pub tv_iterations: usize,
    /// CLAHE grid is `clahe_tiles x clahe_tiles`.
    pub clahe_tiles: usize,
    /// Histogram clip limit as a fraction of a tile's pixel count.
    pub clahe_clip: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_size: 300,
            tv_weight: 10.0,
            tv_iterations: 100,
            clahe_tiles: 8,
            clahe_clip: 0.01,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_size == 0 {
            return Err(Error::validation("target_size must be positive"));
        }
        if !self.tv_weight.is_finite() || self.tv_weight < 0.0 {
            return Err(Error::validation("tv_weight must be finite and non-negative"));
        }
        if self.clahe_tiles == 0 {
            return Err(Error::validation("clahe_tiles must be positive"));
        }
        if !(self.clahe_clip > 0.0 && self.clahe_clip <= 1.0) {
            return Err(Error::validation("clahe_clip must be in (0, 1]"));
        }
        Ok(())
    }
}

/// Bilinear stretch to a square `target x target` image (aspect is not
/// preserved; collections are photographed in a fixed frame).
pub fn resize_bilinear(img: &RasterImage, target: usize) -> Result<RasterImage> {
    if target == 0 {
        return Err(Error::validation("resize target must be positive"));
    }
    if img.width == 0 || img.height == 0 {
        return Err(Error::validation("cannot resize an empty image"));
    }
    let sx = img.width as f64 / target as f64;
    let sy = img.height as f64 / target as f64;
    let mut out = RasterImage::new(target, target);
    for y in 0..target {
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        for x in 0..target {
            let src_x = (x as f64 + 0.5) * sx - 0.5;
            let v = img.sample_bilinear(src_x, src_y);
            out.set(x, y, v);
        }
    }
    Ok(out)
}

/// Full enhancement chain: resize, TV denoise, CLAHE, second TV pass.
pub fn preprocess(img: &RasterImage, cfg: &PreprocessConfig) -> Result<RasterImage> {
    cfg.validate()?;
    let resized = resize_bilinear(img, cfg.target_size)?;
    let denoised = tv_denoise(&resized, cfg.tv_weight, cfg.tv_iterations)?;
    let enhanced = clahe(&denoised, cfg.clahe_tiles, cfg.clahe_clip)?;
    tv_denoise(&enhanced, cfg.tv_weight, cfg.tv_iterations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_buffers() {
        assert!(RasterImage::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(RasterImage::from_vec(2, 2, vec![0.0, 0.5, 1.0, 1.5]).is_err());
        assert!(RasterImage::from_vec(2, 2, vec![0.0, 0.5, 1.0, f64::NAN]).is_err());
        assert!(RasterImage::from_vec(2, 2, vec![0.0, 0.25, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn resize_to_same_size_is_identity() {
        let img = RasterImage::from_fn(7, 7, |x, y| ((x * 13 + y * 7) % 10) as f64 / 10.0);
        let out = resize_bilinear(&img, 7).unwrap();
        for (a, b) in img.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn resize_checkerboard_keeps_corner_values() {
        let img = RasterImage::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let out = resize_bilinear(&img, 4).unwrap();
        assert_eq!(out.get(0, 0), 0.0);
        assert_eq!(out.get(3, 0), 1.0);
        assert_eq!(out.get(0, 3), 1.0);
        assert_eq!(out.get(3, 3), 0.0);
    }

    #[test]
    fn resize_rejects_zero_target() {
        let img = RasterImage::new(4, 4);
        assert!(resize_bilinear(&img, 0).is_err());
    }

    #[test]
    fn preprocess_stays_in_range_and_is_deterministic() {
        let img = RasterImage::from_fn(40, 30, |x, y| {
            0.5 + 0.4 * ((x as f64 * 0.7).sin() * (y as f64 * 0.3).cos())
        });
        let cfg = PreprocessConfig {
            target_size: 32,
            tv_iterations: 20,
            clahe_tiles: 4,
            ..PreprocessConfig::default()
        };
        let a = preprocess(&img, &cfg).unwrap();
        let b = preprocess(&img, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a.width(), 32);
        assert_eq!(a.height(), 32);
    }

    #[test]
    fn preprocess_rejects_bad_config() {
        let img = RasterImage::new(16, 16);
        let cfg = PreprocessConfig { clahe_clip: 0.0, ..PreprocessConfig::default() };
        assert!(preprocess(&img, &cfg).is_err());
    }
}
