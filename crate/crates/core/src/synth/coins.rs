//! Procedural dies and struck coins.
//!
//! Each die engraves a sun-and-rays motif ringed by pellets, with
//! per-die jitter in ray angles, pellet placement and sizes: the fine
//! structure that makes two dies distinguishable. A strike then applies
//! a random rotation and offset, wear (blur plus contrast loss), a
//! lighting gradient and sensor noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{stream_seed, GroundTruth};
use crate::edges::gaussian_blur;
use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Square side of every generated coin image.
pub const COIN_IMAGE_SIZE: usize = 256;

const CENTRE: f64 = COIN_IMAGE_SIZE as f64 / 2.0;
const COIN_RADIUS: f64 = 112.0;
const BACKGROUND: f64 = 0.08;
/// Width of the soft edge band, in pixels, on every engraved element.
const EDGE_SOFTNESS: f64 = 1.2;

const DIE_STREAM: u64 = 0;
const COIN_STREAM: u64 = 1;

/// Motif parameters shared by all dies of a corpus; per-die variation
/// comes from the jitter applied to each element.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SynthDieSpec {
    pub seed: u64,
    pub n_rays: usize,
    /// Pellet border count; the motif carries 27 to 31 pellets.
    pub n_pellets: usize,
    /// Magnitude of per-die engraving variation, in pixels.
    pub engraving_jitter: f64,
}

impl Default for SynthDieSpec {
    fn default() -> Self {
        SynthDieSpec { seed: 0, n_rays: 12, n_pellets: 29, engraving_jitter: 1.5 }
    }
}

impl SynthDieSpec {
    pub fn validate(&self) -> Result<()> {
        if !(27..=31).contains(&self.n_pellets) {
            return Err(Error::validation(format!(
                "n_pellets must lie in [27, 31], got {}",
                self.n_pellets
            )));
        }
        if self.n_rays == 0 {
            return Err(Error::validation("n_rays must be at least 1"));
        }
        if !(self.engraving_jitter >= 0.0) || !self.engraving_jitter.is_finite() {
            return Err(Error::validation("engraving_jitter must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Per-coin strike variation. All fields are magnitudes; zero
/// everywhere reproduces the die image exactly.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct StrikeSpec {
    /// Rotation drawn from [-rotation_range, rotation_range] radians.
    pub rotation_range: f64,
    /// Offset per axis drawn from [-translation_range, translation_range] pixels.
    pub translation_range: f64,
    /// Erosion fraction in [0, 1]: blur radius and contrast loss.
    pub wear: f64,
    /// Standard deviation of additive Gaussian pixel noise.
    pub noise: f64,
    /// Maximum amplitude of the linear lighting gradient.
    pub lighting: f64,
}

impl Default for StrikeSpec {
    fn default() -> Self {
        // Rotation stays under half the pellet pitch (tau/29 ~ 0.217)
        // so nearest-pellet correspondence is unambiguous, matching
        // catalogue photography where coins are set upright.
        StrikeSpec {
            rotation_range: 0.06,
            translation_range: 6.0,
            wear: 0.2,
            noise: 0.02,
            lighting: 0.10,
        }
    }
}

impl StrikeSpec {
    pub const IDENTITY: StrikeSpec = StrikeSpec {
        rotation_range: 0.0,
        translation_range: 0.0,
        wear: 0.0,
        noise: 0.0,
        lighting: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rotation_range", self.rotation_range),
            ("translation_range", self.translation_range),
            ("wear", self.wear),
            ("noise", self.noise),
            ("lighting", self.lighting),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("{name} must be finite and non-negative")));
            }
        }
        if self.wear > 1.0 {
            return Err(Error::validation("wear is a fraction and cannot exceed 1"));
        }
        Ok(())
    }
}

/// Soft-edged coverage of a disc boundary: 1 well inside, 0 well
/// outside, linear across the softness band.
fn coverage(signed_dist_inside: f64) -> f64 {
    (signed_dist_inside / EDGE_SOFTNESS + 0.5).clamp(0.0, 1.0)
}

fn smallest_angle(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % std::f64::consts::TAU;
    if d > std::f64::consts::PI {
        d -= std::f64::consts::TAU;
    }
    if d < -std::f64::consts::PI {
        d += std::f64::consts::TAU;
    }
    d.abs()
}

struct DieGeometry {
    sun_centre: (f64, f64),
    sun_radius: f64,
    rays: Vec<(f64, f64, f64)>,
    pellets: Vec<(f64, f64, f64)>,
}

/// Draws a per-die element count near `base`, clamped to the motif's
/// allowed band.
fn per_die_count(rng: &mut ChaCha20Rng, base: usize, spread: i64, lo: usize, hi: usize) -> usize {
    let drawn = base as i64 + rng.random_range(-spread..=spread);
    drawn.clamp(lo as i64, hi as i64) as usize
}

/// Renders one die face. All stochastic engraving choices come from the
/// supplied stream, so a die is a pure function of its seed. Dies differ
/// structurally, not just in pixel noise: each draws its own pellet
/// count (within the motif's 27-31 band) and ray count, and every
/// element carries its own engraving offsets.
pub fn render_die(spec: &SynthDieSpec, die_seed: u64) -> Result<RasterImage> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(die_seed);
    let jit = spec.engraving_jitter;
    let n_pellets = per_die_count(&mut rng, spec.n_pellets, 2, 27, 31);
    let n_rays = per_die_count(&mut rng, spec.n_rays, 1, 1, spec.n_rays + 1);
    let sun_centre = (
        CENTRE + rng.random_range(-jit..=jit) * 0.8,
        CENTRE + rng.random_range(-jit..=jit) * 0.8,
    );
    let sun_radius = 26.0 + rng.random_range(-1.2 * jit..=1.2 * jit);
    // Each ray: (angle, outer radius, half-width at the base).
    let rays: Vec<(f64, f64, f64)> = (0..n_rays)
        .map(|j| {
            let base = j as f64 / n_rays as f64 * std::f64::consts::TAU;
            (
                base + rng.random_range(-jit..=jit) * 0.04,
                66.0 + rng.random_range(-2.5 * jit..=2.5 * jit),
                0.085 + rng.random_range(-0.025..=0.025),
            )
        })
        .collect();
    // Each pellet: (angle, orbit radius, pellet radius).
    let pellets: Vec<(f64, f64, f64)> = (0..n_pellets)
        .map(|k| {
            let base = k as f64 / n_pellets as f64 * std::f64::consts::TAU;
            (
                base + rng.random_range(-jit..=jit) * 0.025,
                94.0 + rng.random_range(-jit..=jit),
                4.6 + rng.random_range(-0.7..=0.7),
            )
        })
        .collect();
    let geo = DieGeometry { sun_centre, sun_radius, rays, pellets };

    Ok(RasterImage::from_fn(COIN_IMAGE_SIZE, COIN_IMAGE_SIZE, |px, py| {
        let x = px as f64;
        let y = py as f64;
        let r = ((x - CENTRE).powi(2) + (y - CENTRE).powi(2)).sqrt();
        let blank_cov = coverage(COIN_RADIUS - r);
        if blank_cov == 0.0 {
            return BACKGROUND;
        }
        // Slightly domed flan.
        let mut v = 0.50 + 0.06 * (1.0 - (r / COIN_RADIUS).powi(2));
        // Rim ring.
        let rim_cov = coverage(3.0 - (r - 106.0).abs());
        v = v + rim_cov * (0.72 - v);
        // Sun disc.
        let sr = ((x - geo.sun_centre.0).powi(2) + (y - geo.sun_centre.1).powi(2)).sqrt();
        let sun_cov = coverage(geo.sun_radius - sr);
        v = v + sun_cov * (0.90 - v);
        // Rays: tapered wedges from the sun towards the pellet ring.
        let theta = (y - CENTRE).atan2(x - CENTRE);
        for &(angle, outer, half_width) in &geo.rays {
            if r < geo.sun_radius || r > outer + EDGE_SOFTNESS {
                continue;
            }
            let taper = 1.0 - 0.6 * ((r - geo.sun_radius) / (outer - geo.sun_radius)).clamp(0.0, 1.0);
            let ang_dist = smallest_angle(theta, angle) * r;
            let wedge_cov = coverage(half_width * taper * r - ang_dist)
                * coverage(outer - r)
                * coverage(r - geo.sun_radius);
            v = v + wedge_cov * (0.82 - v);
        }
        // Pellet border.
        for &(angle, orbit, radius) in &geo.pellets {
            let cx = CENTRE + orbit * angle.cos();
            let cy = CENTRE + orbit * angle.sin();
            let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
            if d < radius + EDGE_SOFTNESS {
                let cov = coverage(radius - d);
                v = v + cov * (0.88 - v);
            }
        }
        let v = v.clamp(0.0, 1.0);
        BACKGROUND + blank_cov * (v - BACKGROUND)
    }))
}

/// Strikes one coin from a die image. The stream drives the strike
/// pose, lighting and noise; the die itself is fixed.
fn strike_coin(die: &RasterImage, strike: &StrikeSpec, coin_seed: u64) -> RasterImage {
    let mut rng = ChaCha20Rng::seed_from_u64(coin_seed);
    let theta = rng.random_range(-strike.rotation_range..=strike.rotation_range);
    let tx = rng.random_range(-strike.translation_range..=strike.translation_range);
    let ty = rng.random_range(-strike.translation_range..=strike.translation_range);
    let light_amp = rng.random_range(0.0..=strike.lighting);
    let light_dir = rng.random_range(0.0..=std::f64::consts::TAU);

    let mut img = if theta == 0.0 && tx == 0.0 && ty == 0.0 {
        die.clone()
    } else {
        let (sin_t, cos_t) = theta.sin_cos();
        let (w, h) = (die.width(), die.height());
        RasterImage::from_fn(w, h, |px, py| {
            // Inverse map: undo translation, then rotation, about centre.
            let dx = px as f64 - CENTRE - tx;
            let dy = py as f64 - CENTRE - ty;
            let sx = CENTRE + cos_t * dx + sin_t * dy;
            let sy = CENTRE - sin_t * dx + cos_t * dy;
            if sx < 0.0 || sy < 0.0 || sx > (w - 1) as f64 || sy > (h - 1) as f64 {
                BACKGROUND
            } else {
                die.sample_bilinear(sx, sy)
            }
        })
    };

    if strike.wear > 0.0 {
        let blurred = gaussian_blur(&img, 2.5 * strike.wear);
        let flatten = 1.0 - 0.45 * strike.wear;
        img = RasterImage::from_fn(img.width(), img.height(), |x, y| {
            0.5 + flatten * (blurred.get(x, y) - 0.5)
        });
    }

    let (dir_c, dir_s) = light_dir.sin_cos();
    let normal = if strike.noise > 0.0 {
        Some(Normal::new(0.0, strike.noise).expect("validated noise std"))
    } else {
        None
    };
    RasterImage::from_fn(img.width(), img.height(), |x, y| {
        let mut v = img.get(x, y);
        v += light_amp * ((x as f64 - CENTRE) * dir_c + (y as f64 - CENTRE) * dir_s) / CENTRE;
        if let Some(n) = &normal {
            v += n.sample(&mut rng);
        }
        v.clamp(0.0, 1.0)
    })
}

/// Generates `n_dies * coins_per_die` coin images with die labels as
/// ground truth. Every die and every coin owns an independent stream of
/// the master seed, and coins are struck in parallel.
pub fn synth_coin_corpus(
    n_dies: usize,
    coins_per_die: usize,
    die_spec: &SynthDieSpec,
    strike: &StrikeSpec,
    seed: u64,
) -> Result<(Vec<RasterImage>, GroundTruth)> {
    if n_dies == 0 || coins_per_die == 0 {
        return Err(Error::validation("n_dies and coins_per_die must be at least 1"));
    }
    die_spec.validate()?;
    strike.validate()?;
    let master = seed ^ die_spec.seed.rotate_left(17);
    let dies = (0..n_dies)
        .map(|d| render_die(die_spec, stream_seed(master, DIE_STREAM, d as u64)))
        .collect::<Result<Vec<_>>>()?;
    let n_items = n_dies * coins_per_die;
    let images: Vec<RasterImage> = (0..n_items)
        .into_par_iter()
        .map(|item| {
            let die = item / coins_per_die;
            strike_coin(&dies[die], strike, stream_seed(master, COIN_STREAM, item as u64))
        })
        .collect();
    let item_ids = (0..n_items)
        .map(|item| format!("die{:02}_coin{:02}", item / coins_per_die, item % coins_per_die))
        .collect();
    let labels = (0..n_items).map(|item| item / coins_per_die).collect();
    let truth = GroundTruth {
        item_ids,
        labels,
        adjacency: Vec::new(),
        offsets: vec![(0.0, 0.0); n_items],
    };
    Ok((images, truth))
}
