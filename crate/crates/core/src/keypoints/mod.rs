//! Keypoint detection and description.
//!
//! Two detectors share one 64-dimensional descriptor:
//!
//! * multi-scale Harris corners for engraved/struck designs (coins), and
//! * maximally stable extremal regions for surface decoration (ceramics).
//!
//! The descriptor is a 4x4 spatial grid of 4-sector gradient-orientation
//! histograms over a scale-proportional patch, normalised to unit length.
//! A circular Hough transform locates the physical object so matches can
//! be restricted to it.

mod circle;
mod harris;
mod io;
mod mser;

pub use circle::detect_coin_circle;
pub use harris::detect_and_describe;
pub use io::{export_descriptors, import_descriptors};
pub use mser::{detect_mser_features, mser_regions, MserRegion};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of every descriptor row.
pub const DESCRIPTOR_WIDTH: usize = 64;

/// A detected interest point in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    /// Sub-pixel column coordinate.
    pub x: f64,
    /// Sub-pixel row coordinate.
    pub y: f64,
    /// Detection scale (pixels).
    pub scale: f64,
    /// Detector response; larger is stronger.
    pub strength: f64,
}

/// Keypoints of one image together with their descriptor rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointDescriptorSet {
    pub image_id: String,
    pub keypoints: Vec<Keypoint>,
    descriptors: Vec<f64>,
}

impl KeypointDescriptorSet {
    pub fn empty(image_id: impl Into<String>) -> Self {
        KeypointDescriptorSet {
            image_id: image_id.into(),
            keypoints: Vec::new(),
            descriptors: Vec::new(),
        }
    }

    /// Assembles a set from parts; the descriptor buffer must hold one
    /// unit-norm row of [`DESCRIPTOR_WIDTH`] finite values per keypoint.
    pub fn from_parts(
        image_id: impl Into<String>,
        keypoints: Vec<Keypoint>,
        descriptors: Vec<f64>,
    ) -> Result<Self> {
        if descriptors.len() != keypoints.len() * DESCRIPTOR_WIDTH {
            return Err(Error::validation("descriptor buffer does not match keypoint count"));
        }
        if descriptors.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("descriptors must be finite"));
        }
        for row in descriptors.chunks_exact(DESCRIPTOR_WIDTH) {
            let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::validation(format!("descriptor row norm {norm} is not 1")));
            }
        }
        Ok(KeypointDescriptorSet { image_id: image_id.into(), keypoints, descriptors })
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn descriptor(&self, i: usize) -> &[f64] {
        &self.descriptors[i * DESCRIPTOR_WIDTH..(i + 1) * DESCRIPTOR_WIDTH]
    }

    pub fn descriptors(&self) -> &[f64] {
        &self.descriptors
    }

    pub(crate) fn push(&mut self, kp: Keypoint, descriptor: &[f64; DESCRIPTOR_WIDTH]) {
        self.keypoints.push(kp);
        self.descriptors.extend_from_slice(descriptor);
    }
}

/// Detected circular outline of the physical object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinCircle {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl CoinCircle {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.cx;
        let dy = y - self.cy;
        dx * dx + dy * dy <= self.radius * self.radius
    }
}
