//! Keypoint detection and description, plus the region-of-interest
//! circle used to gate matches.

use artefact_core::keypoints::{
    detect_and_describe, detect_coin_circle, detect_mser_features, export_descriptors,
};
use artefact_core::raster::load_image;
use artefact_core::{CoinCircle, KeypointDescriptorSet, RasterImage};
use rayon::prelude::*;

use crate::artifacts::{self, Workspace};
use crate::config::{Pipeline, RunConfig};
use crate::error::Result;

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ws = Workspace::from_config(cfg);
    let items = super::read_items(&ws)?;
    let per_item: Vec<(KeypointDescriptorSet, CoinCircle)> = items
        .par_iter()
        .map(|id| -> Result<_> {
            let img = load_image(&ws.require(artifacts::preprocessed_image(id), "preprocess")?)?;
            let mut set = describe(cfg, &img)?;
            set.image_id = id.clone();
            Ok((set, roi_circle(cfg, &img)))
        })
        .collect::<Result<_>>()?;

    let mut circles = Vec::with_capacity(per_item.len());
    let mut total = 0usize;
    for (id, (set, circle)) in items.iter().zip(&per_item) {
        total += set.len();
        let writer = super::buf_writer(&ws.output(artifacts::descriptor_file(id))?)?;
        export_descriptors(set, writer)?;
        circles.push(circle.clone());
    }
    artifacts::write_json(&ws.output(artifacts::CIRCLES)?, &circles)?;
    println!("detect: {} keypoints over {} images", total, items.len());
    Ok(())
}

fn describe(cfg: &RunConfig, img: &RasterImage) -> artefact_core::Result<KeypointDescriptorSet> {
    let d = &cfg.detect;
    if d.use_mser {
        detect_mser_features(img, d.mser_delta, d.mser_max_variation, d.mser_keep_fraction)
    } else {
        detect_and_describe(img, d.max_keypoints)
    }
}

/// Coins gate matches to the detected flan circle; sherd images (and
/// coins whose circle eludes the Hough transform, such as blank flans)
/// fall back to a circle covering the whole frame.
fn roi_circle(cfg: &RunConfig, img: &RasterImage) -> CoinCircle {
    if cfg.pipeline == Pipeline::Coins {
        let d = &cfg.detect;
        if let Ok(c) = detect_coin_circle(img, d.circle_r_min, d.circle_r_max) {
            return c;
        }
    }
    full_frame_circle(img)
}

pub(crate) fn full_frame_circle(img: &RasterImage) -> CoinCircle {
    let (w, h) = (img.width() as f64, img.height() as f64);
    CoinCircle { cx: w / 2.0, cy: h / 2.0, radius: (w * w + h * h).sqrt() / 2.0 + 1.0 }
}
