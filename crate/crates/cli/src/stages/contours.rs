//! Traces each corpus image's outer outline. Works on the raw images,
//! not the square-resized ones, so outline geometry keeps its aspect.

use artefact_core::contour::extract_contour;
use artefact_core::raster::load_image;
use artefact_core::ContourPolyline;
use rayon::prelude::*;

use crate::artifacts::{self, ContourArtifact, Workspace};
use crate::config::RunConfig;
use crate::error::Result;

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ws = Workspace::from_config(cfg);
    let items = super::corpus_item_ids(&ws)?;
    let c = &cfg.contours;
    let traced: Vec<(String, ContourPolyline)> = items
        .par_iter()
        .map(|id| -> Result<_> {
            let img = load_image(&ws.input(artifacts::corpus_image(id)))?;
            let contour = extract_contour(&img, c.sigma, c.t_low, c.t_high)?;
            Ok((id.clone(), contour))
        })
        .collect::<Result<_>>()?;
    let total: usize = traced.iter().map(|(_, c)| c.len()).sum();
    artifacts::write_json_compact(
        &ws.output(artifacts::CONTOURS)?,
        &ContourArtifact { contours: traced },
    )?;
    println!("contours: traced {} outlines ({} points)", items.len(), total);
    Ok(())
}
