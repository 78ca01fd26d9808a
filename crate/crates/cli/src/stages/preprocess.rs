//! Normalises corpus images and freezes the item order for the run.

use artefact_core::raster::{load_image, preprocess, save_pgm};
use rayon::prelude::*;

use crate::artifacts::{self, Workspace};
use crate::config::RunConfig;
use crate::error::Result;

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ws = Workspace::from_config(cfg);
    let items = super::corpus_item_ids(&ws)?;
    items.par_iter().try_for_each(|id| -> Result<()> {
        let img = load_image(&ws.input(artifacts::corpus_image(id)))?;
        let out = preprocess(&img, &cfg.preprocess)?;
        save_pgm(&out, &ws.output(artifacts::preprocessed_image(id))?)?;
        Ok(())
    })?;
    artifacts::write_json(&ws.output(artifacts::ITEMS)?, &items)?;
    println!("preprocess: {} images normalised", items.len());
    Ok(())
}
