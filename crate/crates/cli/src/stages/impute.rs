//! Fills missing dissimilarities by the subdominant ultrametric.

use std::fs::File;
use std::io::BufReader;

use artefact_core::dissimilarity::{read_matrix_csv, ultrametric_impute, write_matrix_csv};

use crate::artifacts::{self, Workspace};
use crate::config::RunConfig;
use crate::error::Result;

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ws = Workspace::from_config(cfg);
    let path = ws.require(artifacts::RAW_DISTANCES, "dist")?;
    let (matrix, ids) = read_matrix_csv(BufReader::new(File::open(&path)?))?;
    let before = matrix.missing_count();
    let complete = ultrametric_impute(&matrix);
    let writer = super::buf_writer(&ws.output(artifacts::IMPUTED_DISTANCES)?)?;
    write_matrix_csv(&complete, &ids, writer)?;
    println!("impute: filled {} of {} entries", before - complete.missing_count(), before);
    Ok(())
}
