//! Condenses pair matches into the dissimilarity matrix. Pairs with
//! fewer than `min_landmarks` matches are recorded as missing.

use artefact_core::dissimilarity::{assemble_matrix, pair_metrics, write_matrix_csv};
use artefact_core::PairMetrics;
use rayon::prelude::*;

use crate::artifacts::{self, PairMatchRecord, Workspace};
use crate::config::RunConfig;
use crate::error::Result;

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ws = Workspace::from_config(cfg);
    let items = super::read_items(&ws)?;
    let images = super::load_preprocessed(&ws, &items)?;
    let records: Vec<PairMatchRecord> =
        artifacts::read_json(&ws.require(artifacts::MATCHES, "match")?)?;

    let floor = cfg.matching.min_landmarks;
    let pairs: Vec<(usize, usize, PairMetrics)> = records
        .par_iter()
        .map(|rec| -> Result<_> {
            let mut metrics = pair_metrics(
                &images[rec.a],
                &images[rec.b],
                &rec.matches,
                rec.alignment.as_ref(),
            )?;
            // A stricter configured floor widens the exclusion rule from
            // its built-in minimum of three matches.
            if metrics.n_matched < floor {
                metrics.n_matched = 0;
            }
            Ok((rec.a, rec.b, metrics))
        })
        .collect::<Result<_>>()?;

    let matrix = assemble_matrix(&pairs, items.len())?;
    let writer = super::buf_writer(&ws.output(artifacts::RAW_DISTANCES)?)?;
    write_matrix_csv(&matrix, &items, writer)?;
    println!(
        "dist: {}x{} matrix, {} missing entries",
        matrix.n(),
        matrix.n(),
        matrix.missing_count()
    );
    Ok(())
}
