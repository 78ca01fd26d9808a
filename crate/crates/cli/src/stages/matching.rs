//! Landmark matching over every unordered image pair.

use artefact_core::matching::{estimate_alignment, match_pair, rank_landmarks_gp};
use artefact_core::CoinCircle;
use rayon::prelude::*;

use crate::artifacts::{self, PairMatchRecord, Workspace};
use crate::config::RunConfig;
use crate::error::Result;

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ws = Workspace::from_config(cfg);
    let items = super::read_items(&ws)?;
    let sets = super::load_descriptor_sets(&ws, &items)?;
    let circles: Vec<CoinCircle> =
        artifacts::read_json(&ws.require(artifacts::CIRCLES, "detect")?)?;
    if circles.len() != items.len() {
        return Err(crate::error::CliError::artifact(
            &ws.input(artifacts::CIRCLES),
            "circle count does not match item list",
        ));
    }

    let n = items.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let records: Vec<PairMatchRecord> = pairs
        .par_iter()
        .map(|&(a, b)| -> Result<PairMatchRecord> {
            let mut m = match_pair(&sets[a], &sets[b], &circles[a], &circles[b]);
            if cfg.matching.gp_rank && !m.matches.is_empty() {
                m = rank_landmarks_gp(&m, &sets[a])?;
            }
            let alignment = estimate_alignment(&m, &sets[a], &sets[b]).ok();
            let (alignment, alignment_residual) = match alignment {
                Some((t, r)) => (Some(t), Some(r)),
                None => (None, None),
            };
            Ok(PairMatchRecord { a, b, matches: m, alignment, alignment_residual })
        })
        .collect::<Result<_>>()?;

    let aligned = records.iter().filter(|r| r.alignment.is_some()).count();
    artifacts::write_json_compact(&ws.output(artifacts::MATCHES)?, &records)?;
    println!("match: {} pairs, {} with alignment", records.len(), aligned);
    Ok(())
}
