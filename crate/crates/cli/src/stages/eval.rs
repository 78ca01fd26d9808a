//! Scores the run against the corpus ground truth and prints the
//! headline numbers.

use artefact_core::contour::subcontour_points;
use artefact_core::partition::{rand_index, vi_distance};
use artefact_core::{ContourPolyline, GroundTruth, MatchReport, Partition};

use crate::artifacts::{
    self, AssignmentArtifact, ContourArtifact, EvalReport, PartitionArtifact, Workspace,
};
use crate::config::{Pipeline, RunConfig};
use crate::error::{CliError, Result};

/// Two window centroids this close (in the vessel frame, px) count as
/// the same mating location; spans half a default window.
pub const MATING_TOLERANCE: f64 = 10.0;

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ws = Workspace::from_config(cfg);
    let truth = super::read_truth(&ws)?;
    let report = match cfg.pipeline {
        Pipeline::Coins => coins(&ws, &truth)?,
        Pipeline::CeramicsCluster => ceramics_cluster(&ws, &truth)?,
        Pipeline::CeramicsReconstruct => ceramics_reconstruct(cfg, &ws, &truth)?,
        Pipeline::Synth => unreachable!("guarded in stage dispatch"),
    };
    artifacts::write_json(&ws.output(artifacts::EVAL)?, &report)?;
    Ok(())
}

fn coins(ws: &Workspace, truth: &GroundTruth) -> Result<EvalReport> {
    let estimate: PartitionArtifact =
        artifacts::read_json(&ws.require(artifacts::PARTITION, "cluster")?)?;
    let baseline: PartitionArtifact =
        artifacts::read_json(&ws.require(artifacts::BASELINE, "cluster")?)?;
    let reference = truth.partition()?;
    let est = estimate.partition()?;
    let base = baseline.partition()?;

    let rand = rand_index(&est, &reference)?;
    let vi = vi_distance(&est, &reference)?;
    let baseline_rand = rand_index(&base, &reference)?;
    println!("Rand index vs truth: {rand:.2}");
    println!("cluster sizes: {}", artifacts::format_sizes(&estimate.cluster_sizes));
    println!("baseline Rand index vs truth: {baseline_rand:.2}");
    println!("baseline cluster sizes: {}", artifacts::format_sizes(&baseline.cluster_sizes));
    Ok(EvalReport::Coins {
        rand_index: rand,
        vi_distance: vi,
        cluster_sizes: estimate.cluster_sizes,
        baseline_rand_index: baseline_rand,
        baseline_cluster_sizes: baseline.cluster_sizes,
    })
}

fn ceramics_cluster(ws: &Workspace, truth: &GroundTruth) -> Result<EvalReport> {
    let assigned: AssignmentArtifact =
        artifacts::read_json(&ws.require(artifacts::ASSIGNMENTS, "kmeans")?)?;
    let mut labels = Vec::with_capacity(truth.item_ids.len());
    for id in &truth.item_ids {
        let found = assigned
            .assignments
            .iter()
            .find(|(aid, _)| aid == id)
            .ok_or_else(|| {
                CliError::artifact(
                    &ws.input(artifacts::ASSIGNMENTS),
                    format!("no assignment for item {id}"),
                )
            })?;
        labels.push(found.1);
    }
    let est = Partition::from_labels(&labels)?;
    let rand = rand_index(&est, &truth.partition()?)?;
    let mut sizes = est.cluster_sizes();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    println!("Rand index vs truth: {rand:.2}");
    println!("cluster sizes: {}", artifacts::format_sizes(&sizes));
    Ok(EvalReport::CeramicsCluster { rand_index: rand, cluster_sizes: sizes })
}

fn ceramics_reconstruct(
    cfg: &RunConfig,
    ws: &Workspace,
    truth: &GroundTruth,
) -> Result<EvalReport> {
    let contours: ContourArtifact =
        artifacts::read_json(&ws.require(artifacts::CONTOURS, "contours")?)?;
    let reports: Vec<MatchReport> =
        artifacts::read_json(&ws.require(artifacts::SHERD_MATCHES, "sherd-match")?)?;
    let score = score_reconstruction(
        &contours.contours,
        &reports,
        truth,
        cfg.sherd_match.top_k,
        MATING_TOLERANCE,
    )?;
    println!(
        "mating location in top {} windows: {}/{} ({:.2})",
        cfg.sherd_match.top_k, score.located, score.adjacent_pairs, score.located_fraction
    );
    println!(
        "adjacent pairs rank above non-adjacent median: {}",
        if score.adjacent_above_nonadjacent_median { "yes" } else { "no" }
    );
    Ok(EvalReport::CeramicsReconstruct {
        adjacent_pairs: score.adjacent_pairs,
        located_in_top_windows: score.located,
        located_fraction: score.located_fraction,
        adjacent_above_nonadjacent_median: score.adjacent_above_nonadjacent_median,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ReconstructionScore {
    pub adjacent_pairs: usize,
    pub located: usize,
    pub located_fraction: f64,
    pub adjacent_above_nonadjacent_median: bool,
}

/// Checks every truly-adjacent pair for a reported window whose two
/// centroids land on the same spot of the assembled vessel, and whether
/// adjacent pairs outrank non-adjacent ones overall.
pub fn score_reconstruction(
    contours: &[(String, ContourPolyline)],
    reports: &[MatchReport],
    truth: &GroundTruth,
    top_k: usize,
    tolerance: f64,
) -> Result<ReconstructionScore> {
    if contours.len() != truth.item_ids.len() {
        return Err(CliError::config(format!(
            "{} contours for {} ground-truth items",
            contours.len(),
            truth.item_ids.len()
        )));
    }
    let adjacent: Vec<(usize, usize)> = truth
        .adjacency
        .iter()
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect();

    let mut located = 0usize;
    for &(a, b) in &adjacent {
        let report = reports
            .iter()
            .find(|r| (r.sherd_a, r.sherd_b) == (a, b))
            .ok_or_else(|| CliError::config(format!("no match report for pair ({a}, {b})")))?;
        let hit = report.matches.iter().take(top_k).any(|m| {
            let ca = centroid(&contours[a].1, m.start_a, report.window_len, false);
            let cb = centroid(&contours[b].1, m.start_b, report.window_len, true);
            let (oa, ob) = (truth.offsets[a], truth.offsets[b]);
            let dx = (ca.0 + oa.0) - (cb.0 + ob.0);
            let dy = (ca.1 + oa.1) - (cb.1 + ob.1);
            (dx * dx + dy * dy).sqrt() <= tolerance
        });
        if hit {
            located += 1;
        }
    }

    // Reports arrive sorted best-first, so the rank of a pair is its
    // position in the list.
    let mut adjacent_ranks = Vec::new();
    let mut other_ranks = Vec::new();
    for (rank, r) in reports.iter().enumerate() {
        if adjacent.contains(&(r.sherd_a, r.sherd_b)) {
            adjacent_ranks.push(rank as f64);
        } else {
            other_ranks.push(rank as f64);
        }
    }
    let separated = if other_ranks.is_empty() {
        true
    } else {
        median(&mut adjacent_ranks) < median(&mut other_ranks)
    };

    let fraction =
        if adjacent.is_empty() { 1.0 } else { located as f64 / adjacent.len() as f64 };
    Ok(ReconstructionScore {
        adjacent_pairs: adjacent.len(),
        located,
        located_fraction: fraction,
        adjacent_above_nonadjacent_median: separated,
    })
}

fn centroid(contour: &ContourPolyline, start: usize, window_len: usize, reversed: bool) -> (f64, f64) {
    let pts = subcontour_points(contour, start, window_len, reversed);
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
    (sx / n, sy / n)
}

fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty rank set");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
