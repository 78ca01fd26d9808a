//! Posterior partition inference plus an agglomerative baseline.

use std::fs::File;
use std::io::BufReader;

use artefact_core::dissimilarity::read_matrix_csv;
use artefact_core::partition::{
    estimate_partition_vi, linkage_baseline, run_mcmc, write_trace,
};

use crate::artifacts::{self, stage_seed, PartitionArtifact, Workspace};
use crate::config::RunConfig;
use crate::error::Result;

pub fn run(cfg: &RunConfig) -> Result<()> {
    let ws = Workspace::from_config(cfg);
    let path = ws.require(artifacts::IMPUTED_DISTANCES, "impute")?;
    let (matrix, _ids) = read_matrix_csv(BufReader::new(File::open(&path)?))?;

    // The sampler seed is a named substream of the run seed; the
    // config's own seed field xors in so chains stay separable without
    // a second top-level knob.
    let mut mcmc = cfg.cluster.mcmc.clone();
    mcmc.seed = stage_seed(cfg.seed, "cluster") ^ cfg.cluster.mcmc.seed;

    let trace = run_mcmc(&matrix, &mcmc)?;
    write_trace(&trace, super::buf_writer(&ws.output(artifacts::TRACE)?)?)?;

    let estimate = estimate_partition_vi(&trace)?;
    let artifact = PartitionArtifact::of(&estimate);
    println!("posterior clusters: {}", artifacts::format_sizes(&artifact.cluster_sizes));
    artifacts::write_json(&ws.output(artifacts::PARTITION)?, &artifact)?;

    let baseline = linkage_baseline(&matrix, cfg.cluster.baseline_k)?;
    let baseline_artifact = PartitionArtifact::of(&baseline);
    println!("baseline clusters: {}", artifacts::format_sizes(&baseline_artifact.cluster_sizes));
    artifacts::write_json(&ws.output(artifacts::BASELINE)?, &baseline_artifact)?;
    Ok(())
}
