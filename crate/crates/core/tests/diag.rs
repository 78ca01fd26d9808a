use std::fs::File;
use std::io::BufReader;

use artefact_core::dissimilarity::read_matrix_csv;
use artefact_core::partition::{estimate_partition_vi, rand_index, run_mcmc};
use artefact_core::{McmcConfig, Partition};

#[test]
#[ignore]
fn diagnose_smoke_matrix() {
    let f = File::open("/tmp/smoke/fullrun/impute/dissimilarity.csv").unwrap();
    let (d, _ids) = read_matrix_csv(BufReader::new(f)).unwrap();
    let cfg = McmcConfig::default();
    let trace = run_mcmc(&d, &cfg).unwrap();
    let truth = Partition::from_labels(&(0..60).map(|i| i / 12).collect::<Vec<_>>()).unwrap();
    let (mut best_lp, mut best_idx) = (f64::NEG_INFINITY, 0);
    for (i, &lp) in trace.log_posterior.iter().enumerate() {
        if lp > best_lp {
            best_lp = lp;
            best_idx = i;
        }
    }
    let map = &trace.partitions[best_idx];
    println!(
        "samples {} lp first {:.1} last {:.1} best {:.1}",
        trace.log_posterior.len(),
        trace.log_posterior.first().unwrap(),
        trace.log_posterior.last().unwrap(),
        best_lp
    );
    println!(
        "splits {}/{} merges {}/{}",
        trace.accepted_splits, trace.attempted_splits, trace.accepted_merges,
        trace.attempted_merges
    );
    println!("MAP k={} rand={:.3}", map.k(), rand_index(map, &truth).unwrap());
    let est = estimate_partition_vi(&trace).unwrap();
    println!("VI estimate k={} rand={:.3}", est.k(), rand_index(&est, &truth).unwrap());
}
