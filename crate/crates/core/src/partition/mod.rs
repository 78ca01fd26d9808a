//! Distance-based Bayesian clustering: a Gamma pairwise-distance
//! likelihood with a micro-clustering prior, sampled by MCMC, plus the
//! point estimation and comparison metrics used to read the chains.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod estimate;
mod mcmc;
mod model;

pub use estimate::{estimate_partition_vi, linkage_baseline, rand_index, vi_distance};
pub use mcmc::{read_trace, run_mcmc, sample_prior_partitions, write_trace, McmcTrace};
pub use model::{partition_log_posterior, McmcConfig};

/// A clustering of `n` items in canonical form: cluster ids are assigned
/// by order of first appearance, so equal block structures have equal
/// label vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
}

impl Partition {
    /// Canonicalises arbitrary cluster ids by first appearance.
    pub fn from_labels(raw: &[usize]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::validation("partition of zero items"));
        }
        let mut map: Vec<(usize, usize)> = Vec::new();
        let mut labels = Vec::with_capacity(raw.len());
        for &r in raw {
            let id = match map.iter().find(|&&(orig, _)| orig == r) {
                Some(&(_, id)) => id,
                None => {
                    let id = map.len();
                    map.push((r, id));
                    id
                }
            };
            labels.push(id);
        }
        Ok(Partition { labels })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of clusters.
    pub fn k(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Cluster sizes indexed by cluster id.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Sizes sorted descending, the usual reporting order, e.g.
    /// "(59, 14, 7, 5)".
    pub fn sizes_descending(&self) -> Vec<usize> {
        let mut sizes = self.cluster_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    pub fn format_sizes(&self) -> String {
        let sizes: Vec<String> = self.sizes_descending().iter().map(|s| s.to_string()).collect();
        format!("({})", sizes.join(", "))
    }
}

#[derive(Serialize, Deserialize)]
struct PartitionFile {
    n: usize,
    labels: Vec<usize>,
    cluster_sizes: Vec<usize>,
}

/// Writes a partition as JSON: `{"n": …, "labels": […], "cluster_sizes": […]}`.
pub fn write_partition_json<W: Write>(p: &Partition, writer: W) -> Result<()> {
    let file = PartitionFile {
        n: p.n(),
        labels: p.labels.clone(),
        cluster_sizes: p.cluster_sizes(),
    };
    serde_json::to_writer(writer, &file).map_err(|e| Error::format(format!("partition JSON: {e}")))
}

/// Reads a partition written by [`write_partition_json`], validating
/// consistency of the redundant fields.
pub fn read_partition_json<R: Read>(reader: R) -> Result<Partition> {
    let file: PartitionFile = serde_json::from_reader(reader)
        .map_err(|e| Error::format(format!("partition JSON: {e}")))?;
    if file.labels.len() != file.n {
        return Err(Error::format("label count disagrees with n"));
    }
    let p = Partition::from_labels(&file.labels)?;
    if p.labels != file.labels {
        return Err(Error::format("labels are not in canonical first-appearance form"));
    }
    if p.cluster_sizes() != file.cluster_sizes {
        return Err(Error::format("cluster_sizes disagree with labels"));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_canonicalise_by_first_appearance() {
        let p = Partition::from_labels(&[7, 7, 3, 7, 3, 9]).unwrap();
        assert_eq!(p.labels(), &[0, 0, 1, 0, 1, 2]);
        assert_eq!(p.k(), 3);
        assert_eq!(p.cluster_sizes(), vec![3, 2, 1]);
    }

    #[test]
    fn equal_block_structures_compare_equal() {
        let p = Partition::from_labels(&[0, 0, 1, 2]).unwrap();
        let q = Partition::from_labels(&[5, 5, 2, 8]).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn sizes_report_in_descending_parenthesised_form() {
        let mut raw = Vec::new();
        for (id, count) in [(0usize, 7usize), (1, 14), (2, 5), (3, 59)] {
            raw.extend(std::iter::repeat_n(id, count));
        }
        let p = Partition::from_labels(&raw).unwrap();
        assert_eq!(p.format_sizes(), "(59, 14, 7, 5)");
    }

    #[test]
    fn empty_partition_is_rejected() {
        assert!(Partition::from_labels(&[]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = Partition::from_labels(&[0, 1, 0, 2, 1]).unwrap();
        let mut buf = Vec::new();
        write_partition_json(&p, &mut buf).unwrap();
        let back = read_partition_json(buf.as_slice()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn json_validation_catches_inconsistencies() {
        let bad_n = br#"{"n":3,"labels":[0,1],"cluster_sizes":[1,1]}"#;
        assert!(read_partition_json(&bad_n[..]).is_err());
        let bad_sizes = br#"{"n":2,"labels":[0,1],"cluster_sizes":[2]}"#;
        assert!(read_partition_json(&bad_sizes[..]).is_err());
        let non_canonical = br#"{"n":2,"labels":[1,0],"cluster_sizes":[1,1]}"#;
        assert!(read_partition_json(&non_canonical[..]).is_err());
        let garbage = br#"{"norbert":3}"#;
        assert!(read_partition_json(&garbage[..]).is_err());
    }
}
