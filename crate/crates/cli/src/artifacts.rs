//! On-disk layout shared by all pipeline stages.
//!
//! Each stage reads from the input root (`--in`, defaulting to the
//! output root) and writes under the output root, so runs can chain
//! across directories. Paths are fixed per stage; a missing input is
//! reported together with the stage that produces it.
//!
//! All artifacts are written through serde with struct (not map) types,
//! so a rerun with the same config and seed reproduces every file byte
//! for byte.

use std::fs;
use std::path::{Path, PathBuf};

use artefact_core::{
    ContourPolyline, Embedding2D, MatchSet, Partition, RowProvenance, SimilarityTransform,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const GROUND_TRUTH: &str = "corpus/ground_truth.json";
pub const CORPUS_SPEC: &str = "corpus/spec.json";
pub const ITEMS: &str = "preprocessed/items.json";
pub const CIRCLES: &str = "keypoints/circles.json";
pub const MATCHES: &str = "matches/matches.json";
pub const RAW_DISTANCES: &str = "dist/dissimilarity.csv";
pub const IMPUTED_DISTANCES: &str = "impute/dissimilarity.csv";
pub const TRACE: &str = "cluster/trace.atrc";
pub const PARTITION: &str = "cluster/partition.json";
pub const BASELINE: &str = "cluster/baseline.json";
pub const EVAL: &str = "eval/eval.json";
pub const EMBEDDING: &str = "embed/embedding.csv";
pub const EMBED_SUMMARY: &str = "embed/summary.json";
pub const ASSIGNMENTS: &str = "kmeans/assignments.json";
pub const ROW_LABELS: &str = "kmeans/row_labels.json";
pub const CONTOURS: &str = "contours/contours.json";
pub const SHERD_MATCHES: &str = "reports/sherd_matches.json";

pub fn corpus_image(id: &str) -> String {
    format!("corpus/{id}.png")
}

pub fn preprocessed_image(id: &str) -> String {
    format!("preprocessed/{id}.pgm")
}

pub fn descriptor_file(id: &str) -> String {
    format!("keypoints/{id}.adsc")
}

pub fn overlay_image(a: &str, b: &str) -> String {
    format!("reports/overlay_{a}_{b}.png")
}

/// Input/output roots for one stage invocation.
pub struct Workspace {
    in_root: PathBuf,
    out_root: PathBuf,
}

impl Workspace {
    pub fn from_config(cfg: &RunConfig) -> Self {
        let out_root = cfg.out_dir.clone();
        let in_root = cfg.in_dir.clone().unwrap_or_else(|| out_root.clone());
        Workspace { in_root, out_root }
    }

    /// Path of an upstream artifact, without checking existence.
    pub fn input(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.in_root.join(rel)
    }

    /// Path of an output artifact; parent directories are created.
    pub fn output(&self, rel: impl AsRef<Path>) -> Result<PathBuf> {
        let p = self.out_root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(p)
    }

    /// Like `input`, but the file must exist; otherwise reports which
    /// stage would have produced it.
    pub fn require(&self, rel: impl AsRef<Path>, producer: &'static str) -> Result<PathBuf> {
        let p = self.input(rel);
        if !p.exists() {
            return Err(CliError::dependency(&p, producer));
        }
        Ok(p)
    }
}

/// Derives a stage's RNG seed from the run seed, so one config seed
/// drives every stage through distinct, order-independent streams.
pub fn stage_seed(master: u64, stage_name: &str) -> u64 {
    let mut s = splitmix64(master ^ 0x9e37_79b9_7f4a_7c15);
    for &b in stage_name.as_bytes() {
        s = splitmix64(s ^ u64::from(b));
    }
    s
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::artifact(path, e.to_string()))?;
    buf.push(b'\n');
    fs::write(path, buf)?;
    Ok(())
}

/// Single-line JSON for bulk artifacts (full pair dumps, contours).
pub fn write_json_compact<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf =
        serde_json::to_vec(value).map_err(|e| CliError::artifact(path, e.to_string()))?;
    buf.push(b'\n');
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::artifact(path, e.to_string()))
}

/// Landmark matches for one image pair, indices into the item list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairMatchRecord {
    pub a: usize,
    pub b: usize,
    pub matches: MatchSet,
    pub alignment: Option<SimilarityTransform>,
    pub alignment_residual: Option<f64>,
}

/// Canonical cluster labels, one per item, with sizes sorted descending.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionArtifact {
    pub n: usize,
    pub labels: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
}

impl PartitionArtifact {
    pub fn of(p: &Partition) -> Self {
        let mut sizes = p.cluster_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        PartitionArtifact { n: p.n(), labels: p.labels().to_vec(), cluster_sizes: sizes }
    }

    pub fn partition(&self) -> artefact_core::Result<Partition> {
        Partition::from_labels(&self.labels)
    }
}

/// Sizes in the reporting style "(59, 14, 7, 5)", largest first.
pub fn format_sizes(sizes: &[usize]) -> String {
    let parts: Vec<String> = {
        let mut s = sizes.to_vec();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s.iter().map(|v| v.to_string()).collect()
    };
    format!("({})", parts.join(", "))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedSummary {
    pub final_kl: f64,
    pub perplexity: usize,
}

/// Per-image cluster assignment by majority vote over feature rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssignmentArtifact {
    pub assignments: Vec<(String, usize)>,
}

/// Closed outlines keyed by item id, in item order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContourArtifact {
    pub contours: Vec<(String, ContourPolyline)>,
}

/// Evaluation summary; the variant follows the pipeline under test.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EvalReport {
    Coins {
        rand_index: f64,
        vi_distance: f64,
        cluster_sizes: Vec<usize>,
        baseline_rand_index: f64,
        baseline_cluster_sizes: Vec<usize>,
    },
    CeramicsCluster {
        rand_index: f64,
        cluster_sizes: Vec<usize>,
    },
    CeramicsReconstruct {
        adjacent_pairs: usize,
        located_in_top_windows: usize,
        located_fraction: f64,
        adjacent_above_nonadjacent_median: bool,
    },
}

/// Writes the 2-D embedding with row provenance as CSV. Coordinates use
/// the shortest decimal form that parses back to the same float.
pub fn write_embedding_csv(
    path: &Path,
    emb: &Embedding2D,
    provenance: &[RowProvenance],
) -> Result<()> {
    if emb.points.len() != provenance.len() {
        return Err(CliError::artifact(path, "embedding rows do not match provenance"));
    }
    let mut out = String::from("image_id,sherd_id,set_id,x,y\n");
    for ((x, y), prov) in emb.points.iter().zip(provenance) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            prov.image_id, prov.sherd_id, prov.set_id, x, y
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_embedding_csv(path: &Path) -> Result<(Vec<(f64, f64)>, Vec<RowProvenance>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "image_id,sherd_id,set_id,x,y" {
        return Err(CliError::artifact(path, "unrecognised embedding header"));
    }
    let mut points = Vec::new();
    let mut provenance = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::artifact(path, format!("row {} malformed", lineno + 2)));
        }
        let bad = |what: &str| CliError::artifact(path, format!("row {}: {what}", lineno + 2));
        let sherd_id = fields[1].parse().map_err(|_| bad("bad sherd id"))?;
        let set_id = fields[2].parse().map_err(|_| bad("bad set id"))?;
        let x: f64 = fields[3].parse().map_err(|_| bad("bad x"))?;
        let y: f64 = fields[4].parse().map_err(|_| bad("bad y"))?;
        provenance.push(RowProvenance { image_id: fields[0].to_string(), sherd_id, set_id });
        points.push((x, y));
    }
    if points.is_empty() {
        return Err(CliError::artifact(path, "embedding has no rows"));
    }
    Ok((points, provenance))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_differ_by_stage_and_master() {
        let a = stage_seed(7, "detect");
        let b = stage_seed(7, "match");
        let c = stage_seed(8, "detect");
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, stage_seed(7, "detect"));
    }

    #[test]
    fn embedding_csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embedding.csv");
        let emb = Embedding2D {
            points: vec![(0.1234567890123456, -9.87e-13), (f64::MIN_POSITIVE, 3.0)],
            final_kl: 0.5,
        };
        let prov = vec![
            RowProvenance { image_id: "set00_piece01".into(), sherd_id: 1, set_id: 0 },
            RowProvenance { image_id: "set01_piece00".into(), sherd_id: 2, set_id: 1 },
        ];
        write_embedding_csv(&path, &emb, &prov).unwrap();
        let (points, back) = read_embedding_csv(&path).unwrap();
        assert_eq!(points, emb.points);
        assert_eq!(back, prov);
    }

    #[test]
    fn missing_input_names_producing_stage() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { out_dir: dir.path().to_path_buf(), ..RunConfig::default() };
        let ws = Workspace::from_config(&cfg);
        let err = ws.require(ITEMS, "preprocess").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("items.json"), "{msg}");
        assert!(msg.contains("preprocess"), "{msg}");
    }
}
