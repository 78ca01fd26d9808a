//! Run configuration: one TOML document drives every stage. Missing
//! keys take module defaults; unknown keys are schema errors.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use artefact_core::contour::DEFAULT_STRIDE;
use artefact_core::partition::McmcConfig;
use artefact_core::synth::DEFAULT_PIECE_COUNTS;
use artefact_core::{PreprocessConfig, StrikeSpec, SynthDieSpec};

use crate::error::{CliError, Result};

/// Which corpus and stage chain a run drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum Pipeline {
    /// Coin die clustering over photographs of struck coins.
    Coins,
    /// Sherd set recovery by descriptor embedding and k-means.
    CeramicsCluster,
    /// Sherd pair reconstruction by fracture-edge matching.
    CeramicsReconstruct,
    /// Corpus generation only: writes both synthetic corpora.
    Synth,
}

/// One pipeline stage; each reads its upstream artifacts and writes its
/// own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "kebab-case")]
pub enum Stage {
    /// Generate the synthetic corpus with ground truth.
    Synth,
    /// Denoise, contrast-equalize and resize every corpus image.
    Preprocess,
    /// Detect keypoints, compute descriptors, fit object circles.
    Detect,
    /// Match descriptor sets for every image pair.
    Match,
    /// Assemble the pairwise dissimilarity matrix (with exclusions).
    Dist,
    /// Fill excluded entries by ultrametric imputation.
    Impute,
    /// Sample partitions by MCMC and pick the VI-optimal one.
    Cluster,
    /// Score estimates against ground truth and print the report.
    Eval,
    /// Embed descriptors to 2D.
    Embed,
    /// Cluster the embedding and vote per-image assignments.
    Kmeans,
    /// Extract closed outlines from sherd images.
    Contours,
    /// Match fracture windows across all sherd pairs, render overlays.
    SherdMatch,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Preprocess => "preprocess",
            Stage::Detect => "detect",
            Stage::Match => "match",
            Stage::Dist => "dist",
            Stage::Impute => "impute",
            Stage::Cluster => "cluster",
            Stage::Eval => "eval",
            Stage::Embed => "embed",
            Stage::Kmeans => "kmeans",
            Stage::Contours => "contours",
            Stage::SherdMatch => "sherd-match",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_dies: usize,
    pub coins_per_die: usize,
    pub die: SynthDieSpec,
    pub strike: StrikeSpec,
    /// Pieces per sherd set, one entry per set.
    pub sherd_counts: Vec<usize>,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            n_dies: 5,
            coins_per_die: 12,
            die: SynthDieSpec::default(),
            strike: StrikeSpec::default(),
            sherd_counts: DEFAULT_PIECE_COUNTS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSection {
    /// Keypoint budget per image.
    pub max_keypoints: usize,
    /// Object-circle radius search range, in preprocessed pixels.
    pub circle_r_min: usize,
    pub circle_r_max: usize,
    /// Also pool in stable-region features.
    pub use_mser: bool,
    pub mser_delta: usize,
    pub mser_max_variation: f64,
    pub mser_keep_fraction: f64,
}

impl Default for DetectSection {
    fn default() -> Self {
        DetectSection {
            max_keypoints: 400,
            circle_r_min: 80,
            circle_r_max: 145,
            use_mser: false,
            mser_delta: 5,
            mser_max_variation: 0.5,
            mser_keep_fraction: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchSection {
    /// Pairs with fewer matched landmarks are marked missing.
    pub min_landmarks: usize,
    /// Rank landmarks by posterior-variance importance.
    pub gp_rank: bool,
}

impl Default for MatchSection {
    fn default() -> Self {
        MatchSection { min_landmarks: 3, gp_rank: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub mcmc: McmcConfig,
    /// Cluster count for the agglomerative baseline partition.
    pub baseline_k: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection { mcmc: McmcConfig::default(), baseline_k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedSection {
    pub perplexity: usize,
}

impl Default for EmbedSection {
    fn default() -> Self {
        EmbedSection { perplexity: 15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmeansSection {
    pub k: usize,
}

impl Default for KmeansSection {
    fn default() -> Self {
        KmeansSection { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourSection {
    pub sigma: f64,
    pub t_low: f64,
    pub t_high: f64,
}

impl Default for ContourSection {
    fn default() -> Self {
        ContourSection { sigma: 1.4, t_low: 0.08, t_high: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SherdMatchSection {
    /// Window length in contour points; 0 picks 15% of the shortest
    /// outline.
    pub window_len: usize,
    pub stride: usize,
    pub top_k: usize,
}

impl Default for SherdMatchSection {
    fn default() -> Self {
        SherdMatchSection { window_len: 0, stride: DEFAULT_STRIDE, top_k: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Pipeline,
    /// Master seed; every stochastic stage derives named substreams.
    pub seed: u64,
    /// Input image directory; defaults to the run's own corpus.
    pub in_dir: Option<PathBuf>,
    /// All artifacts are written under this directory.
    pub out_dir: PathBuf,
    pub synth: SynthSection,
    pub preprocess: PreprocessConfig,
    pub detect: DetectSection,
    #[serde(rename = "match")]
    pub matching: MatchSection,
    pub cluster: ClusterSection,
    pub embed: EmbedSection,
    pub kmeans: KmeansSection,
    pub contours: ContourSection,
    pub sherd_match: SherdMatchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pipeline: Pipeline::Coins,
            seed: 0,
            in_dir: None,
            out_dir: PathBuf::from("artefact-run"),
            synth: SynthSection::default(),
            preprocess: PreprocessConfig::default(),
            detect: DetectSection::default(),
            matching: MatchSection::default(),
            cluster: ClusterSection::default(),
            embed: EmbedSection::default(),
            kmeans: KmeansSection::default(),
            contours: ContourSection::default(),
            sherd_match: SherdMatchSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// The full parameter reference: every key with its default value.
    pub fn reference_toml() -> String {
        toml::to_string_pretty(&RunConfig::default())
            .expect("default config always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let text = RunConfig::reference_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, RunConfig::default());
    }

    #[test]
    fn partial_sections_fill_with_defaults() {
        let cfg: RunConfig = toml::from_str(
            "pipeline = \"ceramics-cluster\"\nseed = 9\n[synth.strike]\nwear = 0.3\n",
        )
        .unwrap();
        assert_eq!(cfg.pipeline, Pipeline::CeramicsCluster);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.synth.strike.wear, 0.3);
        assert_eq!(cfg.synth.strike.noise, StrikeSpec::default().noise);
        assert_eq!(cfg.kmeans.k, 5);
    }

    #[test]
    fn unknown_keys_are_schema_errors() {
        let r: std::result::Result<RunConfig, _> = toml::from_str("not_a_key = 1\n");
        assert!(r.is_err());
        let r: std::result::Result<RunConfig, _> =
            toml::from_str("[cluster]\nnot_a_key = 1\n");
        assert!(r.is_err());
    }
}
