//! Image-based artefact analysis: keypoint matching and partition
//! inference for coin die studies, and contour matching for ceramic
//! sherd reassembly.
//!
//! The crate is organised as a pipeline. `raster` loads and normalises
//! images, `keypoints` finds interest points and descriptors, `matching`
//! pairs them across images, `dissimilarity` condenses pairings into a
//! distance matrix, and `partition` infers groupings from it. `embed`
//! provides a low-dimensional view of the same evidence, `contour`
//! handles outline extraction and fragment matching, and `synth`
//! generates labelled test corpora for both workflows.

pub mod contour;
pub mod dissimilarity;
pub mod edges;
pub mod embed;
pub mod error;
pub mod keypoints;
pub mod matching;
pub mod partition;
pub mod raster;
pub mod synth;

pub use contour::{ContourPolyline, HuVector, MatchReport};
pub use dissimilarity::{DissimilarityMatrix, PairMetrics};
pub use embed::{Embedding2D, FeatureMatrix, RowProvenance};
pub use error::{Error, Result};
pub use keypoints::{
    CoinCircle, Keypoint, KeypointDescriptorSet, MserRegion, DESCRIPTOR_WIDTH,
};
pub use matching::{MatchSet, SimilarityTransform};
pub use partition::{McmcConfig, McmcTrace, Partition};
pub use raster::{PreprocessConfig, RasterImage};
pub use synth::{GroundTruth, StrikeSpec, SynthDieSpec};
