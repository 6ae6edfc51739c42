//! Datasets, detection metrics, the budget sweep and pipeline timing.

mod dataset;
mod metrics;
mod run;
mod sweep;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

pub use dataset::{Dataset, DatasetManifest, GroundTruthBox, ManifestEntry, Sample, CLASSES_FILE};
pub use metrics::{accuracy, covered_truths, iou, match_detections, proposal_recall, MatchCounts, MatchResult};
pub use run::{
    mean, median, run_dataset, run_image, time_pipeline, EvalReport, ImageOutcome, PipelineConfig,
    ProposerSpec, StageTimings, TimingSummary, DEFAULT_IOU_MIN,
};
pub use sweep::{budget_sweep, std_error, summarize, write_sweep_csv, SweepRow, SweepSummary, CSV_HEADER};
pub use synth::{generate_synthetic, image_file_name, render_one, render_synthetic, SynthSpec, SyntheticImage, MANIFEST_FILE};

use crate::keypoints::KeypointError;
use crate::pipeline::PipelineError;
use crate::proposal::ProposalError;
use crate::raster::RasterError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("missing images: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingImages(Vec<PathBuf>),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Raster { path: PathBuf, source: RasterError },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error(transparent)]
    Keypoint(#[from] KeypointError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}
