use std::path::{Path, PathBuf};

use kdrp::eval::EvalError;
use kdrp::keypoints::KeypointError;
use kdrp::pipeline::PipelineError;
use kdrp::raster::RasterError;
use kdrp::ProposalError;
use thiserror::Error;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_EXHAUSTED: i32 = 3;
pub const EXIT_INCOMPLETE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Raster { path: PathBuf, source: RasterError },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error(transparent)]
    Keypoint(#[from] KeypointError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl CliError {
    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| Self::Io { path: path.to_owned(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Keypoint(_) => EXIT_USAGE,
            Self::Io { .. } | Self::Raster { .. } | Self::Json { .. } => EXIT_IO,
            Self::Proposal(e) => proposal_code(e),
            Self::Pipeline(e) => pipeline_code(e),
            Self::Eval(e) => match e {
                EvalError::Io { .. } | EvalError::Raster { .. } | EvalError::Manifest { .. } => EXIT_IO,
                EvalError::MissingImages(_) => EXIT_INCOMPLETE,
                EvalError::InvalidConfig(_) | EvalError::Keypoint(_) => EXIT_USAGE,
                EvalError::Proposal(p) => proposal_code(p),
                EvalError::Pipeline(p) => pipeline_code(p),
            },
        }
    }
}

fn proposal_code(e: &ProposalError) -> i32 {
    match e {
        ProposalError::AttemptsExhausted { .. } => EXIT_EXHAUSTED,
        _ => EXIT_USAGE,
    }
}

fn pipeline_code(e: &PipelineError) -> i32 {
    match e {
        PipelineError::Io { .. } | PipelineError::Json(_) | PipelineError::InvalidScores(_) => EXIT_IO,
        PipelineError::MissingRegion(_) => EXIT_INCOMPLETE,
        PipelineError::MissingGroundTruth | PipelineError::InvalidParameter(_) => EXIT_USAGE,
    }
}
