//! Corner detectors and the prefix-sum count index built over their output.
//!
//! Two detectors are provided: FAST-9 (the keypoint stage of ORB) and
//! Shi-Tomasi minimum-eigenvalue corners. [`detect_all`] concatenates the
//! output of an ordered detector set without de-duplication, so a pixel found
//! by both detectors contributes twice to keypoint density.

mod fast;
mod index;
mod shi_tomasi;

pub use fast::{corner_score, detect_fast, ARC, CIRCLE};
pub use index::KeypointIndex;
pub use shi_tomasi::{detect_shi_tomasi, min_eigenvalue, response_map, structure_tensor};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Dims, Image, Region};

#[derive(Debug, Error, PartialEq)]
pub enum KeypointError {
    #[error("image {width}x{height} is smaller than the {min}x{min} detector window")]
    ImageTooSmall { width: u32, height: u32, min: u32 },
    #[error("invalid detector parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("no detectors enabled")]
    NoDetectors,
    #[error("keypoint ({x}, {y}) lies outside a {}x{} image", dims.width, dims.height)]
    OutOfBounds { x: u32, y: u32, dims: Dims },
    #[error("region {0} is not valid for the indexed image")]
    InvalidRegion(Region),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Fast,
    ShiTomasi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: u32,
    pub y: u32,
    pub detector: Detector,
}

/// One enabled detector with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorConfig {
    Fast {
        threshold: u8,
        nonmax: bool,
    },
    ShiTomasi {
        max_corners: usize,
        quality: f64,
        min_distance: f64,
    },
}

impl DetectorConfig {
    pub const fn fast_default() -> Self {
        Self::Fast {
            threshold: 20,
            nonmax: true,
        }
    }

    pub const fn shi_tomasi_default() -> Self {
        Self::ShiTomasi {
            max_corners: 2000,
            quality: 0.01,
            min_distance: 5.0,
        }
    }

    /// FAST followed by Shi-Tomasi, both at their default operating points.
    pub fn default_set() -> Vec<Self> {
        vec![Self::fast_default(), Self::shi_tomasi_default()]
    }

    pub fn detect(&self, image: &Image) -> Result<Vec<Keypoint>, KeypointError> {
        match *self {
            Self::Fast { threshold, nonmax } => detect_fast(image, threshold, nonmax),
            Self::ShiTomasi {
                max_corners,
                quality,
                min_distance,
            } => detect_shi_tomasi(image, max_corners, quality, min_distance),
        }
    }
}

/// Runs each detector in order and concatenates their outputs.
pub fn detect_all(image: &Image, detectors: &[DetectorConfig]) -> Result<Vec<Keypoint>, KeypointError> {
    if detectors.is_empty() {
        return Err(KeypointError::NoDetectors);
    }
    let mut out = Vec::new();
    for d in detectors {
        out.extend(d.detect(image)?);
    }
    Ok(out)
}

pub fn build_index(dims: Dims, keypoints: &[Keypoint]) -> Result<KeypointIndex, KeypointError> {
    KeypointIndex::build(dims, keypoints)
}
