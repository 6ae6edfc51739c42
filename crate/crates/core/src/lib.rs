//! Keypoint-density region proposal (KDRP) and a desk-scale detection pipeline.
//!
//! The crate is organized bottom-up:
//!
//! - [`raster`]: grayscale images, rectangles, binary Netpbm I/O, annotation.
//! - [`keypoints`]: FAST-9 and Shi-Tomasi detectors, prefix-sum count index.
//! - [`density`] and [`proposal`]: the 256-cell density baseline, the density
//!   percentile, and the stochastic proposer with uniform and grid baselines.
//! - [`pipeline`]: region scoring, per-class NMS, hypothesis selection.
//! - [`eval`]: IoU, matching, accuracy, proposal recall, datasets, the budget
//!   sweep, and stage timing.
//!
//! Numeric code is generic over [`scalar::Real`] (`f32`/`f64`) and, for
//! count ratios, [`scalar::Fraction`] (which also covers exact rationals).
//! The aliases below fix the scalar to `f64`, which the pipeline uses.

pub mod density;
pub mod eval;
pub mod keypoints;
pub mod pipeline;
pub mod proposal;
pub mod raster;
pub mod rng;
pub mod scalar;

pub use keypoints::{Detector, DetectorConfig, Keypoint, KeypointIndex};
pub use proposal::{ProposalConfig, ProposalError};
pub use raster::{Dims, Image, Region, RgbImage};
pub use rng::SeededRng;
pub use scalar::{Fraction, Rational64, Real};

pub type DensityStats = density::DensityStats<f64>;
pub type ProposalSet = proposal::ProposalSet<f64>;
pub type ClassScores = pipeline::ClassScores<f64>;
pub type Detection = pipeline::Detection<f64>;
