//! Keypoint-density region proposal and the baseline proposers.
//!
//! KDRP draws random rectangles and keeps each one with probability equal to
//! its density percentile: the standard-normal CDF of the rectangle's keypoint
//! count, standardized against the 256-cell baseline. Sampling stops once the
//! requested number of regions has been accepted.
//!
//! A single [`SeededRng`] drives everything. Each candidate consumes four
//! geometry draws (`x1, x2, y1, y2`, each via [`SeededRng::below`]) followed by
//! one acceptance draw ([`SeededRng::trial`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{density_baseline, DensityStats};
use crate::keypoints::{Keypoint, KeypointError, KeypointIndex};
use crate::raster::{Dims, Image, Region};
use crate::rng::SeededRng;
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum ProposalError {
    #[error("image {}x{} is smaller than the 16x16 density grid", .0.width, .0.height)]
    ImageTooSmall(Dims),
    #[error("invalid proposal configuration: {0}")]
    InvalidConfig(String),
    #[error("attempt budget exhausted after {attempts} candidates ({accepted} accepted)")]
    AttemptsExhausted { attempts: u64, accepted: usize },
    #[error("non-finite standard score")]
    NonFinite,
    #[error(transparent)]
    Keypoint(#[from] KeypointError),
}

/// Settings for [`propose`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalConfig {
    pub regions_needed: usize,
    pub min_region_side: u32,
    /// Candidates drawn may not exceed `max_attempts_factor * regions_needed`.
    pub max_attempts_factor: u64,
    /// Rescale counts to the baseline cell area before standardizing.
    pub density_normalization: bool,
    pub seed: u64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            regions_needed: 2250,
            min_region_side: 16,
            max_attempts_factor: 1000,
            density_normalization: false,
            seed: 0,
        }
    }
}

impl ProposalConfig {
    pub fn validate(&self, dims: Dims) -> Result<(), ProposalError> {
        if self.regions_needed == 0 {
            return Err(ProposalError::InvalidConfig("regions_needed must be >= 1".into()));
        }
        check_min_side(dims, self.min_region_side)?;
        if self.max_attempts_factor < 2 {
            return Err(ProposalError::InvalidConfig("max_attempts_factor must be >= 2".into()));
        }
        Ok(())
    }

    pub fn attempt_limit(&self) -> u64 {
        self.max_attempts_factor.saturating_mul(self.regions_needed as u64)
    }
}

fn check_min_side(dims: Dims, min_side: u32) -> Result<(), ProposalError> {
    if min_side == 0 || min_side > dims.width.min(dims.height) {
        return Err(ProposalError::InvalidConfig(format!(
            "min_region_side {min_side} must lie in [1, {}]",
            dims.width.min(dims.height)
        )));
    }
    Ok(())
}

/// Output of a proposer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ProposalSet<T> {
    /// `None` for the deterministic grid.
    pub seed: Option<u64>,
    /// Candidates drawn, accepted or not.
    pub attempts: u64,
    pub regions: Vec<Region>,
    #[serde(skip)]
    pub stats: Option<DensityStats<T>>,
}

/// Orders two coordinate draws into a span `[start, start + len)` of at least
/// `min_side`, widening toward the nearer edge first.
fn clamp_span(a: u32, b: u32, extent: u32, min_side: u32) -> (u32, u32) {
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let len = hi - lo + 1;
    if len < min_side {
        let mut need = min_side - len;
        let left_room = lo;
        let right_room = extent - 1 - hi;
        if left_room <= right_room {
            let take = need.min(left_room);
            lo -= take;
            need -= take;
            hi += need;
        } else {
            let take = need.min(right_room);
            hi += take;
            need -= take;
            lo -= need;
        }
    }
    (lo, hi - lo + 1)
}

/// Draws one random region: two uniform columns and two uniform rows, ordered
/// and widened to at least `min_side` on each axis.
pub fn candidate_region(rng: &mut SeededRng, dims: Dims, min_side: u32) -> Result<Region, ProposalError> {
    check_min_side(dims, min_side)?;
    Ok(draw_region(rng, dims, min_side))
}

#[inline]
fn draw_region(rng: &mut SeededRng, dims: Dims, min_side: u32) -> Region {
    let x1 = rng.below(u64::from(dims.width)) as u32;
    let x2 = rng.below(u64::from(dims.width)) as u32;
    let y1 = rng.below(u64::from(dims.height)) as u32;
    let y2 = rng.below(u64::from(dims.height)) as u32;
    let (x, w) = clamp_span(x1, x2, dims.width, min_side);
    let (y, h) = clamp_span(y1, y2, dims.height, min_side);
    Region { x, y, w, h }
}

/// The candidate/acceptance stream that [`propose`] consumes, exposed so the
/// acceptance rule can be exercised at fixed probabilities.
#[derive(Clone, Debug)]
pub struct RegionSampler {
    rng: SeededRng,
    dims: Dims,
    min_side: u32,
}

impl RegionSampler {
    pub fn new(dims: Dims, min_side: u32, seed: u64) -> Result<Self, ProposalError> {
        check_min_side(dims, min_side)?;
        Ok(Self {
            rng: SeededRng::new(seed),
            dims,
            min_side,
        })
    }

    #[inline]
    pub fn candidate(&mut self) -> Region {
        draw_region(&mut self.rng, self.dims, self.min_side)
    }

    /// Binomial trial: succeeds with probability `p`.
    #[inline]
    pub fn accept(&mut self, p: f64) -> bool {
        self.rng.trial(p)
    }
}

/// Runs KDRP on `image` with precomputed keypoints.
pub fn propose<T: Real>(
    image: &Image,
    keypoints: &[Keypoint],
    config: &ProposalConfig,
) -> Result<ProposalSet<T>, ProposalError> {
    let index = KeypointIndex::build(image.dims(), keypoints)?;
    propose_indexed(&index, config)
}

/// Runs KDRP against an already-built keypoint index.
pub fn propose_indexed<T: Real>(
    index: &KeypointIndex,
    config: &ProposalConfig,
) -> Result<ProposalSet<T>, ProposalError> {
    let dims = index.dims();
    config.validate(dims)?;
    let stats = density_baseline::<T>(index)?;
    let limit = config.attempt_limit();
    let mut sampler = RegionSampler::new(dims, config.min_region_side, config.seed)?;
    let mut regions = Vec::with_capacity(config.regions_needed);
    let mut attempts = 0u64;
    while regions.len() < config.regions_needed {
        if attempts == limit {
            return Err(ProposalError::AttemptsExhausted {
                attempts,
                accepted: regions.len(),
            });
        }
        attempts += 1;
        let r = sampler.candidate();
        let count = index.count_unchecked(&r);
        let p = stats.percentile(count, r.area(), config.density_normalization);
        if sampler.accept(p.to_f64().unwrap_or(0.0)) {
            regions.push(r);
        }
    }
    Ok(ProposalSet {
        seed: Some(config.seed),
        attempts,
        regions,
        stats: Some(stats),
    })
}

/// Baseline: random candidates, all accepted.
pub fn propose_uniform<T>(dims: Dims, count: usize, min_side: u32, seed: u64) -> Result<ProposalSet<T>, ProposalError> {
    let mut sampler = RegionSampler::new(dims, min_side, seed)?;
    let regions: Vec<Region> = (0..count).map(|_| sampler.candidate()).collect();
    Ok(ProposalSet {
        seed: Some(seed),
        attempts: count as u64,
        regions,
        stats: None,
    })
}

/// Number of window positions along one axis.
pub fn grid_positions(extent: u32, scale: u32, stride: u32) -> u32 {
    (extent - scale) / stride + 1
}

/// Stride in pixels for a square window of side `scale`; at least one pixel.
pub fn grid_stride(scale: u32, stride_fraction: f64) -> u32 {
    ((stride_fraction * f64::from(scale)).floor() as u32).max(1)
}

/// Baseline: square sliding windows at each scale, row-major, scales in order.
pub fn propose_grid<T>(dims: Dims, scales: &[u32], stride_fraction: f64) -> Result<ProposalSet<T>, ProposalError> {
    if scales.is_empty() {
        return Err(ProposalError::InvalidConfig("at least one scale is required".into()));
    }
    if !(stride_fraction > 0.0 && stride_fraction.is_finite()) {
        return Err(ProposalError::InvalidConfig("stride fraction must be positive".into()));
    }
    let mut regions = Vec::new();
    for &s in scales {
        if s == 0 || s > dims.width.min(dims.height) {
            return Err(ProposalError::InvalidConfig(format!(
                "scale {s} does not fit a {}x{} image",
                dims.width, dims.height
            )));
        }
        let stride = grid_stride(s, stride_fraction);
        for j in 0..grid_positions(dims.height, s, stride) {
            for i in 0..grid_positions(dims.width, s, stride) {
                regions.push(Region {
                    x: i * stride,
                    y: j * stride,
                    w: s,
                    h: s,
                });
            }
        }
    }
    Ok(ProposalSet {
        seed: None,
        attempts: regions.len() as u64,
        regions,
        stats: None,
    })
}
