//! Keypoint-density baseline and the z-score to percentile mapping.

use serde::Serialize;

use crate::keypoints::KeypointIndex;
use crate::proposal::ProposalError;
use crate::raster::{Dims, Region};
use crate::scalar::Real;

/// Side of the baseline grid; the baseline has `GRID_SIDE²` = 256 cells.
pub const GRID_SIDE: u32 = 16;
pub const CELL_COUNT: usize = (GRID_SIDE * GRID_SIDE) as usize;

/// Keypoint-count statistics over a 16x16 partition of the image.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityStats<T> {
    /// Row-major over the grid: cell `(i, j)` is at `j * 16 + i`.
    pub cell_counts: Vec<u32>,
    pub mean: T,
    /// Population standard deviation.
    pub std_dev: T,
    /// Mean cell area in pixels (`width * height / 256`).
    pub cell_area: T,
}

/// Cell `i` of an axis of length `extent` spans `[⌊i·extent/16⌋, ⌊(i+1)·extent/16⌋)`.
pub fn cell_span(i: u32, extent: u32) -> (u32, u32) {
    let lo = (u64::from(i) * u64::from(extent) / u64::from(GRID_SIDE)) as u32;
    let hi = (u64::from(i + 1) * u64::from(extent) / u64::from(GRID_SIDE)) as u32;
    (lo, hi)
}

/// The 256 baseline cells, row-major.
pub fn baseline_cells(dims: Dims) -> Result<Vec<Region>, ProposalError> {
    if dims.width < GRID_SIDE || dims.height < GRID_SIDE {
        return Err(ProposalError::ImageTooSmall(dims));
    }
    let mut cells = Vec::with_capacity(CELL_COUNT);
    for j in 0..GRID_SIDE {
        let (y0, y1) = cell_span(j, dims.height);
        for i in 0..GRID_SIDE {
            let (x0, x1) = cell_span(i, dims.width);
            cells.push(Region {
                x: x0,
                y: y0,
                w: x1 - x0,
                h: y1 - y0,
            });
        }
    }
    Ok(cells)
}

/// Counts keypoints in each baseline cell and summarizes them.
pub fn density_baseline<T: Real>(index: &KeypointIndex) -> Result<DensityStats<T>, ProposalError> {
    let dims = index.dims();
    let cell_counts: Vec<u32> = baseline_cells(dims)?
        .iter()
        .map(|c| index.count_unchecked(c))
        .collect();
    let n = T::lit(CELL_COUNT as f64);
    let mean = cell_counts.iter().map(|&c| T::lit(f64::from(c))).fold(T::zero(), |a, b| a + b) / n;
    let var = cell_counts
        .iter()
        .map(|&c| {
            let d = T::lit(f64::from(c)) - mean;
            d * d
        })
        .fold(T::zero(), |a, b| a + b)
        / n;
    Ok(DensityStats {
        cell_counts,
        mean,
        std_dev: var.sqrt(),
        cell_area: T::lit(dims.area() as f64) / n,
    })
}

impl<T: Real> DensityStats<T> {
    /// Standard score of a region's keypoint count against the baseline.
    ///
    /// With `normalize`, the count is first rescaled to the mean cell area.
    /// A zero standard deviation yields `z = 0`.
    pub fn z_score(&self, count: u32, region_area: u64, normalize: bool) -> T {
        if self.std_dev == T::zero() {
            return T::zero();
        }
        let mut c = T::lit(f64::from(count));
        if normalize {
            c = c * self.cell_area / T::lit(region_area as f64);
        }
        (c - self.mean) / self.std_dev
    }

    /// Density percentile `Φ(z)` of a region, in `[0, 1]`.
    pub fn percentile(&self, count: u32, region_area: u64, normalize: bool) -> T {
        standard_normal_cdf(self.z_score(count, region_area, normalize))
    }
}

/// `Φ(z) = erfc(-z / √2) / 2`, using the platform-independent `libm` erfc.
///
/// `Φ(0)` is exactly one half.
pub fn standard_normal_cdf<T: Real>(z: T) -> T {
    let half = T::lit(0.5);
    half * (-z * T::lit(std::f64::consts::FRAC_1_SQRT_2)).erfc()
}

/// Checked [`standard_normal_cdf`].
pub fn z_to_percentile<T: Real>(z: T) -> Result<T, ProposalError> {
    if !z.is_finite() {
        return Err(ProposalError::NonFinite);
    }
    Ok(standard_normal_cdf(z))
}
