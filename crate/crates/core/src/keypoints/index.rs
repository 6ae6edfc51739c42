use super::{Keypoint, KeypointError};
use crate::raster::{Dims, Region};

/// Prefix-sum grid of keypoint counts.
///
/// `cumulative[(y) * (w + 1) + x]` holds the number of keypoints with column
/// `< x` and row `< y`, so any half-open rectangle costs four lookups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeypointIndex {
    dims: Dims,
    cumulative: Vec<u32>,
}

impl KeypointIndex {
    pub fn build(dims: Dims, keypoints: &[Keypoint]) -> Result<Self, KeypointError> {
        let stride = dims.width as usize + 1;
        let mut cumulative = vec![0u32; stride * (dims.height as usize + 1)];
        for k in keypoints {
            if k.x >= dims.width || k.y >= dims.height {
                return Err(KeypointError::OutOfBounds { x: k.x, y: k.y, dims });
            }
            cumulative[(k.y as usize + 1) * stride + k.x as usize + 1] += 1;
        }
        for y in 1..=dims.height as usize {
            let mut row = 0u32;
            for x in 1..stride {
                row += cumulative[y * stride + x];
                cumulative[y * stride + x] = row + cumulative[(y - 1) * stride + x];
            }
        }
        Ok(Self { dims, cumulative })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn total(&self) -> u32 {
        *self.cumulative.last().expect("non-empty grid")
    }

    /// The raw `(width + 1) x (height + 1)` prefix-sum grid.
    pub fn cumulative(&self) -> &[u32] {
        &self.cumulative
    }

    /// Number of keypoints inside `r`.
    pub fn count_in(&self, r: &Region) -> Result<u32, KeypointError> {
        if !r.fits(self.dims) {
            return Err(KeypointError::InvalidRegion(*r));
        }
        Ok(self.count_unchecked(r))
    }

    /// As [`count_in`](Self::count_in), for regions already known to fit.
    #[inline]
    pub(crate) fn count_unchecked(&self, r: &Region) -> u32 {
        debug_assert!(r.fits(self.dims));
        let stride = self.dims.width as usize + 1;
        let (x0, y0) = (r.x as usize, r.y as usize);
        let (x1, y1) = (x0 + r.w as usize, y0 + r.h as usize);
        let at = |x: usize, y: usize| self.cumulative[y * stride + x];
        at(x1, y1) + at(x0, y0) - at(x0, y1) - at(x1, y0)
    }
}
