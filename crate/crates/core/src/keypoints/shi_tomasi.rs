//! Minimum-eigenvalue ("good features to track") corners.

use super::{Detector, Keypoint, KeypointError};
use crate::raster::Image;
use crate::scalar::Real;

/// Pixels closer than this to the border get no response.
pub const BORDER: u32 = 2;

/// Structure-tensor sums `(Σgx², Σgx·gy, Σgy²)` over the 3x3 window at every
/// pixel, from 3x3 Sobel gradients. Border pixels hold zeros.
pub fn structure_tensor(image: &Image) -> Vec<(i64, i64, i64)> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let px = image.pixels();
    let at = |x: usize, y: usize| i64::from(px[y * w + x]);

    let mut grads = vec![(0i64, 0i64); w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
            grads[y * w + x] = (gx, gy);
        }
    }

    let b = BORDER as usize;
    let mut tensor = vec![(0, 0, 0); w * h];
    for y in b..h - b {
        for x in b..w - b {
            let (mut a, mut bxy, mut c) = (0, 0, 0);
            for ny in y - 1..=y + 1 {
                for nx in x - 1..=x + 1 {
                    let (gx, gy) = grads[ny * w + nx];
                    a += gx * gx;
                    bxy += gx * gy;
                    c += gy * gy;
                }
            }
            tensor[y * w + x] = (a, bxy, c);
        }
    }
    tensor
}

/// Smaller eigenvalue of the symmetric matrix `[[a, b], [b, c]]`.
#[inline]
pub fn min_eigenvalue<T: Real>(a: T, b: T, c: T) -> T {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    ((a + c) - ((a - c) * (a - c) + four * b * b).sqrt()) / two
}

/// Dense λmin response map, row-major.
pub fn response_map<T: Real>(image: &Image) -> Vec<T> {
    structure_tensor(image)
        .into_iter()
        .map(|(a, b, c)| {
            let r = min_eigenvalue(T::lit(a as f64), T::lit(b as f64), T::lit(c as f64));
            // Rounding can push a zero eigenvalue slightly negative.
            r.max(T::zero())
        })
        .collect()
}

/// Greedy strongest-first corner selection with a minimum spacing.
pub fn detect_shi_tomasi<T: Real>(
    image: &Image,
    max_corners: usize,
    quality: T,
    min_distance: T,
) -> Result<Vec<Keypoint>, KeypointError> {
    let min = 2 * BORDER + 1;
    if image.width() < min || image.height() < min {
        return Err(KeypointError::ImageTooSmall {
            width: image.width(),
            height: image.height(),
            min,
        });
    }
    if max_corners == 0 {
        return Err(KeypointError::InvalidParameter("max_corners must be >= 1"));
    }
    if !(quality > T::zero() && quality <= T::one()) {
        return Err(KeypointError::InvalidParameter("quality must lie in (0, 1]"));
    }
    if !(min_distance >= T::zero()) || !min_distance.is_finite() {
        return Err(KeypointError::InvalidParameter("min_distance must be finite and >= 0"));
    }

    let w = image.width() as usize;
    let response = response_map::<T>(image);
    let peak = response.iter().copied().fold(T::zero(), T::max);
    if peak <= T::zero() {
        return Ok(Vec::new());
    }
    let floor = quality * peak;
    let mut candidates: Vec<usize> = (0..response.len()).filter(|&i| response[i] >= floor).collect();
    // Stable sort keeps row-major order among equal responses.
    candidates.sort_by(|&i, &j| response[j].partial_cmp(&response[i]).expect("finite response"));

    let mut grid = SpacingGrid::new(image.width(), image.height(), min_distance.to_f64().unwrap());
    let mut out = Vec::new();
    for idx in candidates {
        let (x, y) = ((idx % w) as u32, (idx / w) as u32);
        if grid.is_clear(x, y) {
            grid.insert(x, y);
            out.push(Keypoint {
                x,
                y,
                detector: Detector::ShiTomasi,
            });
            if out.len() == max_corners {
                break;
            }
        }
    }
    Ok(out)
}

/// Bucket grid for "no selected point closer than `d`" queries.
struct SpacingGrid {
    min_dist_sq: f64,
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<(u32, u32)>>,
}

impl SpacingGrid {
    fn new(width: u32, height: u32, min_distance: f64) -> Self {
        let cell = min_distance.max(1.0);
        let cols = (width as f64 / cell).ceil() as usize + 1;
        let rows = (height as f64 / cell).ceil() as usize + 1;
        Self {
            min_dist_sq: min_distance * min_distance,
            cell,
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
        }
    }

    fn cell_of(&self, x: u32, y: u32) -> (usize, usize) {
        ((x as f64 / self.cell) as usize, (y as f64 / self.cell) as usize)
    }

    fn is_clear(&self, x: u32, y: u32) -> bool {
        if self.min_dist_sq == 0.0 {
            return true;
        }
        let (cx, cy) = self.cell_of(x, y);
        for ny in cy.saturating_sub(1)..=(cy + 1).min(self.rows - 1) {
            for nx in cx.saturating_sub(1)..=(cx + 1).min(self.cols - 1) {
                for &(px, py) in &self.buckets[ny * self.cols + nx] {
                    let dx = px as f64 - x as f64;
                    let dy = py as f64 - y as f64;
                    if dx * dx + dy * dy < self.min_dist_sq {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn insert(&mut self, x: u32, y: u32) {
        let (cx, cy) = self.cell_of(x, y);
        self.buckets[cy * self.cols + cx].push((x, y));
    }
}
