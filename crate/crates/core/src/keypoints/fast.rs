//! FAST-9 segment-test corners on the radius-3 Bresenham circle.

use super::{Detector, Keypoint, KeypointError};
use crate::raster::Image;

/// Circle offsets, clockwise from twelve o'clock.
pub const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

/// Length of the contiguous arc required for a corner.
pub const ARC: usize = 9;

const RADIUS: u32 = 3;

/// Largest threshold `t` for which the pixel is still a corner, or a value
/// `<= 0` if it is not a corner at any positive threshold.
///
/// A corner at `t` has an arc of [`ARC`] circle pixels all `> c + t` or all
/// `< c - t`. For one arc the largest such `t` is `min(|p - c|) - 1` over the
/// arc, so the score is the best arc of either polarity.
pub fn corner_score(ring: &[i16; 16], center: i16) -> i16 {
    let mut best = i16::MIN;
    for start in 0..16 {
        let mut bright = i16::MAX;
        let mut dark = i16::MAX;
        for k in 0..ARC {
            let p = ring[(start + k) & 15];
            bright = bright.min(p - center);
            dark = dark.min(center - p);
        }
        best = best.max(bright - 1).max(dark - 1);
    }
    best
}

#[inline]
fn ring_at(image: &Image, offsets: &[isize; 16], idx: usize) -> [i16; 16] {
    let px = image.pixels();
    let mut ring = [0i16; 16];
    for (r, off) in ring.iter_mut().zip(offsets) {
        *r = i16::from(px[(idx as isize + off) as usize]);
    }
    ring
}

/// Scores every pixel; zero for non-corners and for the 3-pixel border.
fn score_map(image: &Image, threshold: u8) -> Vec<u16> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let t = i16::from(threshold);
    let px = image.pixels();
    let offsets: [isize; 16] = CIRCLE.map(|(dx, dy)| dy as isize * w as isize + dx as isize);
    let mut scores = vec![0u16; w * h];
    let r = RADIUS as usize;
    for y in r..h - r {
        for x in r..w - r {
            let idx = y * w + x;
            let c = i16::from(px[idx]);
            // Any 9-arc covers at least two of the four compass points.
            let mut brighter = 0;
            let mut darker = 0;
            for k in [0usize, 4, 8, 12] {
                let p = i16::from(px[(idx as isize + offsets[k]) as usize]);
                brighter += usize::from(p > c + t);
                darker += usize::from(p < c - t);
            }
            if brighter < 2 && darker < 2 {
                continue;
            }
            let s = corner_score(&ring_at(image, &offsets, idx), c);
            if s >= t {
                scores[idx] = s as u16;
            }
        }
    }
    scores
}

/// Detects FAST-9 corners in row-major order.
///
/// With `nonmax`, a corner survives only if its score is strictly greater than
/// every other score in its 3x3 neighborhood.
pub fn detect_fast(image: &Image, threshold: u8, nonmax: bool) -> Result<Vec<Keypoint>, KeypointError> {
    if threshold == 0 {
        return Err(KeypointError::InvalidParameter("FAST threshold must be >= 1"));
    }
    let min = 2 * RADIUS + 1;
    if image.width() < min || image.height() < min {
        return Err(KeypointError::ImageTooSmall {
            width: image.width(),
            height: image.height(),
            min,
        });
    }
    let scores = score_map(image, threshold);
    let w = image.width() as usize;
    let h = image.height() as usize;
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let s = scores[y * w + x];
            if s == 0 {
                continue;
            }
            // Corners never sit on the outermost ring, so neighbors exist.
            let keep = !nonmax
                || (y - 1..=y + 1).all(|ny| {
                    (x - 1..=x + 1).all(|nx| (nx == x && ny == y) || scores[ny * w + nx] < s)
                });
            if keep {
                out.push(Keypoint {
                    x: x as u32,
                    y: y as u32,
                    detector: Detector::Fast,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_of_isolated_peak() {
        // Center 255, ring 0: darker arc everywhere, min |p - c| = 255.
        assert_eq!(corner_score(&[0; 16], 255), 254);
        assert!(corner_score(&[100; 16], 100) <= 0);
    }

    #[test]
    fn rejects_zero_threshold_and_small_images() {
        let img = Image::filled(6, 10, 0).unwrap();
        assert!(matches!(
            detect_fast(&img, 20, true),
            Err(KeypointError::ImageTooSmall { .. })
        ));
        let img = Image::filled(7, 7, 0).unwrap();
        assert!(detect_fast(&img, 0, true).is_err());
        assert!(detect_fast(&img, 1, true).unwrap().is_empty());
    }
}
