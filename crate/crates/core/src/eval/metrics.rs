//! IoU, detection matching, accuracy and proposal recall.

use serde::{Deserialize, Serialize};

use crate::eval::GroundTruthBox;
use crate::pipeline::{detection_order, Detection};
use crate::raster::Region;
use crate::scalar::{Fraction, Real};

/// Intersection over union with half-open rectangles.
pub fn iou<F: Fraction>(a: &Region, b: &Region) -> F {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return F::zero();
    }
    let union = a.area() + b.area() - inter;
    F::from_count(inter) / F::from_count(union)
}

/// Per-image outcome of [`match_detections`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl MatchCounts {
    pub fn add(&mut self, other: &MatchCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    /// `tp / (tp + fp + fn)`, or `None` when nothing was detected or annotated.
    pub fn accuracy<F: Fraction>(&self) -> Option<F> {
        let denom = self.tp + self.fp + self.fn_;
        (denom > 0).then(|| F::from_count(self.tp) / F::from_count(denom))
    }
}

impl std::iter::Sum for MatchCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |mut acc, c| {
            acc.add(&c);
            acc
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchResult {
    pub counts: MatchCounts,
    /// `(detection index, truth index)` for every true positive, in matching order.
    pub pairs: Vec<(usize, usize)>,
}

/// Greedy confidence-ordered matching.
///
/// Detections are visited by descending probability. Each one claims the
/// unmatched same-class truth with the highest IoU, provided that IoU is
/// strictly above `iou_min`. Unclaimed detections are false positives and
/// unclaimed truths are false negatives.
pub fn match_detections<T: Real>(
    detections: &[Detection<T>],
    truth: &[GroundTruthBox],
    iou_min: T,
) -> MatchResult {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&i, &j| detection_order(&detections[i], &detections[j]));

    let mut claimed = vec![false; truth.len()];
    let mut pairs = Vec::new();
    for d in order {
        let det = &detections[d];
        let mut best: Option<(usize, T)> = None;
        for (t, gt) in truth.iter().enumerate() {
            if claimed[t] || gt.class_id != det.class_id {
                continue;
            }
            let v: T = iou(&det.region, &gt.region);
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((t, v));
            }
        }
        if let Some((t, v)) = best {
            if v > iou_min {
                claimed[t] = true;
                pairs.push((d, t));
            }
        }
    }
    let tp = pairs.len() as u64;
    MatchResult {
        counts: MatchCounts {
            tp,
            fp: detections.len() as u64 - tp,
            fn_: truth.len() as u64 - tp,
        },
        pairs,
    }
}

/// Micro-averaged accuracy: counts are summed first, the ratio taken once.
pub fn accuracy<'a, F: Fraction>(per_image: impl IntoIterator<Item = &'a MatchCounts>) -> Option<F> {
    per_image.into_iter().cloned().sum::<MatchCounts>().accuracy()
}

/// Number of truths covered by some proposal at IoU strictly above `iou_min`.
pub fn covered_truths<F: Fraction>(proposals: &[Region], truth: &[GroundTruthBox], iou_min: &F) -> usize {
    truth
        .iter()
        .filter(|gt| proposals.iter().any(|p| iou::<F>(p, &gt.region) > *iou_min))
        .count()
}

/// Class-agnostic fraction of truths covered by at least one proposal, or
/// `None` when there are no truths.
pub fn proposal_recall<F: Fraction>(proposals: &[Region], truth: &[GroundTruthBox], iou_min: F) -> Option<F> {
    if truth.is_empty() {
        return None;
    }
    let hit = covered_truths(proposals, truth, &iou_min);
    Some(F::from_count(hit as u64) / F::from_count(truth.len() as u64))
}
