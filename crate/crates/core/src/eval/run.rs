//! Running the full pipeline over a dataset, with per-stage wall-clock timing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Sample};
use super::metrics::{covered_truths, match_detections, MatchCounts};
use super::EvalError;
use crate::keypoints::{detect_all, DetectorConfig, KeypointIndex};
use crate::pipeline::{detect, nms, RegionScorer, ScoreContext, ScorerSpec, Selection, DEFAULT_NMS_IOU};
use crate::proposal::{propose_grid, propose_indexed, propose_uniform, ProposalConfig, ProposalSet};
use crate::raster::Image;
use crate::rng::derive_seed;

/// Default IoU a detection must exceed to count as correct.
pub const DEFAULT_IOU_MIN: f64 = 0.5;

/// Which proposer feeds the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProposerSpec {
    /// Keypoint-density proposal. `config.seed` is replaced per image.
    Kdrp {
        detectors: Vec<DetectorConfig>,
        config: ProposalConfig,
    },
    Uniform {
        count: usize,
        min_side: u32,
    },
    Grid {
        scales: Vec<u32>,
        stride_fraction: f64,
    },
}

impl Default for ProposerSpec {
    fn default() -> Self {
        Self::Kdrp {
            detectors: DetectorConfig::default_set(),
            config: ProposalConfig::default(),
        }
    }
}

impl ProposerSpec {
    /// Same proposer with a different region budget. The grid has no budget.
    pub fn with_budget(&self, budget: usize) -> Result<Self, EvalError> {
        let mut out = self.clone();
        match &mut out {
            Self::Kdrp { config, .. } => config.regions_needed = budget,
            Self::Uniform { count, .. } => *count = budget,
            Self::Grid { .. } => {
                return Err(EvalError::InvalidConfig(
                    "the grid proposer has no region budget".into(),
                ))
            }
        }
        Ok(out)
    }

    pub fn propose(&self, image: &Image, seed: u64) -> Result<ProposalSet<f64>, EvalError> {
        Ok(match self {
            Self::Kdrp { detectors, config } => {
                let keypoints = detect_all(image, detectors)?;
                let index = KeypointIndex::build(image.dims(), &keypoints)?;
                propose_indexed(&index, &ProposalConfig { seed, ..config.clone() })?
            }
            Self::Uniform { count, min_side } => propose_uniform(image.dims(), *count, *min_side, seed)?,
            Self::Grid {
                scales,
                stride_fraction,
            } => propose_grid(image.dims(), scales, *stride_fraction)?,
        })
    }
}

/// Everything needed to run proposal through selection on a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub proposer: ProposerSpec,
    pub scorer: ScorerSpec,
    pub nms_iou: f64,
    pub selection: Selection,
    pub iou_min: f64,
    /// Master seed; per-image seeds are derived from it.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            proposer: ProposerSpec::default(),
            scorer: ScorerSpec::Oracle { noise: 0.0 },
            nms_iou: DEFAULT_NMS_IOU,
            selection: Selection::default(),
            iou_min: DEFAULT_IOU_MIN,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(EvalError::InvalidConfig(format!("NMS IoU {} outside [0, 1]", self.nms_iou)));
        }
        if !(self.iou_min > 0.0 && self.iou_min <= 1.0) {
            return Err(EvalError::InvalidConfig(format!("iou_min {} outside (0, 1]", self.iou_min)));
        }
        Ok(())
    }
}

/// Seconds spent in each stage for one image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    /// Keypoint detection plus region generation.
    pub proposal: f64,
    pub scoring: f64,
    pub nms: f64,
    pub selection: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.proposal + self.scoring + self.nms + self.selection
    }

    fn map(samples: &[StageTimings], f: impl Fn(&[f64]) -> f64) -> StageTimings {
        let col = |g: fn(&StageTimings) -> f64| f(&samples.iter().map(g).collect::<Vec<_>>());
        StageTimings {
            proposal: col(|t| t.proposal),
            scoring: col(|t| t.scoring),
            nms: col(|t| t.nms),
            selection: col(|t| t.selection),
        }
    }
}

/// Result of running the pipeline on one image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageOutcome {
    pub counts: MatchCounts,
    pub truths: usize,
    /// Truths covered by some proposal at IoU above `iou_min`.
    pub covered: usize,
    pub proposals: usize,
    pub timings: StageTimings,
}

/// Runs all four stages on one sample. `index` selects the per-image seeds.
pub fn run_image(
    sample: &Sample,
    index: usize,
    config: &PipelineConfig,
    scorer: &dyn RegionScorer<f64>,
) -> Result<ImageOutcome, EvalError> {
    let proposal_seed = derive_seed(config.seed, &[index as u64, 0]);
    let scorer_seed = derive_seed(config.seed, &[index as u64, 1]);

    let t0 = Instant::now();
    let proposals = config.proposer.propose(&sample.image, proposal_seed)?;
    let t1 = Instant::now();
    let ctx = ScoreContext {
        image: &sample.image,
        truth: Some(&sample.truth),
        seed: scorer_seed,
    };
    let detections = detect(scorer, ctx, &proposals.regions)?;
    let t2 = Instant::now();
    let kept = nms(&detections, config.nms_iou)?;
    let t3 = Instant::now();
    let selected = config.selection.apply(&kept)?;
    let t4 = Instant::now();

    let counts = match_detections(&selected, &sample.truth, config.iou_min).counts;
    let covered = covered_truths(&proposals.regions, &sample.truth, &config.iou_min);
    Ok(ImageOutcome {
        counts,
        truths: sample.truth.len(),
        covered,
        proposals: proposals.regions.len(),
        timings: StageTimings {
            proposal: (t1 - t0).as_secs_f64(),
            scoring: (t2 - t1).as_secs_f64(),
            nms: (t3 - t2).as_secs_f64(),
            selection: (t4 - t3).as_secs_f64(),
        },
    })
}

/// Wall-clock summary. Kept apart from the deterministic fields of
/// [`EvalReport`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub per_image: Vec<StageTimings>,
    pub mean: StageTimings,
    pub median: StageTimings,
    pub mean_total: f64,
    pub median_total: f64,
    /// Total proposal time over total pipeline time.
    pub proposal_fraction: f64,
}

impl TimingSummary {
    pub fn from_samples(per_image: Vec<StageTimings>) -> Self {
        let totals: Vec<f64> = per_image.iter().map(StageTimings::total).collect();
        let grand: f64 = totals.iter().sum();
        let proposal: f64 = per_image.iter().map(|t| t.proposal).sum();
        Self {
            mean: StageTimings::map(&per_image, mean),
            median: StageTimings::map(&per_image, median),
            mean_total: mean(&totals),
            median_total: median(&totals),
            proposal_fraction: if grand > 0.0 { proposal / grand } else { 0.0 },
            per_image,
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Dataset-level evaluation result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub images: usize,
    pub truths: usize,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// `tp / (tp + fp + fn)`; `None` (JSON `null`) when undefined.
    pub accuracy: Option<f64>,
    /// Fraction of truths covered by some proposal; `None` without truths.
    pub proposal_recall: Option<f64>,
    pub mean_proposals: f64,
    pub timing: TimingSummary,
}

impl EvalReport {
    /// Aggregates per-image outcomes, in dataset order.
    pub fn from_outcomes(outcomes: &[ImageOutcome]) -> Self {
        let counts: MatchCounts = outcomes.iter().map(|o| o.counts.clone()).sum();
        let truths: usize = outcomes.iter().map(|o| o.truths).sum();
        let covered: usize = outcomes.iter().map(|o| o.covered).sum();
        let proposals: Vec<f64> = outcomes.iter().map(|o| o.proposals as f64).collect();
        Self {
            images: outcomes.len(),
            truths,
            tp: counts.tp,
            fp: counts.fp,
            fn_: counts.fn_,
            accuracy: counts.accuracy(),
            proposal_recall: (truths > 0).then(|| covered as f64 / truths as f64),
            mean_proposals: mean(&proposals),
            timing: TimingSummary::from_samples(outcomes.iter().map(|o| o.timings).collect()),
        }
    }

    pub fn counts(&self) -> MatchCounts {
        MatchCounts {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
        }
    }
}

/// Runs the pipeline over every image serially and reports accuracy and
/// stage timings.
pub fn time_pipeline(dataset: &Dataset, config: &PipelineConfig) -> Result<EvalReport, EvalError> {
    Ok(EvalReport::from_outcomes(&run_dataset(dataset, config)?))
}

/// Per-image outcomes, serially, in dataset order.
pub fn run_dataset(dataset: &Dataset, config: &PipelineConfig) -> Result<Vec<ImageOutcome>, EvalError> {
    config.validate()?;
    let scorer = config.scorer.build(dataset.num_classes)?;
    dataset
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| run_image(s, i, config, scorer.as_ref()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mean(&[1.0, 2.0, 6.0]), 3.0);
        let t = TimingSummary::from_samples(vec![
            StageTimings { proposal: 1.0, scoring: 1.0, nms: 0.0, selection: 0.0 },
            StageTimings { proposal: 3.0, scoring: 1.0, nms: 0.0, selection: 0.0 },
        ]);
        assert_eq!(t.proposal_fraction, 4.0 / 6.0);
        assert_eq!(t.mean_total, 3.0);
        assert_eq!(t.mean.proposal, 2.0);
    }

    #[test]
    fn grid_has_no_budget() {
        let g = ProposerSpec::Grid { scales: vec![32], stride_fraction: 0.5 };
        assert!(g.with_budget(10).is_err());
        let u = ProposerSpec::Uniform { count: 5, min_side: 16 };
        assert_eq!(u.with_budget(9).unwrap(), ProposerSpec::Uniform { count: 9, min_side: 16 });
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        assert!(PipelineConfig { nms_iou: 1.2, ..Default::default() }.validate().is_err());
        assert!(PipelineConfig { iou_min: 0.0, ..Default::default() }.validate().is_err());
    }
}
