//! Region scoring, non-maximum suppression and hypothesis selection.
//!
//! The feature extractor is replaced by a [`RegionScorer`]. Three scorers are
//! provided: an oracle that reads ground truth (for controlled tests), a
//! seeded random scorer, and a table scorer that replays scores computed
//! elsewhere from a JSON file.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{iou, GroundTruthBox};
use crate::raster::{Image, Region};
use crate::rng::SeededRng;
use crate::scalar::Real;

/// Index of the background class in [`ClassScores`].
pub const BACKGROUND: usize = 0;

/// Default NMS overlap limit.
pub const DEFAULT_NMS_IOU: f64 = 0.3;
/// Default probability threshold for selection.
pub const DEFAULT_P_MIN: f64 = 0.88;

const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("the oracle scorer requires ground truth")]
    MissingGroundTruth,
    #[error("invalid class scores: {0}")]
    InvalidScores(String),
    #[error("score table has no entry for region {0}")]
    MissingRegion(Region),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot read score table {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed score table: {0}")]
    Json(#[from] serde_json::Error),
}

/// Probabilities over `n` object classes plus background at index 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassScores<T> {
    pub probabilities: Vec<T>,
}

impl<T: Real> ClassScores<T> {
    pub fn new(probabilities: Vec<T>) -> Result<Self, PipelineError> {
        if probabilities.len() < 2 {
            return Err(PipelineError::InvalidScores(
                "need background plus at least one class".into(),
            ));
        }
        if let Some(p) = probabilities.iter().find(|&&p| !(p >= T::zero() && p <= T::one())) {
            return Err(PipelineError::InvalidScores(format!("probability {p} outside [0, 1]")));
        }
        let sum = probabilities.iter().fold(T::zero(), |a, &b| a + b);
        if (sum - T::one()).abs() > T::lit(SUM_TOLERANCE) {
            return Err(PipelineError::InvalidScores(format!("probabilities sum to {sum}")));
        }
        Ok(Self { probabilities })
    }

    /// All mass on background.
    pub fn background(num_classes: usize) -> Self {
        let mut probabilities = vec![T::zero(); num_classes + 1];
        probabilities[BACKGROUND] = T::one();
        Self { probabilities }
    }

    pub fn num_classes(&self) -> usize {
        self.probabilities.len() - 1
    }

    /// Most probable object class (lowest id on ties) with its probability.
    pub fn best_class(&self) -> (usize, T) {
        let mut best = (1, self.probabilities[1]);
        for (c, &p) in self.probabilities.iter().enumerate().skip(2) {
            if p > best.1 {
                best = (c, p);
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection<T> {
    pub region: Region,
    pub class_id: usize,
    pub probability: T,
}

impl<T: Real> Detection<T> {
    /// One detection per region for its best object class; `None` if that
    /// class has zero probability.
    pub fn from_scores(region: Region, scores: &ClassScores<T>) -> Option<Self> {
        let (class_id, probability) = scores.best_class();
        (probability > T::zero()).then_some(Self {
            region,
            class_id,
            probability,
        })
    }
}

/// Canonical order: probability descending, then `(y, x, h, w)`, then class.
pub fn detection_order<T: Real>(a: &Detection<T>, b: &Detection<T>) -> Ordering {
    b.probability
        .partial_cmp(&a.probability)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.region.order_key().cmp(&b.region.order_key()))
        .then_with(|| a.class_id.cmp(&b.class_id))
}

/// Inputs a scorer may consult for one image.
#[derive(Clone, Copy, Debug)]
pub struct ScoreContext<'a> {
    pub image: &'a Image,
    pub truth: Option<&'a [GroundTruthBox]>,
    /// Per-image seed for stochastic scorers.
    pub seed: u64,
}

/// Stand-in for the region classifier: one [`ClassScores`] per region.
pub trait RegionScorer<T: Real> {
    fn num_classes(&self) -> usize;

    fn score(&self, ctx: ScoreContext<'_>, regions: &[Region]) -> Result<Vec<ClassScores<T>>, PipelineError>;
}

/// Scores each region by its best IoU against ground truth, plus optional noise.
#[derive(Clone, Debug)]
pub struct OracleScorer {
    pub num_classes: usize,
    /// Uniform noise in `[-noise, noise]` added to the IoU; must be in `[0, 0.5)`.
    pub noise: f64,
}

impl OracleScorer {
    pub fn new(num_classes: usize, noise: f64) -> Result<Self, PipelineError> {
        if num_classes == 0 {
            return Err(PipelineError::InvalidParameter("num_classes must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&noise) {
            return Err(PipelineError::InvalidParameter(format!("oracle noise {noise} outside [0, 0.5)")));
        }
        Ok(Self { num_classes, noise })
    }
}

impl<T: Real> RegionScorer<T> for OracleScorer {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn score(&self, ctx: ScoreContext<'_>, regions: &[Region]) -> Result<Vec<ClassScores<T>>, PipelineError> {
        let truth = ctx.truth.ok_or(PipelineError::MissingGroundTruth)?;
        if let Some(gt) = truth.iter().find(|gt| gt.class_id == 0 || gt.class_id > self.num_classes) {
            return Err(PipelineError::InvalidParameter(format!(
                "ground-truth class {} outside [1, {}]",
                gt.class_id, self.num_classes
            )));
        }
        let mut rng = SeededRng::new(ctx.seed);
        let noise = T::lit(self.noise);
        Ok(regions
            .iter()
            .map(|r| {
                let mut best: Option<(T, usize)> = None;
                for gt in truth {
                    let v: T = iou(r, &gt.region);
                    if best.map_or(true, |(b, _)| v > b) {
                        best = Some((v, gt.class_id));
                    }
                }
                let jitter = if self.noise > 0.0 {
                    noise * T::lit(2.0 * rng.unit() - 1.0)
                } else {
                    T::zero()
                };
                match best {
                    Some((m, class)) if m > T::zero() => {
                        let p = (m + jitter).max(T::zero()).min(T::one());
                        let mut probabilities = vec![T::zero(); self.num_classes + 1];
                        probabilities[class] = p;
                        probabilities[BACKGROUND] = T::one() - p;
                        ClassScores { probabilities }
                    }
                    _ => ClassScores::background(self.num_classes),
                }
            })
            .collect())
    }
}

/// Seeded uniform draw from the probability simplex (flat Dirichlet).
#[derive(Clone, Debug)]
pub struct RandomScorer {
    pub num_classes: usize,
}

impl<T: Real> RegionScorer<T> for RandomScorer {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn score(&self, ctx: ScoreContext<'_>, regions: &[Region]) -> Result<Vec<ClassScores<T>>, PipelineError> {
        let mut rng = SeededRng::new(ctx.seed);
        Ok(regions
            .iter()
            .map(|_| {
                let e: Vec<f64> = (0..=self.num_classes).map(|_| -(1.0 - rng.unit()).ln()).collect();
                let total: f64 = e.iter().sum();
                ClassScores {
                    probabilities: e.iter().map(|v| T::lit(v / total)).collect(),
                }
            })
            .collect())
    }
}

/// One row of the external score table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScoreRow {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub probabilities: Vec<f64>,
}

/// Precomputed scores keyed by region geometry.
#[derive(Clone, Debug)]
pub struct TableScorer {
    num_classes: usize,
    table: HashMap<Region, ClassScores<f64>>,
}

impl TableScorer {
    pub fn from_rows(rows: Vec<ScoreRow>) -> Result<Self, PipelineError> {
        let mut table = HashMap::with_capacity(rows.len());
        let mut num_classes = None;
        for row in rows {
            let region = Region::new(row.x, row.y, row.w, row.h)
                .map_err(|e| PipelineError::InvalidScores(e.to_string()))?;
            let scores = ClassScores::new(row.probabilities)?;
            match num_classes {
                None => num_classes = Some(scores.num_classes()),
                Some(n) if n != scores.num_classes() => {
                    return Err(PipelineError::InvalidScores(format!(
                        "row {region} has {} classes, expected {n}",
                        scores.num_classes()
                    )))
                }
                Some(_) => {}
            }
            if table.insert(region, scores).is_some() {
                return Err(PipelineError::InvalidScores(format!("duplicate row for {region}")));
            }
        }
        Ok(Self {
            num_classes: num_classes.unwrap_or(1),
            table,
        })
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, PipelineError> {
        Self::from_rows(serde_json::from_slice(bytes)?)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let bytes = std::fs::read(path).map_err(|source| PipelineError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&bytes)
    }
}

impl RegionScorer<f64> for TableScorer {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn score(&self, _ctx: ScoreContext<'_>, regions: &[Region]) -> Result<Vec<ClassScores<f64>>, PipelineError> {
        regions
            .iter()
            .map(|r| self.table.get(r).cloned().ok_or(PipelineError::MissingRegion(*r)))
            .collect()
    }
}

/// Serializable choice of scorer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScorerSpec {
    Oracle { noise: f64 },
    UniformRandom,
    ExternalFile { path: PathBuf },
}

impl ScorerSpec {
    /// Instantiates the scorer for a dataset with `num_classes` object classes.
    pub fn build(&self, num_classes: usize) -> Result<Box<dyn RegionScorer<f64> + Send + Sync>, PipelineError> {
        Ok(match self {
            Self::Oracle { noise } => Box::new(OracleScorer::new(num_classes, *noise)?),
            Self::UniformRandom => Box::new(RandomScorer { num_classes }),
            Self::ExternalFile { path } => Box::new(TableScorer::load(path)?),
        })
    }
}

/// Scores regions and keeps the best object class of each as a detection.
pub fn detect<T: Real>(
    scorer: &dyn RegionScorer<T>,
    ctx: ScoreContext<'_>,
    regions: &[Region],
) -> Result<Vec<Detection<T>>, PipelineError> {
    let scores = scorer.score(ctx, regions)?;
    Ok(regions
        .iter()
        .zip(&scores)
        .filter_map(|(r, s)| Detection::from_scores(*r, s))
        .collect())
}

fn check_unit<T: Real>(v: T, what: &str) -> Result<(), PipelineError> {
    if v >= T::zero() && v <= T::one() {
        Ok(())
    } else {
        Err(PipelineError::InvalidParameter(format!("{what} {v} outside [0, 1]")))
    }
}

/// Per-class greedy non-maximum suppression.
///
/// Within each class, detections are visited in [`detection_order`] and kept
/// if their IoU with every kept detection of that class is at most `alpha`.
/// The survivors of all classes are returned in [`detection_order`].
pub fn nms<T: Real>(detections: &[Detection<T>], alpha: T) -> Result<Vec<Detection<T>>, PipelineError> {
    check_unit(alpha, "NMS overlap")?;
    let mut by_class: BTreeMap<usize, Vec<Detection<T>>> = BTreeMap::new();
    for d in detections {
        by_class.entry(d.class_id).or_default().push(*d);
    }
    let mut kept = Vec::new();
    for (_, mut group) in by_class {
        group.sort_by(detection_order);
        let start = kept.len();
        for d in group {
            if kept[start..]
                .iter()
                .all(|k: &Detection<T>| iou::<T>(&k.region, &d.region) <= alpha)
            {
                kept.push(d);
            }
        }
    }
    kept.sort_by(detection_order);
    Ok(kept)
}

/// The `k` most probable detections.
pub fn select_topk<T: Real>(detections: &[Detection<T>], k: usize) -> Vec<Detection<T>> {
    let mut sorted = detections.to_vec();
    sorted.sort_by(detection_order);
    sorted.truncate(k);
    sorted
}

/// Detections with probability strictly greater than `p_min`, order preserved.
pub fn select_threshold<T: Real>(detections: &[Detection<T>], p_min: T) -> Result<Vec<Detection<T>>, PipelineError> {
    check_unit(p_min, "probability threshold")?;
    Ok(detections.iter().copied().filter(|d| d.probability > p_min).collect())
}

/// Hypothesis-selection rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum Selection {
    TopK(usize),
    Threshold(f64),
}

impl Default for Selection {
    fn default() -> Self {
        Self::Threshold(DEFAULT_P_MIN)
    }
}

impl Selection {
    pub fn apply(&self, detections: &[Detection<f64>]) -> Result<Vec<Detection<f64>>, PipelineError> {
        match *self {
            Self::TopK(k) => Ok(select_topk(detections, k)),
            Self::Threshold(p) => select_threshold(detections, p),
        }
    }
}

impl std::str::FromStr for Selection {
    type Err = String;

    /// `topk:K` or `threshold:P`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (mode, value) = s
            .split_once(':')
            .ok_or_else(|| format!("expected topk:K or threshold:P, got {s:?}"))?;
        match mode {
            "topk" => value.parse().map(Self::TopK).map_err(|e| format!("bad k: {e}")),
            "threshold" => {
                let p: f64 = value.parse().map_err(|e| format!("bad threshold: {e}"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("threshold {p} outside [0, 1]"));
                }
                Ok(Self::Threshold(p))
            }
            other => Err(format!("unknown selection mode {other:?}")),
        }
    }
}

impl std::fmt::Display for Selection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::TopK(k) => write!(f, "topk:{k}"),
            Self::Threshold(p) => write!(f, "threshold:{p}"),
        }
    }
}
