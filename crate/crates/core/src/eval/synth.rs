//! Deterministic synthetic detection datasets.
//!
//! Backgrounds are smooth linear gradients. Objects are axis-aligned squares
//! filled with 2x2 high-contrast speckle, which is rich in corners. Object
//! sides come from a fixed list and positions sit on a lattice, so a sliding
//! grid with the right scales and stride contains every object exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{DatasetManifest, GroundTruthBox, ManifestEntry, CLASSES_FILE};
use super::EvalError;
use crate::raster::{encode_pgm, Image, Region};
use crate::rng::{derive_seed, SeededRng};

/// Manifest file name written by [`generate_synthetic`].
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub width: u32,
    pub height: u32,
    pub images: usize,
    /// Inclusive range of objects drawn per image.
    pub min_objects: usize,
    pub max_objects: usize,
    pub classes: usize,
    /// Fraction of 2x2 speckle blocks inside an object that are forced to
    /// black or white.
    pub texture_density: f64,
    /// Largest background ramp, in gray levels across the image.
    pub gradient: f64,
    pub object_sides: Vec<u32>,
    /// Object corners are multiples of this.
    pub placement_step: u32,
    /// Minimum gap between objects, in pixels.
    pub gap: u32,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            images: 10,
            min_objects: 1,
            max_objects: 4,
            classes: 5,
            texture_density: 0.5,
            gradient: 60.0,
            object_sides: vec![32, 64, 128],
            placement_step: 32,
            gap: 8,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidConfig(m.into()));
        if self.width < 16 || self.height < 16 {
            return bad("synthetic images must be at least 16x16");
        }
        if self.min_objects > self.max_objects {
            return bad("object count range is empty");
        }
        if self.classes == 0 {
            return bad("at least one class is required");
        }
        if !(self.texture_density > 0.0 && self.texture_density <= 1.0) {
            return bad("texture density must lie in (0, 1]");
        }
        if !(self.gradient >= 0.0 && self.gradient <= 128.0) {
            return bad("gradient must lie in [0, 128]");
        }
        if self.placement_step == 0 {
            return bad("placement step must be positive");
        }
        if self.max_objects > 0 {
            if self.object_sides.is_empty() {
                return bad("object sides must be non-empty");
            }
            if self
                .object_sides
                .iter()
                .any(|&s| s == 0 || s > self.width.min(self.height))
            {
                return bad("every object side must fit the image");
            }
        }
        Ok(())
    }
}

/// A rendered image and its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticImage {
    pub image: Image,
    pub truth: Vec<GroundTruthBox>,
}

/// Renders image `index` of the dataset described by `spec`.
///
/// Objects that cannot be placed without overlap after a bounded number of
/// tries are dropped, so crowded specs may yield fewer than drawn.
pub fn render_one(spec: &SynthSpec, index: usize) -> Result<SyntheticImage, EvalError> {
    spec.validate()?;
    let mut rng = SeededRng::new(derive_seed(spec.seed, &[index as u64]));
    let (w, h) = (spec.width, spec.height);

    let base = 40.0 + rng.unit() * 60.0;
    let ax = (rng.unit() * 2.0 - 1.0) * spec.gradient;
    let ay = (rng.unit() * 2.0 - 1.0) * spec.gradient;
    let mut image = Image::from_fn(w, h, |x, y| {
        let v = base + ax * x as f64 / w as f64 + ay * y as f64 / h as f64;
        v.round().clamp(0.0, 255.0) as u8
    })
    .expect("validated dimensions");

    let span = (spec.max_objects - spec.min_objects) as u64 + 1;
    let wanted = spec.min_objects + rng.below(span) as usize;
    let mut truth: Vec<GroundTruthBox> = Vec::with_capacity(wanted);
    for _ in 0..wanted {
        let side = spec.object_sides[rng.below(spec.object_sides.len() as u64) as usize];
        let class_id = 1 + rng.below(spec.classes as u64) as usize;
        let step = spec.placement_step;
        let cols = (w - side) / step + 1;
        let rows = (h - side) / step + 1;
        for _ in 0..100 {
            let region = Region {
                x: rng.below(u64::from(cols)) as u32 * step,
                y: rng.below(u64::from(rows)) as u32 * step,
                w: side,
                h: side,
            };
            let padded = Region {
                x: region.x.saturating_sub(spec.gap),
                y: region.y.saturating_sub(spec.gap),
                w: side + 2 * spec.gap,
                h: side + 2 * spec.gap,
            };
            if truth.iter().all(|t| t.region.intersection_area(&padded) == 0) {
                truth.push(GroundTruthBox { region, class_id });
                break;
            }
        }
    }

    for gt in &truth {
        let r = gt.region;
        let tone = (60 + 37 * gt.class_id % 140) as u8;
        for by in (r.y..r.y + r.h).step_by(2) {
            for bx in (r.x..r.x + r.w).step_by(2) {
                let v = if rng.unit() < spec.texture_density {
                    if rng.below(2) == 0 {
                        0
                    } else {
                        255
                    }
                } else {
                    tone
                };
                for y in by..(by + 2).min(r.y + r.h) {
                    for x in bx..(bx + 2).min(r.x + r.w) {
                        image.set(x, y, v);
                    }
                }
            }
        }
    }
    Ok(SyntheticImage { image, truth })
}

/// Renders the whole dataset in memory.
pub fn render_synthetic(spec: &SynthSpec) -> Result<Vec<SyntheticImage>, EvalError> {
    spec.validate()?;
    (0..spec.images).map(|i| render_one(spec, i)).collect()
}

pub fn image_file_name(index: usize) -> String {
    format!("img_{index:05}.pgm")
}

/// Writes `img_NNNNN.pgm` files, `manifest.jsonl` and `classes.json` into
/// `out_dir`, creating it if needed.
pub fn generate_synthetic(spec: &SynthSpec, out_dir: &Path) -> Result<DatasetManifest, EvalError> {
    spec.validate()?;
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| EvalError::Io { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut entries = Vec::with_capacity(spec.images);
    for i in 0..spec.images {
        let s = render_one(spec, i)?;
        let name = image_file_name(i);
        let path = out_dir.join(&name);
        std::fs::write(&path, encode_pgm(&s.image)).map_err(io(&path))?;
        entries.push(ManifestEntry {
            image: name.into(),
            boxes: s.truth,
        });
    }
    let class_names: Vec<String> = (1..=spec.classes).map(|c| format!("class_{c}")).collect();
    let manifest = DatasetManifest::new(entries, Some(class_names))?;
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_jsonl()).map_err(io(&path))?;
    let path = out_dir.join(CLASSES_FILE);
    let names = serde_json::to_string(&manifest.class_names).expect("strings serialize");
    std::fs::write(&path, names + "\n").map_err(io(&path))?;
    Ok(manifest)
}
