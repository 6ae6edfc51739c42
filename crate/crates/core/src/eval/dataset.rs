//! Annotated datasets: JSON Lines manifests and the images they reference.
//!
//! Each manifest line is one image:
//!
//! ```text
//! {"image": "img_00000.pgm", "boxes": [{"x": 10, "y": 20, "w": 32, "h": 32, "class": 2}]}
//! ```
//!
//! Image paths are resolved relative to the manifest's directory. Class names
//! live in an optional `classes.json` (a JSON array of strings) next to the
//! manifest; without it the class count is the largest id in use.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::raster::{decode_pnm, Image, Region};

/// File name of the class-name sidecar.
pub const CLASSES_FILE: &str = "classes.json";

/// An annotated object. Class ids start at 1; 0 is background.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "BoxRecord", try_from = "BoxRecord")]
pub struct GroundTruthBox {
    pub region: Region,
    pub class_id: usize,
}

#[derive(Serialize, Deserialize)]
struct BoxRecord {
    x: u32,
    y: u32,
    w: u32,
    h: u32,
    class: usize,
}

impl From<GroundTruthBox> for BoxRecord {
    fn from(b: GroundTruthBox) -> Self {
        Self {
            x: b.region.x,
            y: b.region.y,
            w: b.region.w,
            h: b.region.h,
            class: b.class_id,
        }
    }
}

impl TryFrom<BoxRecord> for GroundTruthBox {
    type Error = String;

    fn try_from(r: BoxRecord) -> Result<Self, Self::Error> {
        if r.class == 0 {
            return Err("class 0 is reserved for background".into());
        }
        let region = Region::new(r.x, r.y, r.w, r.h).map_err(|e| e.to_string())?;
        Ok(Self {
            region,
            class_id: r.class,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub boxes: Vec<GroundTruthBox>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub class_names: Vec<String>,
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Parses manifest lines; blank lines are skipped.
    pub fn parse_jsonl(text: &str) -> Result<Vec<ManifestEntry>, EvalError> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| EvalError::Manifest {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("manifest entries serialize"));
            out.push('\n');
        }
        out
    }

    /// Builds a manifest, naming classes `class_1..class_n` when no names are
    /// given, and checks every box class against them.
    pub fn new(entries: Vec<ManifestEntry>, class_names: Option<Vec<String>>) -> Result<Self, EvalError> {
        let max_class = entries
            .iter()
            .flat_map(|e| e.boxes.iter().map(|b| b.class_id))
            .max()
            .unwrap_or(0);
        let class_names = class_names
            .unwrap_or_else(|| (1..=max_class.max(1)).map(|c| format!("class_{c}")).collect());
        if max_class > class_names.len() {
            return Err(EvalError::InvalidConfig(format!(
                "box class {max_class} exceeds the {} named classes",
                class_names.len()
            )));
        }
        Ok(Self {
            entries,
            class_names,
        })
    }

    /// Reads a manifest and its optional class sidecar. Image paths are made
    /// relative to the current directory.
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut entries = Self::parse_jsonl(&text)?;
        for e in &mut entries {
            e.image = base.join(&e.image);
        }
        let sidecar = base.join(CLASSES_FILE);
        let names = if sidecar.exists() {
            let text = read_to_string(&sidecar)?;
            Some(serde_json::from_str(&text).map_err(|e| EvalError::Manifest {
                line: 0,
                message: format!("{}: {e}", sidecar.display()),
            })?)
        } else {
            None
        };
        Self::new(entries, names)
    }
}

fn read_to_string(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_owned(),
        source,
    })
}

/// One decoded image with its annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub path: PathBuf,
    pub image: Image,
    pub truth: Vec<GroundTruthBox>,
}

/// Images held in memory for evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn truth_count(&self) -> usize {
        self.samples.iter().map(|s| s.truth.len()).sum()
    }

    /// Decodes every image in `manifest`.
    ///
    /// All missing images are reported together; any other failure aborts.
    pub fn from_manifest(manifest: &DatasetManifest) -> Result<Self, EvalError> {
        let missing: Vec<PathBuf> = manifest
            .entries
            .iter()
            .filter(|e| !e.image.is_file())
            .map(|e| e.image.clone())
            .collect();
        if !missing.is_empty() {
            return Err(EvalError::MissingImages(missing));
        }
        let mut samples = Vec::with_capacity(manifest.entries.len());
        for e in &manifest.entries {
            let bytes = std::fs::read(&e.image).map_err(|source| EvalError::Io {
                path: e.image.clone(),
                source,
            })?;
            let image = decode_pnm(&bytes).map_err(|source| EvalError::Raster {
                path: e.image.clone(),
                source,
            })?;
            for b in &e.boxes {
                b.region.check_fits(image.dims()).map_err(|source| EvalError::Raster {
                    path: e.image.clone(),
                    source,
                })?;
            }
            samples.push(Sample {
                path: e.image.clone(),
                image,
                truth: e.boxes.clone(),
            });
        }
        Ok(Self {
            samples,
            num_classes: manifest.num_classes(),
        })
    }

    pub fn load(manifest_path: &Path) -> Result<Self, EvalError> {
        Self::from_manifest(&DatasetManifest::load(manifest_path)?)
    }
}
