use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kdrp::pipeline::{Selection, DEFAULT_NMS_IOU};
use kdrp::DetectorConfig;

/// Keypoint-density region proposal: propose, evaluate, benchmark,
/// synthesize test data and visualize.
#[derive(Debug, Parser)]
#[command(name = "kdrp", version)]
pub struct Cli {
    /// Master seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// JSON file of default flag values; command-line flags take precedence.
    #[arg(long, global = true, env = "KDRP_CONFIG", value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for per-image work (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propose regions for one image and write them as JSON.
    Propose(ProposeArgs),
    /// Run the full pipeline over a manifest and write an accuracy report.
    Eval(EvalArgs),
    /// Time each pipeline stage and write a CSV table.
    Bench(BenchArgs),
    /// Generate a synthetic dataset of textured objects.
    Synth(SynthArgs),
    /// Draw a random sample of proposals over an image.
    Viz(VizArgs),
    /// Measure recall and accuracy across region budgets.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProposerKind {
    Kdrp,
    Uniform,
    Grid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DetectorKind {
    Fast,
    ShiTomasi,
}

impl DetectorKind {
    pub fn config(self) -> DetectorConfig {
        match self {
            Self::Fast => DetectorConfig::fast_default(),
            Self::ShiTomasi => DetectorConfig::shi_tomasi_default(),
        }
    }
}

/// Flags shared by everything that builds proposals.
#[derive(Clone, Debug, Args)]
pub struct ProposerArgs {
    #[arg(long, value_enum, default_value_t = ProposerKind::Kdrp)]
    pub proposer: ProposerKind,

    /// Keypoint detectors feeding the density estimate.
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["fast", "shi-tomasi"])]
    pub detectors: Vec<DetectorKind>,

    /// Smallest allowed region side in pixels.
    #[arg(long, default_value_t = 16)]
    pub min_side: u32,

    /// Rescale region counts to the baseline cell area before scoring.
    #[arg(long)]
    pub normalize_density: bool,

    /// Candidate draws allowed per requested region before giving up.
    #[arg(long, default_value_t = 1000)]
    pub max_attempts_factor: u64,

    /// Window sides for the grid proposer.
    #[arg(long, value_delimiter = ',', default_values = ["32", "64", "128"])]
    pub scales: Vec<u32>,

    /// Grid stride as a fraction of the window side.
    #[arg(long, default_value_t = 0.25)]
    pub stride_fraction: f64,
}

#[derive(Debug, Args)]
pub struct ProposeArgs {
    /// Input PGM or PPM image.
    #[arg(long)]
    pub image: PathBuf,

    /// Number of regions to propose.
    #[arg(long, default_value_t = 2250)]
    pub regions: usize,

    #[command(flatten)]
    pub proposer: ProposerArgs,

    /// Output JSON path; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Also write the detected keypoints as a JSON array.
    #[arg(long, value_name = "FILE")]
    pub dump_keypoints: Option<PathBuf>,
}

/// Scorer choice: `oracle`, `random` or `file:PATH`.
#[derive(Clone, Debug, PartialEq)]
pub enum ScorerArg {
    Oracle,
    Random,
    File(PathBuf),
}

impl FromStr for ScorerArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "random" => Ok(Self::Random),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Self::File(p.into())),
                _ => Err(format!("expected oracle, random or file:PATH, got {s:?}")),
            },
        }
    }
}

impl std::fmt::Display for ScorerArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Oracle => f.write_str("oracle"),
            Self::Random => f.write_str("random"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Dataset plus every pipeline stage after proposal.
#[derive(Clone, Debug, Args)]
pub struct PipelineArgs {
    /// JSON Lines manifest of images and ground-truth boxes.
    #[arg(long)]
    pub manifest: PathBuf,

    #[command(flatten)]
    pub proposer: ProposerArgs,

    /// Region scorer: oracle, random or file:PATH.
    #[arg(long, default_value_t = ScorerArg::Oracle)]
    pub scorer: ScorerArg,

    /// Oracle scorer noise amplitude, in [0, 0.5).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,

    /// Same-class overlap above which NMS suppresses a detection.
    #[arg(long, default_value_t = DEFAULT_NMS_IOU)]
    pub nms_iou: f64,

    /// Hypothesis selection: topk:K or threshold:P.
    #[arg(long, default_value_t = Selection::default())]
    pub select: Selection,

    /// IoU a detection must exceed to match a ground-truth box.
    #[arg(long, default_value_t = kdrp::eval::DEFAULT_IOU_MIN)]
    pub iou_min: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,

    /// Regions proposed per image.
    #[arg(long, default_value_t = 2250)]
    pub budget: usize,

    /// Output report JSON; standard output if omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,

    /// Regions proposed per image.
    #[arg(long, default_value_t = 2250)]
    pub budget: usize,

    /// Passes over the dataset.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,

    /// Run serially so stage timings are free of contention.
    #[arg(long)]
    pub single_thread: bool,

    /// Output CSV; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,

    /// Region budgets, ascending.
    #[arg(long, value_delimiter = ',', default_values = ["100", "500", "1000", "2250"])]
    pub budgets: Vec<usize>,

    /// Independent runs per budget.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,

    /// Output CSV; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `WIDTHxHEIGHT`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Size {
    pub width: u32,
    pub height: u32,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s.split_once('x').ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
        let parse = |v: &str| v.parse::<u32>().map_err(|e| format!("bad size {s:?}: {e}"));
        Ok(Self { width: parse(w)?, height: parse(h)? })
    }
}

impl std::fmt::Display for Size {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// `MIN..MAX` or a single count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

impl FromStr for CountRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |v: &str| v.parse::<usize>().map_err(|e| format!("bad count range {s:?}: {e}"));
        let (min, max) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let n = parse(s)?;
                (n, n)
            }
        };
        if min > max {
            return Err(format!("empty count range {s:?}"));
        }
        Ok(Self { min, max })
    }
}

impl std::fmt::Display for CountRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.min, self.max)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory to write images, manifest.jsonl and classes.json into.
    #[arg(long)]
    pub out_dir: PathBuf,

    #[arg(long, default_value_t = 10)]
    pub images: usize,

    /// Image size as WIDTHxHEIGHT.
    #[arg(long, default_value_t = Size { width: 640, height: 480 })]
    pub size: Size,

    /// Objects per image as MIN..MAX (inclusive) or a single count.
    #[arg(long, default_value_t = CountRange { min: 1, max: 4 })]
    pub objects: CountRange,

    #[arg(long, default_value_t = 5)]
    pub classes: usize,

    /// Fraction of speckle blocks inside objects forced to black or white.
    #[arg(long, default_value_t = 0.5)]
    pub texture_density: f64,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    /// Input PGM or PPM image.
    #[arg(long)]
    pub image: PathBuf,

    /// Proposal JSON written by `propose`.
    #[arg(long)]
    pub proposals: PathBuf,

    /// Probability of drawing each region.
    #[arg(long, default_value_t = 0.05)]
    pub sample_fraction: f64,

    /// Output PPM.
    #[arg(long)]
    pub out: PathBuf,
}
