use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use kdrp::eval::{
    budget_sweep, generate_synthetic, run_image, summarize, write_sweep_csv, Dataset, EvalReport, ImageOutcome,
    PipelineConfig, ProposerSpec, StageTimings, SynthSpec, TimingSummary,
};
use kdrp::keypoints::detect_all;
use kdrp::pipeline::{RegionScorer, ScorerSpec};
use kdrp::proposal::propose_indexed;
use kdrp::raster::{decode_pnm, draw_regions, encode_ppm};
use kdrp::{DetectorConfig, Image, KeypointIndex, ProposalConfig, ProposalSet, SeededRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::*;
use crate::error::CliError;

/// Global settings every subcommand sees.
pub struct Context {
    pub seed: u64,
    pub pool: rayon::ThreadPool,
}

/// Where a command's machine-readable output goes. Human-readable
/// summaries go to standard output unless the data already does.
struct Sink {
    writer: Box<dyn Write>,
    to_stdout: bool,
}

impl Sink {
    fn open(path: Option<&Path>) -> Result<Self, CliError> {
        Ok(match path {
            Some(p) => Self {
                writer: Box::new(BufWriter::new(File::create(p).map_err(CliError::io(p))?)),
                to_stdout: false,
            },
            None => Self { writer: Box::new(std::io::stdout().lock()), to_stdout: true },
        })
    }

    fn finish(mut self, path: Option<&Path>) -> Result<(), CliError> {
        self.writer
            .flush()
            .map_err(CliError::io(path.unwrap_or(Path::new("<stdout>"))))
    }

    fn note(&self, msg: impl std::fmt::Display) {
        if self.to_stdout {
            eprintln!("{msg}");
        } else {
            println!("{msg}");
        }
    }
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<Sink, CliError> {
    let mut sink = Sink::open(path)?;
    let where_ = path.unwrap_or(Path::new("<stdout>"));
    serde_json::to_writer(&mut sink.writer, value).map_err(|source| CliError::Json { path: where_.into(), source })?;
    writeln!(sink.writer).map_err(CliError::io(where_))?;
    Ok(sink)
}

fn read_image(path: &Path) -> Result<Image, CliError> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    decode_pnm(&bytes).map_err(|source| CliError::Raster { path: path.into(), source })
}

fn detectors(p: &ProposerArgs) -> Result<Vec<DetectorConfig>, CliError> {
    if p.detectors.is_empty() {
        return Err(CliError::Usage("at least one detector is required".into()));
    }
    Ok(p.detectors.iter().map(|d| d.config()).collect())
}

fn proposer_spec(p: &ProposerArgs, budget: usize) -> Result<ProposerSpec, CliError> {
    Ok(match p.proposer {
        ProposerKind::Kdrp => ProposerSpec::Kdrp {
            detectors: detectors(p)?,
            config: proposal_config(p, budget, 0),
        },
        ProposerKind::Uniform => ProposerSpec::Uniform { count: budget, min_side: p.min_side },
        ProposerKind::Grid => ProposerSpec::Grid {
            scales: p.scales.clone(),
            stride_fraction: p.stride_fraction,
        },
    })
}

fn proposal_config(p: &ProposerArgs, budget: usize, seed: u64) -> ProposalConfig {
    ProposalConfig {
        regions_needed: budget,
        min_region_side: p.min_side,
        max_attempts_factor: p.max_attempts_factor,
        density_normalization: p.normalize_density,
        seed,
    }
}

pub fn propose(ctx: &Context, a: &ProposeArgs) -> Result<(), CliError> {
    let image = read_image(&a.image)?;
    let p = &a.proposer;
    let keypoints = if p.proposer == ProposerKind::Kdrp || a.dump_keypoints.is_some() {
        Some(detect_all(&image, &detectors(p)?)?)
    } else {
        None
    };
    let set: ProposalSet = match (p.proposer, &keypoints) {
        (ProposerKind::Kdrp, Some(kps)) => {
            let index = KeypointIndex::build(image.dims(), kps)?;
            propose_indexed(&index, &proposal_config(p, a.regions, ctx.seed))?
        }
        _ => proposer_spec(p, a.regions)?.propose(&image, ctx.seed)?,
    };
    if let (Some(path), Some(kps)) = (&a.dump_keypoints, &keypoints) {
        write_json(Some(path), kps)?.finish(Some(path))?;
    }
    let sink = write_json(a.out.as_deref(), &set)?;
    sink.note(format_args!(
        "{} regions from {} candidates ({}x{} image)",
        set.regions.len(),
        set.attempts,
        image.width(),
        image.height()
    ));
    sink.finish(a.out.as_deref())
}

fn scorer_spec(p: &PipelineArgs) -> ScorerSpec {
    match &p.scorer {
        ScorerArg::Oracle => ScorerSpec::Oracle { noise: p.noise },
        ScorerArg::Random => ScorerSpec::UniformRandom,
        ScorerArg::File(path) => ScorerSpec::ExternalFile { path: path.clone() },
    }
}

fn pipeline_config(ctx: &Context, p: &PipelineArgs, budget: usize) -> Result<PipelineConfig, CliError> {
    let config = PipelineConfig {
        proposer: proposer_spec(&p.proposer, budget)?,
        scorer: scorer_spec(p),
        nms_iou: p.nms_iou,
        selection: p.select,
        iou_min: p.iou_min,
        seed: ctx.seed,
    };
    config.validate()?;
    Ok(config)
}

type Scorer = Box<dyn RegionScorer<f64> + Send + Sync>;

/// Runs every image, in parallel unless `serial`, collecting in dataset order.
fn run_all(
    ctx: &Context,
    dataset: &Dataset,
    config: &PipelineConfig,
    scorer: &Scorer,
    serial: bool,
) -> Result<Vec<ImageOutcome>, CliError> {
    let run = |(i, s)| run_image(s, i, config, scorer.as_ref());
    let outcomes: Result<Vec<_>, _> = if serial {
        dataset.samples.iter().enumerate().map(run).collect()
    } else {
        ctx.pool
            .install(|| dataset.samples.par_iter().enumerate().map(run).collect())
    };
    Ok(outcomes?)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.4}"))
}

pub fn eval(ctx: &Context, a: &EvalArgs) -> Result<(), CliError> {
    let config = pipeline_config(ctx, &a.pipeline, a.budget)?;
    let dataset = Dataset::load(&a.pipeline.manifest)?;
    let scorer = config.scorer.build(dataset.num_classes)?;
    let report = EvalReport::from_outcomes(&run_all(ctx, &dataset, &config, &scorer, false)?);
    let sink = write_json(a.report.as_deref(), &report)?;
    sink.note(format_args!(
        "images {}  truths {}  tp {}  fp {}  fn {}  accuracy {}  proposal recall {}",
        report.images,
        report.truths,
        report.tp,
        report.fp,
        report.fn_,
        opt(report.accuracy),
        opt(report.proposal_recall)
    ));
    sink.finish(a.report.as_deref())
}

pub const BENCH_HEADER: &str = "image,repeat,proposal_s,scoring_s,nms_s,selection_s,total_s";

fn stage_line(label: &str, t: &StageTimings, total: f64) -> String {
    format!(
        "{label:<7} proposal {:.6}s  scoring {:.6}s  nms {:.6}s  selection {:.6}s  total {:.6}s",
        t.proposal, t.scoring, t.nms, t.selection, total
    )
}

pub fn bench(ctx: &Context, a: &BenchArgs) -> Result<(), CliError> {
    if a.repeat == 0 {
        return Err(CliError::Usage("--repeat must be at least 1".into()));
    }
    let config = pipeline_config(ctx, &a.pipeline, a.budget)?;
    let dataset = Dataset::load(&a.pipeline.manifest)?;
    let scorer = config.scorer.build(dataset.num_classes)?;
    let mut sink = Sink::open(a.out.as_deref())?;
    let where_ = a.out.as_deref().unwrap_or(Path::new("<stdout>")).to_owned();
    writeln!(sink.writer, "{BENCH_HEADER}").map_err(CliError::io(&where_))?;
    let mut all = Vec::with_capacity(dataset.samples.len() * a.repeat);
    for r in 0..a.repeat {
        for (i, o) in run_all(ctx, &dataset, &config, &scorer, a.single_thread)?.iter().enumerate() {
            let t = o.timings;
            writeln!(
                sink.writer,
                "{i},{r},{:.6},{:.6},{:.6},{:.6},{:.6}",
                t.proposal,
                t.scoring,
                t.nms,
                t.selection,
                t.total()
            )
            .map_err(CliError::io(&where_))?;
            all.push(t);
        }
    }
    let summary = TimingSummary::from_samples(all);
    sink.note(stage_line("mean", &summary.mean, summary.mean_total));
    sink.note(stage_line("median", &summary.median, summary.median_total));
    sink.note(format_args!("proposal fraction {:.4}", summary.proposal_fraction));
    sink.finish(a.out.as_deref())
}

pub fn sweep(ctx: &Context, a: &SweepArgs) -> Result<(), CliError> {
    let first = a.budgets.first().copied().unwrap_or(1);
    let config = pipeline_config(ctx, &a.pipeline, first)?;
    let dataset = Dataset::load(&a.pipeline.manifest)?;
    let rows = budget_sweep(&dataset, &config, &a.budgets, a.trials)?;
    let mut sink = Sink::open(a.out.as_deref())?;
    let where_ = a.out.as_deref().unwrap_or(Path::new("<stdout>")).to_owned();
    write_sweep_csv(&rows, &mut sink.writer).map_err(CliError::io(&where_))?;
    sink.note("budget  trials  recall (se)        accuracy  proposal_ms");
    for s in summarize(&rows) {
        sink.note(format_args!(
            "{:<7} {:<7} {:.4} ({:.4})    {:.4}    {:.3}",
            s.budget, s.trials, s.mean_recall, s.recall_stderr, s.mean_accuracy, s.mean_proposal_ms
        ));
    }
    sink.finish(a.out.as_deref())
}

pub fn synth(ctx: &Context, a: &SynthArgs) -> Result<(), CliError> {
    let side = a.size.width.min(a.size.height);
    let defaults = SynthSpec::default();
    let mut sides: Vec<u32> = defaults.object_sides.iter().copied().filter(|&s| s <= side).collect();
    if sides.is_empty() {
        sides.push(side);
    }
    let spec = SynthSpec {
        width: a.size.width,
        height: a.size.height,
        images: a.images,
        min_objects: a.objects.min,
        max_objects: a.objects.max,
        classes: a.classes,
        texture_density: a.texture_density,
        object_sides: sides,
        seed: ctx.seed,
        ..defaults
    };
    let manifest = generate_synthetic(&spec, &a.out_dir)?;
    let boxes: usize = manifest.entries.iter().map(|e| e.boxes.len()).sum();
    println!(
        "wrote {} images with {} objects to {}",
        manifest.entries.len(),
        boxes,
        a.out_dir.display()
    );
    Ok(())
}

pub fn viz(ctx: &Context, a: &VizArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&a.sample_fraction) {
        return Err(CliError::Usage(format!("--sample-fraction {} outside [0, 1]", a.sample_fraction)));
    }
    let image = read_image(&a.image)?;
    let text = std::fs::read_to_string(&a.proposals).map_err(CliError::io(&a.proposals))?;
    let set: ProposalSet =
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: a.proposals.clone(), source })?;
    let mut rng = SeededRng::new(ctx.seed);
    let chosen: Vec<_> = set
        .regions
        .iter()
        .enumerate()
        .filter(|_| rng.trial(a.sample_fraction))
        .map(|(i, r)| (*r, i))
        .collect();
    let drawn = draw_regions(&image, &chosen).map_err(|source| CliError::Raster { path: a.proposals.clone(), source })?;
    std::fs::write(&a.out, encode_ppm(&drawn)).map_err(CliError::io(&a.out))?;
    println!("drew {} of {} regions to {}", chosen.len(), set.regions.len(), a.out.display());
    Ok(())
}
