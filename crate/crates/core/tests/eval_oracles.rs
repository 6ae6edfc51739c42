//! Metrics, synthetic data, timing and the budget sweep.

use std::path::Path;

use kdrp::density::density_baseline;
use kdrp::eval::{
    accuracy, budget_sweep, generate_synthetic, iou, match_detections, proposal_recall, render_one, time_pipeline,
    write_sweep_csv, Dataset, GroundTruthBox, MatchCounts, PipelineConfig, ProposerSpec, Sample, SynthSpec,
};
use kdrp::keypoints::{detect_fast, KeypointIndex};
use kdrp::proposal::propose_uniform;
use kdrp::{DetectorConfig, Detection, Dims, Image, ProposalConfig, Rational64, Region, SeededRng};

fn gt(x: u32, y: u32, w: u32, h: u32, class_id: usize) -> GroundTruthBox {
    GroundTruthBox { region: Region { x, y, w, h }, class_id }
}

fn det(region: Region, class_id: usize, probability: f64) -> Detection {
    Detection { region, class_id, probability }
}

#[test]
fn iou_analytic_cases() {
    let a = Region { x: 0, y: 0, w: 10, h: 10 };
    let b = Region { x: 5, y: 0, w: 10, h: 10 };
    let far = Region { x: 50, y: 50, w: 3, h: 3 };
    assert_eq!(iou::<Rational64>(&a, &a), Rational64::from_integer(1));
    assert_eq!(iou::<Rational64>(&a, &far), Rational64::from_integer(0));
    assert_eq!(iou::<Rational64>(&a, &b), Rational64::new(1, 3));
    // Touching edges share no pixels.
    assert_eq!(iou::<Rational64>(&a, &Region { x: 10, ..a }), Rational64::from_integer(0));
}

#[test]
fn iou_fuzz_properties() {
    let mut rng = SeededRng::new(1);
    let region = |rng: &mut SeededRng| Region {
        x: rng.below(30) as u32,
        y: rng.below(30) as u32,
        w: 1 + rng.below(20) as u32,
        h: 1 + rng.below(20) as u32,
    };
    for _ in 0..5000 {
        let (a, b) = (region(&mut rng), region(&mut rng));
        let ab = iou::<Rational64>(&a, &b);
        assert_eq!(ab, iou::<Rational64>(&b, &a));
        assert!(ab >= Rational64::from_integer(0) && ab <= Rational64::from_integer(1));
        assert_eq!(iou::<Rational64>(&a, &a), Rational64::from_integer(1));
    }
}

#[test]
fn matching_examples() {
    let t = gt(0, 0, 10, 10, 1);
    let on = det(t.region, 1, 0.9);
    assert_eq!(match_detections(&[on], &[t], 0.5).counts, MatchCounts { tp: 1, fp: 0, fn_: 0 });
    let wrong = det(t.region, 2, 0.9);
    assert_eq!(match_detections(&[wrong], &[t], 0.5).counts, MatchCounts { tp: 0, fp: 1, fn_: 1 });
}

/// Maximum number of disjoint (detection, truth) pairs over all assignments.
fn optimal_matches(dets: &[Detection], truth: &[GroundTruthBox], iou_min: f64, used: &mut Vec<bool>) -> usize {
    let Some((d, rest)) = dets.split_first() else { return 0 };
    let mut best = optimal_matches(rest, truth, iou_min, used);
    for (t, g) in truth.iter().enumerate() {
        if !used[t] && g.class_id == d.class_id && iou::<f64>(&d.region, &g.region) > iou_min {
            used[t] = true;
            best = best.max(1 + optimal_matches(rest, truth, iou_min, used));
            used[t] = false;
        }
    }
    best
}

#[test]
fn two_detections_one_truth() {
    let t = gt(0, 0, 10, 10, 1);
    // Each covers 70 of the truth's 100 pixels and nothing else: IoU 0.7.
    let a = det(Region { x: 0, y: 0, w: 10, h: 7 }, 1, 0.9);
    let b = det(Region { x: 0, y: 3, w: 10, h: 7 }, 1, 0.8);
    assert_eq!(iou::<Rational64>(&a.region, &t.region), Rational64::new(7, 10));
    let m = match_detections(&[b, a], &[t], 0.5);
    assert_eq!(m.counts, MatchCounts { tp: 1, fp: 1, fn_: 0 });
    assert_eq!(m.pairs, vec![(1, 0)]);
    assert_eq!(optimal_matches(&[a, b], &[t], 0.5, &mut vec![false]), 1);
}

#[test]
fn matching_fuzz_conserves_truths() {
    let mut rng = SeededRng::new(2);
    for _ in 0..2000 {
        let boxes = |n: u64, rng: &mut SeededRng| -> Vec<(Region, usize)> {
            (0..rng.below(n))
                .map(|_| {
                    let r = Region {
                        x: rng.below(40) as u32,
                        y: rng.below(40) as u32,
                        w: 5 + rng.below(15) as u32,
                        h: 5 + rng.below(15) as u32,
                    };
                    (r, 1 + rng.below(3) as usize)
                })
                .collect()
        };
        let truth: Vec<GroundTruthBox> = boxes(6, &mut rng).into_iter().map(|(region, class_id)| GroundTruthBox { region, class_id }).collect();
        let dets: Vec<Detection> = boxes(8, &mut rng)
            .into_iter()
            .map(|(r, c)| det(r, c, rng.below(100) as f64 / 100.0))
            .collect();
        let m = match_detections(&dets, &truth, 0.5);
        assert_eq!(m.counts.tp + m.counts.fn_, truth.len() as u64);
        assert_eq!(m.counts.tp + m.counts.fp, dets.len() as u64);
        let mut seen_t: Vec<usize> = m.pairs.iter().map(|p| p.1).collect();
        seen_t.sort();
        seen_t.dedup();
        assert_eq!(seen_t.len(), m.pairs.len());
        assert!(m.counts.tp as usize <= optimal_matches(&dets, &truth, 0.5, &mut vec![false; truth.len()]));
    }
}

#[test]
fn micro_averaged_accuracy() {
    let c = MatchCounts { tp: 2, fp: 1, fn_: 1 };
    assert_eq!(c.accuracy::<Rational64>(), Some(Rational64::new(1, 2)));
    assert_eq!(MatchCounts::default().accuracy::<f64>(), None);
    assert_eq!(MatchCounts { tp: 0, fp: 0, fn_: 5 }.accuracy::<f64>(), Some(0.0));

    // Per-image ratios would give (1 + 0) / 2 = 0.5; summed counts give 1/4.
    let per_image = [MatchCounts { tp: 1, fp: 0, fn_: 0 }, MatchCounts { tp: 0, fp: 2, fn_: 1 }];
    assert_eq!(accuracy::<Rational64>(&per_image), Some(Rational64::new(1, 4)));
}

#[test]
fn recall_matches_brute_force_scan() {
    let dims = Dims::new(512, 512);
    let truth = [gt(200, 150, 96, 64, 1)];
    let set = propose_uniform::<f64>(dims, 2250, 16, 2250).unwrap();
    // Oracle: exact integer comparison inter / union > 1/2.
    let hit = set.regions.iter().any(|p| {
        let t = truth[0].region;
        let ix = (p.x + p.w).min(t.x + t.w).saturating_sub(p.x.max(t.x)) as u64;
        let iy = (p.y + p.h).min(t.y + t.h).saturating_sub(p.y.max(t.y)) as u64;
        let inter = ix * iy;
        2 * inter > (p.w * p.h) as u64 + (t.w * t.h) as u64 - inter
    });
    let expected = if hit { 1.0 } else { 0.0 };
    assert_eq!(proposal_recall(&set.regions, &truth, 0.5), Some(expected));
    assert_eq!(proposal_recall(&[], &truth, 0.5), Some(0.0));
    assert_eq!(proposal_recall::<f64>(&set.regions, &[], 0.5), None);
}

#[test]
fn recall_is_monotone_under_inclusion() {
    let dims = Dims::new(128, 128);
    let mut rng = SeededRng::new(3);
    let truth: Vec<GroundTruthBox> = (0..8)
        .map(|_| gt(rng.below(96) as u32, rng.below(96) as u32, 16 + rng.below(16) as u32, 16 + rng.below(16) as u32, 1))
        .collect();
    let all = propose_uniform::<f64>(dims, 400, 8, 4).unwrap().regions;
    let mut prev = 0.0;
    for n in (0..=400).step_by(20) {
        let r = proposal_recall(&all[..n], &truth, 0.5).unwrap();
        assert!(r >= prev);
        prev = r;
    }
    let exact: Vec<Region> = truth.iter().map(|t| t.region).collect();
    assert_eq!(proposal_recall(&exact, &truth, 0.5), Some(1.0));
}

#[test]
fn textured_object_is_keypoint_dense() {
    let spec = SynthSpec {
        width: 512,
        height: 512,
        images: 1,
        min_objects: 1,
        max_objects: 1,
        object_sides: vec![64],
        gradient: 0.0,
        seed: 11,
        ..Default::default()
    };
    let s = render_one(&spec, 0).unwrap();
    let obj = s.truth[0].region;
    let kps = detect_fast(&s.image, 20, true).unwrap();
    let stats = density_baseline::<f64>(&KeypointIndex::build(s.image.dims(), &kps).unwrap()).unwrap();
    // 512 / 16 = 32-pixel cells; objects sit on a 32-pixel lattice.
    let (mut inside, mut outside) = (vec![], vec![]);
    for (i, &c) in stats.cell_counts.iter().enumerate() {
        let cell = Region { x: (i % 16) as u32 * 32, y: (i / 16) as u32 * 32, w: 32, h: 32 };
        if cell.intersection_area(&obj) == cell.area() {
            inside.push(c as f64);
        } else {
            outside.push(c as f64);
        }
    }
    assert_eq!(inside.len(), 4);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&inside) > mean(&outside), "{} vs {}", mean(&inside), mean(&outside));
    assert!(inside.iter().all(|&c| c > outside.iter().cloned().fold(0.0, f64::max)));
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn synthetic_generation_is_byte_identical() {
    let spec = SynthSpec { width: 160, height: 120, images: 3, object_sides: vec![32], seed: 5, ..Default::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate_synthetic(&spec, a.path()).unwrap();
    generate_synthetic(&spec, b.path()).unwrap();
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    assert_eq!(fa.len(), 5);
    assert_eq!(fa, fb);
    let ds = Dataset::load(&a.path().join("manifest.jsonl")).unwrap();
    assert_eq!(ds.samples.len(), 3);
    assert_eq!(ds.num_classes, 5);
}

#[test]
fn zero_object_range_gives_empty_truth() {
    let spec = SynthSpec { width: 64, height: 64, images: 5, min_objects: 0, max_objects: 0, ..Default::default() };
    let dir = tempfile::tempdir().unwrap();
    let m = generate_synthetic(&spec, dir.path()).unwrap();
    assert!(m.entries.iter().all(|e| e.boxes.is_empty()));
}

fn synthetic_dataset(images: usize, width: u32, height: u32, seed: u64) -> Dataset {
    let spec = SynthSpec { width, height, images, object_sides: vec![32, 64], seed, ..Default::default() };
    let samples = (0..images)
        .map(|i| {
            let s = render_one(&spec, i).unwrap();
            Sample { path: format!("img_{i}").into(), image: s.image, truth: s.truth }
        })
        .collect();
    Dataset { samples, num_classes: spec.classes }
}

fn kdrp(budget: usize) -> ProposerSpec {
    ProposerSpec::Kdrp {
        detectors: DetectorConfig::default_set(),
        config: ProposalConfig { regions_needed: budget, ..Default::default() },
    }
}

#[test]
fn stage_timings_are_consistent() {
    let ds = synthetic_dataset(4, 160, 120, 1);
    let report = time_pipeline(&ds, &PipelineConfig { proposer: kdrp(200), ..Default::default() }).unwrap();
    assert_eq!(report.timing.per_image.len(), 4);
    for t in &report.timing.per_image {
        assert!(t.proposal >= 0.0 && t.scoring >= 0.0 && t.nms >= 0.0 && t.selection >= 0.0);
        assert!((t.total() - (t.proposal + t.scoring + t.nms + t.selection)).abs() < 1e-12);
    }
    assert!((0.0..=1.0).contains(&report.timing.proposal_fraction));
    assert_eq!(report.tp + report.fn_, ds.truth_count() as u64);
}

#[test]
fn kdrp_proposal_costs_more_than_uniform() {
    let ds = synthetic_dataset(50, 160, 120, 2);
    let run = |proposer| time_pipeline(&ds, &PipelineConfig { proposer, ..Default::default() }).unwrap();
    let k = run(kdrp(300));
    let u = run(ProposerSpec::Uniform { count: 300, min_side: 16 });
    let slower = k
        .timing
        .per_image
        .iter()
        .zip(&u.timing.per_image)
        .filter(|(a, b)| a.proposal > b.proposal)
        .count();
    assert!(k.timing.mean.proposal > u.timing.mean.proposal);
    assert!(slower >= 45, "KDRP slower on only {slower} of 50 images");
}

fn non_timing_csv(rows: &[kdrp::eval::SweepRow]) -> Vec<String> {
    let mut buf = Vec::new();
    write_sweep_csv(rows, &mut buf).unwrap();
    String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| l.split(',').take(4).collect::<Vec<_>>().join(","))
        .collect()
}

#[test]
fn sweep_shapes_and_determinism() {
    let ds = synthetic_dataset(3, 160, 120, 3);
    let cfg = PipelineConfig { proposer: kdrp(100), seed: 42, ..Default::default() };
    let single = budget_sweep(&ds, &cfg, &[50], 1).unwrap();
    assert_eq!(single.len(), 1);
    let a = budget_sweep(&ds, &cfg, &[50, 150], 2).unwrap();
    let b = budget_sweep(&ds, &cfg, &[50, 150], 2).unwrap();
    assert_eq!(a.len(), 4);
    assert_eq!(non_timing_csv(&a), non_timing_csv(&b));
    assert_eq!(non_timing_csv(&a)[0], "budget,trial,recall,accuracy");
}

#[test]
fn evaluation_is_deterministic_except_timing() {
    let ds = synthetic_dataset(3, 160, 120, 4);
    let cfg = PipelineConfig { proposer: kdrp(300), seed: 9, ..Default::default() };
    let strip = |r: kdrp::eval::EvalReport| {
        let mut v = serde_json::to_value(r).unwrap();
        v.as_object_mut().unwrap().remove("timing");
        v
    };
    assert_eq!(strip(time_pipeline(&ds, &cfg).unwrap()), strip(time_pipeline(&ds, &cfg).unwrap()));
}

#[test]
fn flat_image_has_no_recall_signal() {
    let ds = Dataset {
        samples: vec![Sample { path: "flat".into(), image: Image::filled(64, 64, 9).unwrap(), truth: vec![] }],
        num_classes: 1,
    };
    let r = time_pipeline(&ds, &PipelineConfig { proposer: kdrp(50), ..Default::default() }).unwrap();
    assert_eq!(r.proposal_recall, None);
    assert_eq!(r.accuracy, None);
}
