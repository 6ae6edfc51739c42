//! Runs the `kdrp` binary on small inputs and checks outputs and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kdrp::raster::{decode_pnm, encode_pgm};
use kdrp::{Image, SeededRng};
use serde_json::Value;

fn kdrp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdrp"))
        .args(args)
        .env_remove("KDRP_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = kdrp(args);
    assert!(
        out.status.success(),
        "kdrp {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

/// A three-image synthetic dataset in `dir/ds`.
fn dataset(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("ds");
    let mut args = vec!["synth", "--out-dir", s(&out), "--images", "3", "--size", "320x240", "--seed", "4"];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

fn write_pgm(path: &Path, image: &Image) {
    std::fs::write(path, encode_pgm(image)).unwrap();
}

#[test]
fn help_lists_defaults_and_exits_zero() {
    let eval = String::from_utf8(ok(&["eval", "--help"]).stdout).unwrap();
    for needle in ["[default: 2250]", "[default: 0.3]", "[default: threshold:0.88]", "[default: 0.5]"] {
        assert!(eval.contains(needle), "missing {needle}");
    }
    let propose = String::from_utf8(ok(&["propose", "--help"]).stdout).unwrap();
    assert!(propose.contains("[default: 2250]"));
    let viz = String::from_utf8(ok(&["viz", "--help"]).stdout).unwrap();
    assert!(viz.contains("[default: 0.05]"));
    ok(&["--version"]);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&kdrp(&["frobnicate"])), 1);
    assert_eq!(code(&kdrp(&["propose"])), 1);
    assert_eq!(code(&kdrp(&["eval", "--manifest", "m", "--select", "median"])), 1);
    assert_eq!(code(&kdrp(&["eval", "--manifest", "m", "--scorer", "cnn"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("a.pgm");
    write_pgm(&img, &Image::filled(64, 64, 0).unwrap());
    let out = kdrp(&["propose", "--image", s(&img), "--min-side", "100"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn io_errors_exit_two() {
    let out = kdrp(&["propose", "--image", "/nonexistent/x.pgm"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/x.pgm"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pgm");
    std::fs::write(&bad, b"P2\n1 1\n255\n0\n").unwrap();
    assert_eq!(code(&kdrp(&["propose", "--image", s(&bad)])), 2);
}

#[test]
fn attempt_exhaustion_exits_three() {
    // Texture only in a thin left strip: most candidates miss it and are
    // accepted with probability about 0.4, short of the 1/2 needed.
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("strip.pgm");
    let mut rng = SeededRng::new(1);
    write_pgm(&img, &Image::from_fn(320, 240, |x, _| if (3..12).contains(&x) { rng.below(256) as u8 } else { 90 }).unwrap());
    let out = kdrp(&[
        "propose", "--image", s(&img), "--regions", "1000", "--max-attempts-factor", "2", "--detectors", "fast",
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_images_exit_four_and_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset(dir.path(), &[]);
    std::fs::remove_file(ds.join("img_00000.pgm")).unwrap();
    std::fs::remove_file(ds.join("img_00002.pgm")).unwrap();
    let out = kdrp(&["eval", "--manifest", s(&ds.join("manifest.jsonl")), "--budget", "50"]);
    assert_eq!(code(&out), 4);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("img_00000.pgm") && err.contains("img_00002.pgm"), "{err}");
}

#[test]
fn propose_is_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset(dir.path(), &[]);
    let img = ds.join("img_00000.pgm");
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        ok(&["propose", "--image", s(&img), "--regions", "10", "--seed", "7", "--out", s(p)]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v = read_json(&a);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["regions"].as_array().unwrap().len(), 10);
    assert!(v["attempts"].as_u64().unwrap() >= 10);

    let big = dir.path().join("big.pgm");
    let wide = dir.path().join("wide");
    ok(&["synth", "--out-dir", s(&wide), "--images", "1", "--size", "640x480"]);
    std::fs::copy(wide.join("img_00000.pgm"), &big).unwrap();
    let out = dir.path().join("big.json");
    ok(&["propose", "--image", s(&big), "--out", s(&out)]);
    assert_eq!(read_json(&out)["regions"].as_array().unwrap().len(), 2250);
}

#[test]
fn grid_proposer_count_matches_formula() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("g.pgm");
    write_pgm(&img, &Image::filled(640, 480, 10).unwrap());
    let out = dir.path().join("g.json");
    ok(&["propose", "--image", s(&img), "--proposer", "grid", "--scales", "64,128", "--stride-fraction", "0.5", "--out", s(&out)]);
    // floor((W - s) / stride) + 1 per axis: 19 x 14 at scale 64, 9 x 6 at 128.
    let n = read_json(&out)["regions"].as_array().unwrap().len();
    assert_eq!(n, 19 * 14 + 9 * 6);
    assert_eq!(read_json(&out)["seed"], Value::Null);
}

#[test]
fn keypoint_dump_is_a_json_array() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset(dir.path(), &[]);
    let kp = dir.path().join("kp.json");
    ok(&["propose", "--image", s(&ds.join("img_00001.pgm")), "--regions", "5", "--dump-keypoints", s(&kp), "--out", s(&dir.path().join("p.json"))]);
    let v = read_json(&kp);
    let arr = v.as_array().unwrap();
    assert!(!arr.is_empty());
    for k in arr {
        assert!(k["x"].as_u64().unwrap() < 320 && k["y"].as_u64().unwrap() < 240);
        assert!(k["detector"] == "fast" || k["detector"] == "shi_tomasi");
    }
}

fn eval_report(dir: &Path, manifest: &Path, name: &str, extra: &[&str]) -> Value {
    let report = dir.join(name);
    let mut args = vec!["eval", "--manifest", s(manifest), "--report", s(&report)];
    args.extend_from_slice(extra);
    ok(&args);
    read_json(&report)
}

#[test]
fn eval_oracle_grid_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), &[]).join("manifest.jsonl");
    let r = eval_report(dir.path(), &m, "r.json", &["--proposer", "grid"]);
    assert_eq!(r["accuracy"], 1.0);
    assert_eq!(r["fp"], 0);
    assert_eq!(r["fn"], 0);
    assert_eq!(r["proposal_recall"], 1.0);
}

#[test]
fn eval_threshold_one_admits_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), &[]).join("manifest.jsonl");
    let r = eval_report(dir.path(), &m, "r.json", &["--proposer", "grid", "--select", "threshold:1.0"]);
    assert_eq!(r["tp"], 0);
    assert_eq!(r["fn"], r["truths"]);
}

#[test]
fn eval_random_scorer_is_near_zero() {
    // With 20 classes plus background, a flat simplex draw puts more than
    // 0.88 on one object class with probability below 20 * 0.12^20.
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), &["--classes", "20"]).join("manifest.jsonl");
    let r = eval_report(dir.path(), &m, "r.json", &["--proposer", "uniform", "--budget", "500", "--scorer", "random"]);
    assert!(r["accuracy"].as_f64().unwrap() <= 0.05, "{r}");
    let topk = eval_report(dir.path(), &m, "t.json", &["--proposer", "uniform", "--budget", "500", "--scorer", "random", "--select", "topk:2"]);
    assert!(topk["accuracy"].as_f64().unwrap() <= 0.2, "{topk}");
}

#[test]
fn eval_external_score_table() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("i.pgm");
    write_pgm(&img, &Image::filled(64, 64, 0).unwrap());
    let manifest = dir.path().join("m.jsonl");
    std::fs::write(&manifest, format!("{{\"image\":\"{}\",\"boxes\":[{{\"x\":0,\"y\":0,\"w\":64,\"h\":64,\"class\":1}}]}}\n", s(&img))).unwrap();
    let table = dir.path().join("t.json");
    std::fs::write(&table, r#"[{"x":0,"y":0,"w":64,"h":64,"probabilities":[0.05,0.95]}]"#).unwrap();
    let scorer = format!("file:{}", s(&table));
    let r = eval_report(dir.path(), &manifest, "r.json", &["--proposer", "grid", "--scales", "64", "--scorer", &scorer]);
    assert_eq!(r["accuracy"], 1.0);

    // A proposal without a row leaves the evaluation incomplete.
    let out = kdrp(&["eval", "--manifest", s(&manifest), "--proposer", "grid", "--scales", "32", "--scorer", &scorer]);
    assert_eq!(code(&out), 4);
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn eval_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), &[]).join("manifest.jsonl");
    let base = ["--budget", "300", "--seed", "11", "--scorer", "oracle", "--noise", "0.2"];
    let a = eval_report(dir.path(), &m, "a.json", &[&base[..], &["--threads", "1"]].concat());
    let b = eval_report(dir.path(), &m, "b.json", &[&base[..], &["--threads", "4"]].concat());
    assert_eq!(without_timing(a.clone()), without_timing(b));
    let tp = a["tp"].as_u64().unwrap();
    assert_eq!(tp + a["fn"].as_u64().unwrap(), a["truths"].as_u64().unwrap());
}

#[test]
fn config_file_and_environment_supply_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("i.pgm");
    write_pgm(&img, &Image::filled(64, 64, 0).unwrap());
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"regions": 12, "seed": 3, "min-side": 20, "nms_iou": 0.5, "budgets": [1, 2]}"#).unwrap();
    let out = dir.path().join("o.json");

    ok(&["--config", s(&cfg), "propose", "--image", s(&img), "--out", s(&out)]);
    let v = read_json(&out);
    assert_eq!((v["seed"].as_u64(), v["regions"].as_array().unwrap().len()), (Some(3), 12));
    assert!(v["regions"].as_array().unwrap().iter().all(|r| r["w"].as_u64().unwrap() >= 20));

    ok(&["propose", "--config", s(&cfg), "--image", s(&img), "--regions", "4", "--seed", "9", "--out", s(&out)]);
    let v = read_json(&out);
    assert_eq!((v["seed"].as_u64(), v["regions"].as_array().unwrap().len()), (Some(9), 4));

    let via_env = Command::new(env!("CARGO_BIN_EXE_kdrp"))
        .args(["propose", "--image", s(&img), "--out", s(&out)])
        .env("KDRP_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(via_env.status.success());
    assert_eq!(read_json(&out)["regions"].as_array().unwrap().len(), 12);

    std::fs::write(&cfg, r#"{"regoins": 12}"#).unwrap();
    assert_eq!(code(&kdrp(&["--config", s(&cfg), "propose", "--image", s(&img)])), 1);
    assert_eq!(code(&kdrp(&["--config", "/nonexistent.json", "propose", "--image", s(&img)])), 2);
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn synth_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    ok(&["synth", "--out-dir", s(&empty), "--images", "0"]);
    assert!(std::fs::read(empty.join("manifest.jsonl")).unwrap().is_empty());

    let none = dir.path().join("none");
    ok(&["synth", "--out-dir", s(&none), "--images", "4", "--size", "96x64", "--objects", "0..0"]);
    for line in std::fs::read_to_string(none.join("manifest.jsonl")).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["boxes"].as_array().unwrap().is_empty());
    }

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["synth", "--out-dir", s(d), "--images", "3", "--size", "200x150", "--objects", "1..3", "--seed", "8"]);
    }
    assert_eq!(tree(&a), tree(&b));
    assert_eq!(code(&kdrp(&["synth", "--out-dir", s(&a), "--objects", "3..1"])), 1);
}

#[test]
fn viz_samples_regions() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("i.pgm");
    write_pgm(&img, &Image::filled(120, 80, 40).unwrap());
    let three = dir.path().join("three.json");
    std::fs::write(&three, r#"{"seed":1,"attempts":3,"regions":[{"x":0,"y":0,"w":10,"h":10},{"x":5,"y":5,"w":50,"h":20},{"x":100,"y":60,"w":20,"h":20}]}"#).unwrap();
    let ppm = dir.path().join("o.ppm");
    let out = ok(&["viz", "--image", s(&img), "--proposals", s(&three), "--sample-fraction", "1.0", "--out", s(&ppm)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("drew 3 of 3"));
    let bytes = std::fs::read(&ppm).unwrap();
    assert!(bytes.starts_with(b"P6\n120 80\n255\n"));
    let gray = decode_pnm(&bytes).unwrap();
    assert_eq!((gray.width(), gray.height()), (120, 80));

    let big = dir.path().join("big.json");
    let regions: Vec<String> = (0..2250).map(|i| format!("{{\"x\":{},\"y\":{},\"w\":16,\"h\":16}}", i % 100, i % 60)).collect();
    std::fs::write(&big, format!("{{\"seed\":0,\"attempts\":2250,\"regions\":[{}]}}", regions.join(","))).unwrap();
    let drawn = |seed: &str| {
        let out = ok(&["viz", "--image", s(&img), "--proposals", s(&big), "--out", s(&ppm), "--seed", seed]);
        let text = String::from_utf8(out.stdout).unwrap();
        let n: f64 = text.split_whitespace().nth(1).unwrap().parse().unwrap();
        (n, std::fs::read(&ppm).unwrap())
    };
    let (n, first) = drawn("5");
    // Binomial(2250, 0.05): mean 112.5, sd about 10.3.
    assert!((n - 112.5).abs() < 4.0 * (2250.0f64 * 0.05 * 0.95).sqrt(), "{n}");
    assert_eq!(drawn("5"), (n, first));
}

#[test]
fn bench_rows_per_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), &[]).join("manifest.jsonl");
    let csv = dir.path().join("b.csv");
    let out = ok(&["bench", "--manifest", s(&m), "--budget", "200", "--repeat", "3", "--single-thread", "--out", s(&csv)]);
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("mean") && summary.contains("median") && summary.contains("proposal fraction"));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("image,repeat,proposal_s,scoring_s,nms_s,selection_s,total_s"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 9);
    for img in 0..3 {
        assert_eq!(rows.iter().filter(|r| r[0] == img as f64).count(), 3);
    }
    for r in &rows {
        assert!(r[2..].iter().all(|&t| t >= 0.0));
        // Fields are rounded to microseconds.
        assert!((r[2] + r[3] + r[4] + r[5] - r[6]).abs() <= 3e-6, "{r:?}");
    }
}

#[test]
fn sweep_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), &[]).join("manifest.jsonl");
    let run = |name: &str| {
        let p = dir.path().join(name);
        ok(&["sweep", "--manifest", s(&m), "--budgets", "50,200", "--trials", "2", "--seed", "3", "--out", s(&p)]);
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.split(',').take(4).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
    };
    let a = run("a.csv");
    assert_eq!(a.len(), 5);
    assert_eq!(a[0], "budget,trial,recall,accuracy");
    assert_eq!(a, run("b.csv"));
    let single = dir.path().join("one.csv");
    ok(&["sweep", "--manifest", s(&m), "--budgets", "100", "--trials", "1", "--out", s(&single)]);
    assert_eq!(std::fs::read_to_string(single).unwrap().lines().count(), 2);
    assert_eq!(code(&kdrp(&["sweep", "--manifest", s(&m), "--budgets", "200,100"])), 1);
}
