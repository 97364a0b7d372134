use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn piqflow(args: &[&str]) -> Output {
    piqflow_env(args, None)
}

fn piqflow_env(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_piqflow"));
    cmd.args(args).env_remove("PIQFLOW_CONFIG").env("RUST_LOG", "error");
    if let Some(c) = config {
        cmd.env("PIQFLOW_CONFIG", c);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json_error(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("error JSON on stdout")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulated_study(dir: &Path) -> PathBuf {
    let study = dir.join("study");
    ok(&piqflow(&[
        "simulate",
        "--faithful",
        "24",
        "--constant",
        "2",
        "--items",
        "60",
        "--per-session",
        "40",
        "--seed",
        "11",
        "--out",
        p(&study),
    ]));
    study
}

/// Synthetic corpus, split and a quickly trained model.
fn trained_model(dir: &Path) -> (PathBuf, PathBuf) {
    let corpus = dir.join("corpus");
    ok(&piqflow(&[
        "synth", "--bases", "8", "--per-base", "6", "--size", "64", "--seed", "4", "--out", p(&corpus),
    ]));
    let split = dir.join("split.json");
    ok(&piqflow(&["split", p(&corpus.join("items.csv")), "--seed", "1", "--out", p(&split)]));
    let model = dir.join("model.json");
    ok(&piqflow(&[
        "train",
        "--items",
        p(&corpus.join("items.csv")),
        "--stats",
        p(&corpus.join("item_stats.csv")),
        "--split",
        p(&split),
        "--epochs",
        "3",
        "--seed",
        "2",
        "--out",
        p(&model),
    ]));
    (corpus, model)
}

#[test]
fn analyze_is_byte_identical_across_runs_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let study = simulated_study(dir.path());
    let ratings = study.join("ratings.csv");
    let run = |jobs: &str, out: &str| {
        let out_path = dir.path().join(out);
        let stdout = ok(&piqflow(&[
            "analyze",
            p(&ratings),
            "--sessions",
            p(&study.join("sessions.csv")),
            "--golden",
            p(&study.join("golden.csv")),
            "--splits",
            "12",
            "--seed",
            "7",
            "--jobs",
            jobs,
            "--out",
            p(&out_path),
        ]));
        (std::fs::read(out_path).unwrap(), stdout)
    };
    let (a, _) = run("1", "a.json");
    let (b, _) = run("1", "b.json");
    let (c, _) = run("4", "c.json");
    assert_eq!(a, b);
    assert_eq!(a, c);

    let report: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["seed"], 7);
    let srcc = report["inter_subject"]["all"]["result"]["mean_split_half_srcc"].as_f64().unwrap();
    assert!(srcc > 0.8, "{srcc}");
    assert!(report["intra_subject"]["result"]["median_lcc"].as_f64().unwrap() > 0.5);
    assert!(!report["strata"].as_array().unwrap().is_empty());

    let other = ok(&piqflow(&["analyze", p(&ratings), "--splits", "12", "--seed", "8", "--json"]));
    let v: Value = serde_json::from_str(&other).unwrap();
    assert_ne!(v["inter_subject"]["all"], report["inter_subject"]["all"]);
}

#[test]
fn seed_is_mandatory() {
    let dir = tempfile::tempdir().unwrap();
    let study = simulated_study(dir.path());
    let out = piqflow(&["analyze", p(&study.join("ratings.csv")), "--json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = json_error(&out);
    assert_eq!(err["error"]["kind"], "validation");
    assert!(err["error"]["message"].as_str().unwrap().contains("--seed"));

    let out = piqflow(&["simulate", "--out", p(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_and_json_errors() {
    let dir = tempfile::tempdir().unwrap();

    let out = piqflow(&["predict", "/no/such/photo.png", "--model", "/no/model.json", "--json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(json_error(&out)["error"]["message"].as_str().unwrap().contains("/no/such/photo.png"));

    let out = piqflow(&["analyze", "r.csv", "--bogus", "--json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_error(&out)["error"]["kind"], "validation");

    let out = piqflow(&["feedback"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());

    let bad = dir.path().join("ratings.csv");
    std::fs::write(&bad, "subject_id,item_id,quality\ns1,i1,50\n").unwrap();
    let out = piqflow(&["screen", p(&bad), "--json"]);
    assert_eq!(out.status.code(), Some(2));

    let (corpus, model) = trained_model(dir.path());
    let empty_test = dir.path().join("no_test.json");
    ok(&piqflow(&[
        "split",
        p(&corpus.join("items.csv")),
        "--proportions",
        "0.5,0.5,0",
        "--seed",
        "3",
        "--out",
        p(&empty_test),
    ]));
    let out = piqflow(&[
        "eval",
        "--items",
        p(&corpus.join("items.csv")),
        "--stats",
        p(&corpus.join("item_stats.csv")),
        "--split",
        p(&empty_test),
        "--model",
        p(&model),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json_error(&out)["error"]["kind"], "computation");

    let image = corpus.join("images/b000_v00.png");
    let out = piqflow(&["predict", p(&image), "--model", p(&model), "--region", "0,0,500,10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("validation error"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let study = simulated_study(dir.path());
    let cfg = dir.path().join("piqflow.toml");
    std::fs::write(&cfg, "seed = 5\n[analyze]\nsplits = 4\n").unwrap();
    let ratings = study.join("ratings.csv");

    let v: Value = serde_json::from_str(&ok(&piqflow_env(&["analyze", p(&ratings), "--json"], Some(&cfg)))).unwrap();
    assert_eq!(v["seed"], 5);
    assert_eq!(v["splits"], 4);

    let v: Value = serde_json::from_str(&ok(&piqflow_env(
        &["analyze", p(&ratings), "--splits", "6", "--seed", "9", "--json"],
        Some(&cfg),
    )))
    .unwrap();
    assert_eq!(v["seed"], 9);
    assert_eq!(v["splits"], 6);

    std::fs::write(&cfg, "sed = 5\n").unwrap();
    let out = piqflow_env(&["analyze", p(&ratings), "--json"], Some(&cfg));
    assert_eq!(out.status.code(), Some(2));
    assert!(json_error(&out)["error"]["message"].as_str().unwrap().contains("piqflow.toml"));
}

#[test]
fn screen_clean_and_ingest_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let study = simulated_study(dir.path());
    let verdicts = dir.path().join("verdicts.csv");
    let v: Value = serde_json::from_str(&ok(&piqflow(&[
        "screen",
        p(&study.join("ratings.csv")),
        "--golden",
        p(&study.join("golden.csv")),
        "--out",
        p(&verdicts),
        "--json",
    ])))
    .unwrap();
    assert_eq!(v["subjects"], 26);
    let rejected: Vec<&str> = v["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|x| x["accepted"] == false)
        .map(|x| x["subject_id"].as_str().unwrap())
        .collect();
    assert!(rejected.contains(&"constant000") && rejected.contains(&"constant001"), "{rejected:?}");

    let stats = dir.path().join("stats.csv");
    let v: Value = serde_json::from_str(&ok(&piqflow(&[
        "clean",
        p(&study.join("ratings.csv")),
        "--verdicts",
        p(&verdicts),
        "--out",
        p(&stats),
        "--json",
    ])))
    .unwrap();
    assert_eq!(v["subjects"], v_accepted(&verdicts));
    let header = std::fs::read_to_string(&stats).unwrap();
    assert!(header.starts_with("item_id,mos,stddev,count,p_blurry"));

    let store = dir.path().join("store");
    let v: Value = serde_json::from_str(&ok(&piqflow(&[
        "ingest",
        p(&study.join("ratings.csv")),
        "--sessions",
        p(&study.join("sessions.csv")),
        "--golden",
        p(&study.join("golden.csv")),
        "--out",
        p(&store),
        "--json",
    ])))
    .unwrap();
    assert_eq!(v["subjects"], 26);
    assert_eq!(
        std::fs::read(store.join("ratings.csv")).unwrap(),
        std::fs::read(study.join("ratings.csv")).unwrap()
    );
}

fn v_accepted(verdicts: &Path) -> usize {
    std::fs::read_to_string(verdicts)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(1) == Some("1"))
        .count()
}

#[test]
fn feedback_map_and_frames() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, model) = trained_model(dir.path());
    let image = corpus.join("images/b001_v00.png");

    let v: Value =
        serde_json::from_str(&ok(&piqflow(&["feedback", p(&image), "--model", p(&model), "--json"]))).unwrap();
    assert!(v["bucket"].is_string());
    let ranked = v["ranked"].as_array().unwrap();
    assert!(!ranked.is_empty() && ranked.len() <= 3);
    for r in ranked {
        assert!(r["category"].is_string() && r["severity"].is_string() && r["message"].is_string());
    }
    assert_eq!(v["localized"].as_array().unwrap().len(), 0);
    let again = ok(&piqflow(&["feedback", p(&image), "--model", p(&model), "--json"]));
    assert_eq!(serde_json::from_str::<Value>(&again).unwrap(), v);

    let localized: Value = serde_json::from_str(&ok(&piqflow(&[
        "feedback",
        p(&image),
        "--model",
        p(&model),
        "--localized",
        "--json",
    ])))
    .unwrap();
    assert_eq!(localized["ranked"], v["ranked"]);

    let png = dir.path().join("out/map.png");
    ok(&piqflow(&["map", p(&image), "--model", p(&model), "--tile", "32", "--out", p(&png)]));
    let overlay = image_dims(&png);
    assert_eq!(overlay, (64, 64));
    let grid: Value = serde_json::from_str(&std::fs::read_to_string(png.with_extension("json")).unwrap()).unwrap();
    assert_eq!(grid["kind"], "quality");
    assert_eq!(grid["N"], 32);
    assert_eq!(grid["grid"].as_array().unwrap().len(), 2);

    let out = piqflow(&["map", p(&image), "--model", p(&model), "--tile", "8"]);
    assert_eq!(out.status.code(), Some(2));

    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    for name in ["a.png", "b.png"] {
        std::fs::copy(&image, frames.join(name)).unwrap();
    }
    let v: Value =
        serde_json::from_str(&ok(&piqflow(&["select-frame", p(&frames), "--model", p(&model), "--json"]))).unwrap();
    assert_eq!(v["index"], 0);
    assert!(v["file"].as_str().unwrap().ends_with("a.png"));
}

fn image_dims(path: &Path) -> (u32, u32) {
    let bytes = std::fs::read(path).unwrap();
    assert_eq!(&bytes[1..4], b"PNG");
    let w = u32::from_be_bytes(bytes[16..20].try_into().unwrap());
    let h = u32::from_be_bytes(bytes[20..24].try_into().unwrap());
    (w, h)
}

#[test]
fn crop_requires_seed_only_for_random() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = trained_model(dir.path());
    let items = corpus.join("items.csv");
    let out = piqflow(&["crop", p(&items), "--mode", "random", "--out", p(&dir.path().join("r.csv"))]);
    assert_eq!(out.status.code(), Some(2));

    let patch_dir = dir.path().join("patches");
    let manifest = dir.path().join("with_patches.csv");
    let v: Value = serde_json::from_str(&ok(&piqflow(&[
        "crop",
        p(&items),
        "--mode",
        "random",
        "--seed",
        "3",
        "--patch-dir",
        p(&patch_dir),
        "--out",
        p(&manifest),
        "--json",
    ])))
    .unwrap();
    assert_eq!(v["patches"], 48);
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert_eq!(text.lines().count(), 1 + 96);
    assert!(text.contains("b000_v00_random,random-patch,b000_v00,26,26,"));
    assert!(patch_dir.join("b000_v00_random.png").exists());
}
