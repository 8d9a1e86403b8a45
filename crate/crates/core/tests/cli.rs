use std::path::Path;
use std::process::{Command, Output};

use sagetour::pipeline::{read_jsonl, read_manifest, JSONL_FILE};
use sagetour::sage::radial_transform;

fn sagetour(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sagetour")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_sample(dir: &Path, n: usize, p: usize) -> String {
    let path = dir.join("ball.csv");
    let o = sagetour(&["sample", "--n", &n.to_string(), "--p", &p.to_string(), "--seed", "4", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    path.to_str().unwrap().to_string()
}

#[test]
fn tour_writes_frames_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_sample(dir.path(), 300, 5);
    let out = dir.path().join("out");
    let o = sagetour(&["tour", &data, "--gamma", "3", "--frames", "40", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = read_manifest(&out).unwrap();
    assert_eq!(manifest.frame_count, 40);
    assert_eq!((manifest.n, manifest.p), (300, 5));
    let records = read_jsonl(&out.join(JSONL_FILE)).unwrap();
    assert_eq!(records.len(), 40);
    assert!(records.iter().all(|r| r.params.gamma == 3.0));
    assert_eq!(records.iter().map(|r| r.frame_index).collect::<Vec<_>>(), (0..40).collect::<Vec<_>>());
}

#[test]
fn csv_and_svg_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_sample(dir.path(), 50, 3);
    let out = dir.path().join("csv");
    let o = sagetour(&["tour", &data, "--frames", "3", "--format", "csv-per-frame", "--svg", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = read_manifest(&out).unwrap();
    assert_eq!(manifest.files.len(), 3);
    let svgs = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg")).count();
    assert_eq!(svgs, 3);
}

#[test]
fn pca_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_sample(dir.path(), 400, 8);
    let out = dir.path().join("pca");
    let o = sagetour(&["tour", &data, "--pca", "5", "--gamma", "2", "--frames", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = read_manifest(&out).unwrap();
    assert_eq!(manifest.p, 5);
    assert_eq!(manifest.column_names[0], "PC1");

    let o = sagetour(&["tour", &data, "--pca", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_file_names_the_path() {
    let o = sagetour(&["tour", "/nonexistent/dir/data.csv", "--frames", "2"]);
    assert_eq!(o.status.code(), Some(4));
    let err = stderr(&o);
    assert!(err.contains("/nonexistent/dir/data.csv"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
    assert!(err.starts_with("error[io]:"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(sagetour(&["tour"]).status.code(), Some(2));
    assert_eq!(sagetour(&["frobnicate"]).status.code(), Some(2));
    let o = sagetour(&["diagnose", "--synthetic-ball", "--n", "100", "--gamma=-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma"));
    let o = sagetour(&["diagnose", "--synthetic-ball", "--n", "100", "--step-angle", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn data_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "a,b\nx,y\n").unwrap();
    let o = sagetour(&["tour", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn diagnose_synthetic_ball_passes() {
    let o = sagetour(&["diagnose", "--synthetic-ball", "--p", "10", "--n", "100000", "--frames", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().filter(|l| l.starts_with("frame ")).all(|l| l.ends_with("PASS")), "{out}");
    assert!(out.contains("overall: PASS"), "{out}");
}

#[test]
fn diagnose_plane_notes_identity() {
    let o = sagetour(&["diagnose", "--synthetic-ball", "--p", "2", "--n", "50000", "--frames", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("identity"), "{out}");
    assert!(out.contains("overall: PASS"), "{out}");
}

#[test]
fn diagnose_writes_hexbin() {
    let dir = tempfile::tempdir().unwrap();
    let hex = dir.path().join("hex.csv");
    let o = sagetour(&["diagnose", "--synthetic-ball", "--p", "4", "--n", "2000", "--frames", "1", "--hexbin-out", hex.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&hex).unwrap();
    assert_eq!(text.lines().next(), Some("q,r,count"));
    let total: u64 = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 2000);
}

#[test]
fn curves_transform_matches_formula() {
    let o = sagetour(&["curves", "--kind", "transform", "--p", "10", "--grid", "11"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("r,value"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 11);
    for (r, v) in rows {
        assert!((v - radial_transform(r, 10.0, 1.0).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn curves_with_monte_carlo_and_circles() {
    let o = sagetour(&["curves", "--kind", "projected", "--p", "3", "--grid", "5", "--monte-carlo", "20000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("r,value,empirical"));
    let o = sagetour(&["curves", "--p", "2", "--circles", "4"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for line in out.lines().skip(1) {
        let (r, t) = line.split_once(',').unwrap();
        let (r, t): (f64, f64) = (r.parse().unwrap(), t.parse().unwrap());
        assert!((r - t).abs() < 1e-12);
    }
    let o = sagetour(&["curves", "--kind", "banana", "--p", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sample_is_deterministic() {
    let a = sagetour(&["sample", "--n", "20", "--p", "3", "--seed", "9"]);
    let b = sagetour(&["sample", "--n", "20", "--p", "3", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 21);
    assert_eq!(text.lines().next(), Some("x1,x2,x3"));
}
