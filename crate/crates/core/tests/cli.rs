use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use specthresh::dft::Periodograms;
use specthresh::{io, linalg};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_specthresh"));
    c.env_remove("SPECTHRESH_JOBS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn vma_model(dir: &TempDir, p: usize) -> PathBuf {
    write(
        dir,
        "model.json",
        &format!(r#"{{"schema_version": "1", "preset": "block_vma", "p": {p}}}"#),
    )
}

fn simulated(dir: &TempDir, p: usize, n: usize, seed: u64) -> (PathBuf, PathBuf) {
    let model = vma_model(dir, p);
    let series = dir.path().join(format!("x{seed}.csv"));
    ok(&[
        "simulate", "--model", s(&model), "-n", &n.to_string(), "--seed", &seed.to_string(), "--out", s(&series),
    ]);
    (model, series)
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let model = vma_model(&dir, 3);
    let a = ok(&["simulate", "--model", s(&model), "-n", "50", "--seed", "9"]).stdout;
    let b = ok(&["simulate", "--model", s(&model), "-n", "50", "--seed", "9"]).stdout;
    let c = ok(&["simulate", "--model", s(&model), "-n", "50", "--seed", "10"]).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
    let x = io::read_series_from(a.as_slice(), "stdout").unwrap();
    assert_eq!((x.n(), x.p()), (50, 3));
}

#[test]
fn unstable_model_is_rejected() {
    let dir = TempDir::new().unwrap();
    let model = write(
        &dir,
        "bad.json",
        r#"{"schema_version": "1", "p": 1, "ar": [[[1.2]]]}"#,
    );
    let out = run(&["simulate", "--model", s(&model), "-n", "10"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unstable: spectral radius ≥ 1"));
}

#[test]
fn smoothed_with_zero_span_is_the_scaled_periodogram() {
    let dir = TempDir::new().unwrap();
    let (_, series) = simulated(&dir, 3, 40, 1);
    let out = ok(&["estimate", "--series", s(&series), "--method", "smoothed", "-m", "0"]).stdout;
    let est = io::estimate_from_str(std::str::from_utf8(&out).unwrap()).unwrap();
    let x = io::read_series(&series).unwrap();
    let pg = Periodograms::new(&x).unwrap();
    let two_pi = 2.0 * std::f64::consts::PI;
    for j in est.indices() {
        let want = pg.periodogram(j).map(|z| z / two_pi);
        let got = est.get(j).unwrap().entries();
        assert!(linalg::max_abs_diff(got, &want) <= 1e-12 * linalg::max_modulus(&want).max(1.0));
    }
}

#[test]
fn lasso_at_zero_lambda_equals_smoothed() {
    let dir = TempDir::new().unwrap();
    let (_, series) = simulated(&dir, 3, 40, 2);
    let smooth = ok(&["estimate", "--series", s(&series), "--method", "smoothed", "-m", "3"]).stdout;
    let lasso = ok(&["estimate", "--series", s(&series), "--method", "lasso", "-m", "3", "--lambda", "0"]).stdout;
    let a = io::estimate_from_str(std::str::from_utf8(&smooth).unwrap()).unwrap();
    let b = io::estimate_from_str(std::str::from_utf8(&lasso).unwrap()).unwrap();
    for j in a.indices() {
        assert_eq!(a.get(j).unwrap().entries(), b.get(j).unwrap().entries());
    }
}

#[test]
fn adaptive_lasso_is_sparser_than_smoothed() {
    let dir = TempDir::new().unwrap();
    let (_, series) = simulated(&dir, 12, 200, 3);
    let smooth = ok(&["estimate", "--series", s(&series), "--method", "smoothed"]).stdout;
    let report = dir.path().join("risks.json");
    let alasso = ok(&[
        "estimate", "--series", s(&series), "--method", "alasso", "--tuning-report", s(&report),
    ])
    .stdout;
    let a = io::estimate_from_str(std::str::from_utf8(&smooth).unwrap()).unwrap();
    let b = io::estimate_from_str(std::str::from_utf8(&alasso).unwrap()).unwrap();
    assert!(b.off_diagonal_zeros() > a.off_diagonal_zeros());
    let risks: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(risks.as_array().unwrap().len(), 101);
}

#[test]
fn estimate_is_reproducible_for_a_seed() {
    let dir = TempDir::new().unwrap();
    let (_, series) = simulated(&dir, 6, 60, 4);
    let a = ok(&["estimate", "--series", s(&series), "--method", "hard", "--seed", "5"]).stdout;
    let b = bin()
        .args(["estimate", "--series", s(&series), "--method", "hard", "--seed", "5"])
        .env("SPECTHRESH_JOBS", "1")
        .output()
        .unwrap()
        .stdout;
    assert_eq!(a, b);
}

#[test]
fn evaluate_scores_each_estimate() {
    let dir = TempDir::new().unwrap();
    let (model, series) = simulated(&dir, 6, 60, 6);
    let e1 = dir.path().join("e1.json");
    let e2 = dir.path().join("e2.json");
    ok(&["estimate", "--series", s(&series), "--method", "smoothed", "--out", s(&e1)]);
    ok(&["estimate", "--series", s(&series), "--method", "lasso", "--out", s(&e2)]);
    let out = ok(&["evaluate", "--estimate", s(&e1), s(&e2), "--model", s(&model)]).stdout;
    let text = String::from_utf8(out).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let rmise: Vec<&csv::StringRecord> = rows.iter().filter(|r| &r[4] == "rmise").collect();
    assert_eq!(rmise.len(), 2);
    assert_eq!(&rmise[0][0], "smoothed");
    assert_eq!(&rmise[1][0], "lasso");
    assert!(rmise.iter().all(|r| r[6].is_empty()));
}

#[test]
fn evaluate_of_the_truth_has_zero_error() {
    use specthresh::estimator::{FrequencyEstimate, Method};
    use specthresh::metrics;
    let dir = TempDir::new().unwrap();
    let model_path = vma_model(&dir, 3);
    let model = io::read_model(&model_path).unwrap();
    let n = 30;
    let per_frequency = metrics::truth_spectra(&model, n)
        .unwrap()
        .into_iter()
        .map(|(j, matrix)| (j, FrequencyEstimate { matrix, lambda: None }))
        .collect();
    let est = specthresh::SpectralEstimate { n, p: 3, m: 0, method: Method::Smoothed, per_frequency };
    let path = dir.path().join("truth.json");
    io::write_estimate(&est, &path).unwrap();
    let out = ok(&["evaluate", "--estimate", s(&path), "--model", s(&model_path)]).stdout;
    let text = String::from_utf8(out).unwrap();
    let row = text.lines().find(|l| l.contains(",rmise,")).unwrap();
    let mean: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
    assert_eq!(mean, 0.0);
}

#[test]
fn evaluate_with_missing_model_fails() {
    let dir = TempDir::new().unwrap();
    let (_, series) = simulated(&dir, 3, 30, 7);
    let est = dir.path().join("e.json");
    ok(&["estimate", "--series", s(&series), "--out", s(&est)]);
    let out = run(&["evaluate", "--estimate", s(&est), "--model", "/nonexistent/model.json"]);
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bench_is_deterministic_and_single_replicate_has_no_sd() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        &dir,
        "spec.json",
        r#"{"family": "vma", "p": [6], "n": [40], "methods": ["smoothed", "lasso"], "replicates": 1, "seed": 3}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["bench", "--spec", s(&spec), "--out", s(&a)]);
    ok(&["bench", "--spec", s(&spec), "--out", s(&b), "--jobs", "1"]);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "rmise.csv"));
    assert!(names.iter().any(|n| n == "roc_lasso_p6_n40.csv"));
    for name in &names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name:?}");
    }
    let rmise = fs::read_to_string(a.join("rmise.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(rmise.as_bytes());
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[6].is_empty()));
}

#[test]
fn coherence_graph_is_symmetric_with_named_header() {
    let dir = TempDir::new().unwrap();
    let (_, series) = simulated(&dir, 3, 60, 8);
    let est = dir.path().join("e.json");
    ok(&["estimate", "--series", s(&series), "--method", "smoothed", "--out", s(&est)]);
    let out = ok(&["coherence", "--estimate", s(&est), "--names", "a,b,c"]).stdout;
    let text = String::from_utf8(out).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["a", "b", "c"]);
    let rows: Vec<Vec<String>> = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    assert_eq!(rows.len(), 3);
    let val = |r: usize, c: usize| -> f64 { rows[r][c].parse().unwrap() };
    for r in 0..3 {
        assert_eq!(val(r, r), 0.0);
        for c in 0..3 {
            assert_eq!(val(r, c), val(c, r));
            assert!((0.0..=1.0).contains(&val(r, c)));
        }
    }
    let thresholded = ok(&["coherence", "--estimate", s(&est), "--lambda", "1e6"]).stdout;
    let text = String::from_utf8(thresholded).unwrap();
    for line in text.lines().skip(1) {
        assert!(line.split(',').all(|v| v.parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn exit_codes_distinguish_usage_and_data_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["estimate"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    let (_, series) = simulated(&dir, 3, 30, 9);
    assert_eq!(
        run(&["estimate", "--series", s(&series), "--method", "ridge"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["estimate", "--series", s(&series), "-m", "20"]).status.code(), Some(2));
    let broken = write(&dir, "broken.csv", "x1,x2\n1.0,2.0\n3.0,oops\n");
    let out = run(&["estimate", "--series", s(&broken)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oops") || String::from_utf8_lossy(&out.stderr).contains("3"));
    let future = write(&dir, "future.json", r#"{"schema_version": "99"}"#);
    assert_eq!(run(&["coherence", "--estimate", s(&future)]).status.code(), Some(3));
}
