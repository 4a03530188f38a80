use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use orkm::io::{load_manifest, load_result};

fn orkm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orkm")).args(args).output().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(orkm(&["--help"]).status.code(), Some(0));
    assert_eq!(orkm(&["fit", "--help"]).status.code(), Some(0));
    assert_eq!(orkm(&[]).status.code(), Some(2));
    assert_eq!(orkm(&["fit", "--algo", "rkmc", "--k", "2"]).status.code(), Some(2));
    assert_eq!(
        orkm(&["fit", "--algo", "nope", "--data", "x", "--k", "2", "--out", "y"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        orkm(&["eval", "--pred", "a", "--truth", "b", "--metric", "nope"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(orkm(&["bench", "--suite", "nope", "--out", "x"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = orkm(&[
        "fit",
        "--algo",
        "rkmc",
        "--data",
        "/nonexistent.json",
        "--k",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn fit_separates_two_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let data = fixture("sep.manifest.json");
    // the online solvers' default prefix (rows 0 and 1) holds a single cluster
    for algo in ["rkmc", "kmeans", "pkmeans"] {
        let o = orkm(&[
            "fit",
            "--algo",
            algo,
            "--data",
            s(&data),
            "--k",
            "2",
            "--yita",
            "0",
            "--seed",
            "1",
            "--out",
            s(&out),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{algo}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(stdout(&o).starts_with(&format!("{algo}: n=4 k=2")), "{}", stdout(&o));
        let labels = load_result(&out).unwrap().labels().to_vec();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
    }
}

#[test]
fn fit_rejects_too_many_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = orkm(&[
        "fit",
        "--algo",
        "rkmc",
        "--data",
        s(&fixture("sep.manifest.json")),
        "--k",
        "9",
        "--out",
        s(&out),
    ]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn eval_prints_every_metric() {
    let o = orkm(&[
        "eval",
        "--pred",
        s(&fixture("pred.csv")),
        "--truth",
        s(&fixture("truth.csv")),
        "--metric",
        "fscore",
    ]);
    assert_eq!(stdout(&o), "fscore,0.4000000\n");
    let same = fixture("truth.csv");
    let o = orkm(&["eval", "--pred", s(&same), "--truth", s(&same)]);
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(
        lines,
        ["nmi", "purity", "precision", "recall", "fscore", "ri"].map(|m| format!("{m},1.0000000"))
    );
}

#[test]
fn eval_length_mismatch_fails() {
    let o = orkm(&[
        "eval",
        "--pred",
        s(&fixture("labels_short.csv")),
        "--truth",
        s(&fixture("truth.csv")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_reads_results_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let data = fixture("sep.manifest.json");
    orkm(&[
        "fit",
        "--algo",
        "kmeans",
        "--data",
        s(&data),
        "--k",
        "2",
        "--out",
        s(&out),
    ]);
    let o = orkm(&["eval", "--pred", s(&out), "--truth", s(&data), "--metric", "nmi"]);
    assert_eq!(stdout(&o), "nmi,1.0000000\n");
}

#[test]
fn simulate_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = orkm(&[
            "simulate",
            "--preset",
            "case2-multi",
            "--seed",
            "3",
            "--out-dir",
            s(d.path()),
        ]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(stdout(&o).trim(), s(&d.path().join("case2-multi.manifest.json")));
    }
    let data = load_manifest(a.path().join("case2-multi.manifest.json")).unwrap();
    assert_eq!((data.n_samples(), data.n_views()), (210, 2));
    for f in [
        "case2-multi_view1.csv",
        "case2-multi_view2.csv",
        "case2-multi_labels.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn simulate_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = orkm(&["simulate", "--preset", "nope", "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = orkm(&[
        "simulate",
        "--preset",
        "case1-single",
        "--n",
        "5",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = orkm(&[
        "simulate",
        "--n",
        "40",
        "--k",
        "2",
        "--noise-view",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let data = load_manifest(dir.path().join("sim.manifest.json")).unwrap();
    assert_eq!((data.n_samples(), data.n_views()), (40, 2));
}

fn simulated(dir: &Path) -> PathBuf {
    let o = orkm(&["simulate", "--preset", "case2-multi", "--out-dir", s(dir)]);
    PathBuf::from(stdout(&o).trim())
}

#[test]
fn stream_emits_progress_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path());
    let out = dir.path().join("r.json");
    let o = orkm(&[
        "stream",
        "--data",
        s(&data),
        "--k",
        "3",
        "--chushi",
        "30",
        "--emit-every",
        "100",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,objective,alpha_1,alpha_2");
    // init row, then t = 130, 210
    let ts: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ts, ["30", "130", "210"]);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("orkmc:"));
    assert_eq!(load_result(&out).unwrap().labels().len(), 210);

    let o = orkm(&[
        "stream",
        "--data",
        s(&data),
        "--k",
        "3",
        "--chushi",
        "210",
        "--out",
        s(&out),
    ]);
    assert_eq!(stdout(&o).lines().count(), 2);
    let o = orkm(&[
        "stream",
        "--data",
        s(&data),
        "--k",
        "3",
        "--emit-every",
        "0",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let o = orkm(&["bench", "--suite", "case1-single", "--seeds", "5", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), format!("36 rows written to {}", out.display()));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 37);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dmc: external"));
}

#[test]
fn bench_skips_missing_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.csv");
    let o = orkm(&["bench", "--suite", "qcm", "--data-dir", s(dir.path()), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("qcm,SKIPPED,"));
}

#[test]
fn bench_without_timing_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    orkm(&[
        "bench",
        "--suite",
        "case2-multi",
        "--seeds",
        "2",
        "--no-timing",
        "--out",
        s(&a),
    ]);
    orkm(&[
        "bench",
        "--suite",
        "case2-multi",
        "--seeds",
        "2",
        "--no-timing",
        "--serial",
        "--out",
        s(&b),
    ]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}
