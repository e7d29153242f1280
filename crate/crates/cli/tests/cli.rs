use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn percscan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_percscan")).args(args).output().expect("binary runs")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data")
}

#[test]
fn detect_matches_golden_outputs() {
    let out = tempfile::tempdir().unwrap();
    let scene = golden_dir().join("golden_scene.json");
    let o = percscan(&[
        "detect",
        scene.to_str().unwrap(),
        "--phi0",
        "9",
        "--phi1",
        "9",
        "--min-cluster",
        "20",
        "--seed",
        "42",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["report.json", "thresholded.pgm", "filtered.pgm"] {
        let got = std::fs::read(out.path().join(name)).unwrap();
        let want = std::fs::read(golden_dir().join("golden").join(name)).unwrap();
        assert!(got == want, "{name} differs from golden");
    }
}

#[test]
fn missing_input_is_io_error_without_outputs() {
    let out = tempfile::tempdir().unwrap();
    let dest = out.path().join("results");
    let o = percscan(&["detect", "/no/such/file.pgm", "--out", dest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!dest.exists());
}

#[test]
fn error_classes_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.path().join(name);
        std::fs::write(&p, bytes).unwrap();
        p.to_str().unwrap().to_string()
    };
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let garbage = write("bad.pgm", b"P9\n1 1\n255\n\0");
    assert_eq!(percscan(&["detect", &garbage, "--out", out]).status.code(), Some(4));

    let flat = write("flat.pgm", b"P2\n4 4\n255\n9 9 9 9 9 9 9 9 9 9 9 9 9 9 9 9\n");
    let args = ["detect", &flat, "--phi0", "2", "--phi1", "2", "--out", out];
    assert_eq!(percscan(&args).status.code(), Some(6));

    let args = ["detect", &flat, "--phi0", "5", "--out", out];
    assert_eq!(percscan(&args).status.code(), Some(5));

    assert_eq!(percscan(&["detect", &flat, "--lattice", "hex"]).status.code(), Some(2));
    assert!(!Path::new(out).exists());
}

#[test]
fn theta_override_marks_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("img.pgm");
    std::fs::write(&input, b"P2\n4 4\n255\n0 0 0 0 0 255 255 0 0 255 255 0 0 0 0 0\n").unwrap();
    let o = percscan(&[
        "detect",
        input.to_str().unwrap(),
        "--theta",
        "0.5",
        "--min-cluster",
        "4",
        "--no-pixels",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(report.contains("\"a_hat\": \"overridden\""));
    assert!(report.contains("\"particles_found\": 1"));
    assert!(!report.contains("\"pixels\""));
}

#[test]
fn bench_percolation_smoke() {
    let o = percscan(&["bench", "--experiment", "percolation", "--n", "64", "--seeds", "1"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("experiment,n,seed,metric,value"));
    assert!(lines.count() >= 1);
}

#[test]
fn bench_deterministic_header_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = percscan(&[
            "bench",
            "--experiment",
            "naive-vs-scan",
            "--n",
            "32,64",
            "--seeds",
            "3",
            "--jobs",
            "2",
            "--deterministic-header",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(path).unwrap()
    };
    let first = run("a.csv");
    assert_eq!(first, run("b.csv"));
    assert!(first.starts_with(b"experiment,n,seed,metric,value\n"));
}

#[test]
fn bench_unknown_experiment_is_usage_error() {
    let o = percscan(&["bench", "--experiment", "telepathy"]);
    assert_eq!(o.status.code(), Some(2));
}
