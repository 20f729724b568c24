use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groundstate"))
        .args(args)
        .current_dir(dir)
        .env("GSL_WORKERS", "1")
        .output()
        .unwrap()
}

#[test]
fn generate_train_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(d, &["gen-data", "--rows", "1", "--cols", "3", "-n", "40", "--out", "d.jsonl"])
        .status
        .success());
    assert!(d.join("d.manifest.json").exists());
    let out = run(
        d,
        &[
            "train",
            "--data",
            "d.jsonl",
            "--model",
            "ridge",
            "--reg",
            "1e-3",
            "--records",
            "0..30",
            "--out",
            "m.json",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(
        d,
        &[
            "eval",
            "--model",
            "m.json",
            "--data",
            "d.jsonl",
            "--records",
            "30..40",
            "--train-records",
            "0..30",
        ],
    );
    assert!(out.status.success());
    let ev: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(ev["n_records"], 10);
    assert!(ev["aggregate"].as_f64().unwrap() >= 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(d, &["gen-data", "--rows", "1", "--cols", "2", "-n", "4", "--out", "d.jsonl"])
        .status
        .success());
    run(
        d,
        &["train", "--data", "d.jsonl", "--model", "mean", "--records", "0..3", "--out", "m.json"],
    );
    let overlap = run(
        d,
        &[
            "eval",
            "--model",
            "m.json",
            "--data",
            "d.jsonl",
            "--records",
            "2..4",
            "--train-records",
            "0..3",
        ],
    );
    assert_eq!(overlap.status.code(), Some(2));
    let big = run(d, &["gen-data", "--rows", "5", "--cols", "4", "-n", "1", "--out", "big.jsonl"]);
    assert_eq!(big.status.code(), Some(3));
    std::fs::write(d.join("bad.json"), "{").unwrap();
    let bad = run(d, &["scaling", "--config", "bad.json", "--out", "sweep"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn discrepancy_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["qmc-diag", "--dim", "2", "--n", "16,64"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("dim,n,sobol_lower"));
    let fields: Vec<f64> = lines[2].split(',').map(|f| f.parse().unwrap()).collect();
    // exact in two dimensions, and inside the Sobol bound
    assert_eq!(fields[2], fields[3]);
    assert!(fields[3] <= fields[4]);
}
