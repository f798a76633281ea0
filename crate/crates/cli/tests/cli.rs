use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use microhd::data::{blobs, BlobSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_microhd"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("MICROHD_DATA_DIR").output().expect("spawn microhd")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("{key} missing from:\n{text}"))
}

/// Writes a small separable CSV with a header and a trailing label column.
fn blobs_csv(dir: &Path) -> PathBuf {
    let ds = blobs(&BlobSpec { classes: 3, features: 6, per_class: 50, spread: 10.0, noise: 0.5, seed: 5 }).unwrap();
    let mut text = (0..ds.n_features()).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
    text.push_str(",label\n");
    for i in 0..ds.len() {
        let row: Vec<String> = ds.sample(i).iter().map(|v| format!("{v:.5}")).collect();
        text.push_str(&format!("{},{}\n", row.join(","), ds.classes()[ds.label(i)]));
    }
    let path = dir.join("blobs.csv");
    fs::write(&path, text).unwrap();
    path
}

const SMALL: &[&str] = &["--header", "--d", "512", "--l", "16", "--q", "8", "--epochs", "5"];

fn train(data: &Path, out: &Path) -> Output {
    let mut args = vec!["train", "--dataset", data.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    run(&args)
}

fn optimize(data: &Path, out: &Path) -> Output {
    let mut args =
        vec!["optimize", "--dataset", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threshold", "1"];
    args.extend_from_slice(SMALL);
    run(&args)
}

#[test]
fn train_reports_accuracy_and_resources() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs_csv(dir.path());
    let out = dir.path().join("out");
    let o = train(&data, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let acc: f64 = value(&text, "test_accuracy").parse().unwrap();
    assert!(acc > 0.9, "{acc}");
    assert_eq!(value(&text, "memory_bits"), (512 * (6 + 16 + 3 * 8)).to_string());
    assert!(out.join("model.mhd").exists());
    assert_eq!(fs::read_to_string(out.join("report.txt")).unwrap(), text);
}

#[test]
fn missing_dataset_is_a_usage_error() {
    let o = run(&["train", "--dataset", "/definitely/not/here.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["train"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs_csv(dir.path());
    let d = data.to_str().unwrap();
    assert_eq!(run(&["train", "--dataset", d, "--header", "--q", "0"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--dataset", d, "--header", "--encoder", "projection", "--l", "4"]).status.code(), Some(2));
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "dimensions = 5\n").unwrap();
    assert_eq!(run(&["train", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn corrupt_model_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs_csv(dir.path());
    let out = dir.path().join("out");
    assert!(train(&data, &out).status.success());
    let model = out.join("model.mhd");
    let mut bytes = fs::read(&model).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x40;
    fs::write(&model, bytes).unwrap();
    let o = run(&["evaluate", "--model", model.to_str().unwrap(), "--dataset", data.to_str().unwrap(), "--header"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn evaluate_reproduces_training_test_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs_csv(dir.path());
    let out = dir.path().join("out");
    let trained = stdout(&train(&data, &out));
    let o = run(&[
        "evaluate",
        "--model",
        out.join("model.mhd").to_str().unwrap(),
        "--dataset",
        data.to_str().unwrap(),
        "--header",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value(&stdout(&o), "test_accuracy"), value(&trained, "test_accuracy"));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs_csv(dir.path());
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "dataset = {:?}\nheader = true\nencoder = \"projection\"\nd = 256\nq = 4\nepochs = 3\nout = {:?}\n",
            data.to_str().unwrap(),
            dir.path().join("cfg-out").to_str().unwrap()
        ),
    )
    .unwrap();
    let o = run(&["train", "--config", cfg.to_str().unwrap(), "--d", "128"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(value(&text, "encoder"), "projection");
    assert_eq!(value(&text, "d"), "128");
    assert_eq!(value(&text, "q"), "4");
    assert_eq!(value(&text, "normalization"), "zscore");
}

#[test]
fn optimize_keeps_accuracy_and_writes_a_bounded_trace() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs_csv(dir.path());
    let out = dir.path().join("out");
    let o = optimize(&data, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let floor: f64 = value(&text, "accuracy_floor").parse().unwrap();
    let fin: f64 = value(&text, "final_eval_accuracy").parse().unwrap();
    assert!(fin + 1e-6 >= floor);
    let base_bits: u64 = value(&text, "baseline_memory_bits").parse().unwrap();
    let final_bits: u64 = value(&text, "final_memory_bits").parse().unwrap();
    assert!(final_bits <= base_bits);

    let trace = fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let probes: usize = value(&text, "probes").parse().unwrap();
    assert_eq!(trace.lines().count(), probes + 1);
    // id-level space fitted to d=512, l=16, q=8
    let bound = [512usize, 16, 8].iter().map(|&v| (v as f64).log2().ceil() as usize + 1).sum::<usize>();
    assert!(probes <= bound, "{probes} > {bound}");
    for f in ["model.mhd", "baseline.mhd", "summary.csv", "report.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn report_matches_optimize_factors() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs_csv(dir.path());
    let out = dir.path().join("out");
    let opt = stdout(&optimize(&data, &out));
    let rep_dir = dir.path().join("rep");
    let o = run(&[
        "report",
        "--trace",
        out.join("trace.jsonl").to_str().unwrap(),
        "--out",
        rep_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(value(&text, "compression_factor"), value(&opt, "compression_factor"));
    assert_eq!(value(&text, "workload_reduction_factor"), value(&opt, "workload_reduction_factor"));
    assert!(fs::read_to_string(rep_dir.join("report.csv")).unwrap().starts_with("iteration,"));
}

#[test]
fn outputs_are_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs_csv(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(optimize(&data, &a).status.success());
    let mut args =
        vec!["optimize", "--dataset", data.to_str().unwrap(), "--out", b.to_str().unwrap(), "--threshold", "1"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(&["--threads", "1"]);
    assert!(run(&args).status.success());
    for f in ["trace.jsonl", "summary.csv", "model.mhd", "baseline.mhd"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let strip = |p: PathBuf| {
        fs::read_to_string(p).unwrap().lines().filter(|l| !l.starts_with("model=") && !l.starts_with("trace=")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(strip(a.join("report.txt")), strip(b.join("report.txt")));
}
