use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gbn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gbn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Six terms in two blocks, forty short documents.
fn write_corpus(dir: &Path) -> PathBuf {
    let docs = 40;
    let mut entries = Vec::new();
    for j in 1..=docs {
        let base = if j % 2 == 0 { 1 } else { 4 };
        for v in base..base + 3 {
            entries.push(format!("{j} {v} {}", 1 + (j + v) % 4));
        }
    }
    let path = dir.join("docs.uci");
    fs::write(&path, format!("{docs}\n6\n{}\n{}\n", entries.len(), entries.join("\n"))).unwrap();
    path
}

fn train(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let data = write_corpus(dir);
    let out = dir.join(out);
    let mut args = vec![
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--k1max",
        "6",
        "--seed",
        "3",
        "-s",
        "b=20",
        "-s",
        "c=10",
    ];
    args.extend_from_slice(extra);
    gbn(&args)
}

#[test]
fn single_depth_writes_one_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(dir.path(), "run", &["--tmax", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let models: Vec<_> = fs::read_dir(dir.path().join("run"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("model_T"))
        .collect();
    assert_eq!(models.len(), 1);
    let text = fs::read_to_string(dir.path().join("run/model_T1.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["widths"].as_array().unwrap().len(), 1);
    assert_eq!(json["config"]["seed"], "3");
    assert!(dir.path().join("run/train_log.jsonl").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let read = |name: &str| fs::read(dir.path().join("run").join(name)).unwrap();
    assert_eq!(code(&train(dir.path(), "run", &["--tmax", "2"])), 0);
    let first = [read("model_T1.json"), read("model_T2.json")];
    assert_eq!(code(&train(dir.path(), "run", &["--tmax", "2"])), 0);
    assert!(first[0] == read("model_T1.json"), "model_T1.json differs");
    assert!(first[1] == read("model_T2.json"), "model_T2.json differs");
}

#[test]
fn prg_with_count_data_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(dir.path(), "run", &["--link", "prg"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&train(dir.path(), "run", &["-s", "colour=red"])), 2);
}

#[test]
fn missing_data_is_data_error() {
    let out = gbn(&["train", "--data", "/nonexistent/docs.uci", "--out", "/tmp/unused"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/docs.uci"));
}

#[test]
fn missing_model_is_model_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("absent.json");
    let out = gbn(&[
        "tree",
        "--model",
        model.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--roots",
        "1:0",
        "--tau",
        "1",
    ]);
    assert_eq!(code(&out), 4);
}

#[test]
fn infinite_threshold_tree_is_root_only() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&train(dir.path(), "run", &["--tmax", "2"])), 0);
    let model = dir.path().join("run/model_T2.json");
    let out_dir = dir.path().join("tree");
    let out = gbn(&[
        "tree",
        "--model",
        model.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--roots",
        "2:0",
        "--tau",
        "inf",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dot = fs::read_to_string(out_dir.join("tree.dot")).unwrap();
    assert!(!dot.contains("->"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("tree.json")).unwrap()).unwrap();
    assert_eq!(json["graph"]["nodes"].as_array().unwrap().len(), 1);
    assert!(dot.contains("// tau=inf"), "config echo missing:\n{dot}");
}

#[test]
fn features_rows_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&train(dir.path(), "run", &["--tmax", "1"])), 0);
    let data = dir.path().join("docs.uci");
    let out_dir = dir.path().join("feat");
    let out = gbn(&[
        "features",
        "--data",
        data.to_str().unwrap(),
        "--model",
        dir.path().join("run/model_T1.json").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "-s",
        "burnin=5",
        "-s",
        "collect=10",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("features.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 40);
    for row in rows {
        let cells: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        let sum: f64 = cells[..cells.len() - 1].iter().sum();
        assert!((sum - 1.0).abs() < 1e-8, "{row}");
    }
}

#[test]
fn perplexity_and_generate_run() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&train(dir.path(), "run", &["--tmax", "2"])), 0);
    let model = dir.path().join("run/model_T2.json");
    let data = dir.path().join("docs.uci");
    let out_dir = dir.path().join("eval");
    let out = gbn(&[
        "perplexity",
        "--data",
        data.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "-s",
        "burnin=5",
        "-s",
        "collect=10",
        "-s",
        "thin=2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(out_dir.join("perplexity.jsonl")).unwrap().contains("perplexity"));
    let out = gbn(&[
        "generate",
        "--model",
        model.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--docs",
        "4",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let uci = fs::read_to_string(out_dir.join("synthetic.uci")).unwrap();
    assert_eq!(uci.lines().next(), Some("4"));
}
