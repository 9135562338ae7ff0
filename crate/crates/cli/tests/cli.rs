use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gap")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = gap(args);
    assert!(
        out.status.success(),
        "gap {args:?} failed: {}",
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

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn two_triangles(dir: &Path) -> PathBuf {
    write(dir, "bridge.edges", "0 1\n0 2\n1 2\n2 3\n3 4\n3 5\n4 5\n")
}

#[test]
fn generate_writes_files_and_reproduces_from_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    ok(&["generate", "--kind", "er", "--n", "60", "--p", "0.1", "--count", "5", "--seed", "7", "--out", s(&a)]);
    let manifest = json(a.join("manifest.json"));
    assert_eq!(manifest["files"].as_array().unwrap().len(), 5);
    let edges = fs::read_dir(&a).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "edges")).count();
    assert_eq!(edges, 5);

    let b = dir.path().join("b");
    ok(&["generate", "--config", s(&a.join("config.resolved.toml")), "--out", s(&b)]);
    for i in 0..5 {
        for ext in ["edges", "metis"] {
            let name = format!("er_{i:03}.{ext}");
            assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
        }
    }
    assert_eq!(json(b.join("manifest.json")), manifest);
}

#[test]
fn invalid_probability_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gap(&["generate", "--kind", "er", "--n", "10", "--p", "1.5", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn clap_usage_errors_exit_2() {
    assert_eq!(code(&gap(&["train", "--no-such-flag"])), 2);
    assert_eq!(code(&gap(&["frobnicate"])), 2);
}

#[test]
fn oracle_on_bridge_graph() {
    let dir = tempfile::tempdir().unwrap();
    let g = two_triangles(dir.path());
    let out = dir.path().join("o");
    ok(&["oracle", "--graph", s(&g), "-g", "2", "--out", s(&out)]);
    let r = json(out.join("oracle.json"));
    assert!((r["ncut"].as_f64().unwrap() - 2.0 / 7.0).abs() < 1e-12);
    assert_eq!(fs::read_to_string(out.join("assignment.txt")).unwrap(), "0\n0\n0\n1\n1\n1\n");
}

#[test]
fn oracle_size_guard() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("big");
    ok(&["generate", "--kind", "er", "--n", "40", "--p", "0.2", "--out", s(&g)]);
    let out = gap(&["oracle", "--graph", s(&g.join("er_000.edges")), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_all_zeros_on_cycle_and_degree_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "c4.edges", "0 1\n1 2\n2 3\n0 3\n");
    let a = write(dir.path(), "zeros.txt", "0\n0\n0\n0\n");
    let out = dir.path().join("e");
    ok(&["eval", "--graph", s(&g), "--assignment", s(&a), "-g", "2", "--degree-histogram", "--out", s(&out)]);
    let m = json(out.join("metrics.json"));
    assert_eq!(m["edge_cut_ratio"].as_f64().unwrap(), 0.0);
    assert!((m["balancedness"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert_eq!(fs::read_to_string(out.join("degree_histogram.csv")).unwrap(), "degree,count\n2,4\n");

    let short = write(dir.path(), "short.txt", "0\n1\n");
    assert_eq!(code(&gap(&["eval", "--graph", s(&g), "--assignment", s(&short), "--out", s(&out)])), 2);
}

#[test]
fn train_infer_and_partition_guard() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["generate", "--kind", "er", "--n", "80", "--p", "0.1", "--count", "3", "--out", s(&data)]);
    let model = dir.path().join("model");
    ok(&[
        "train",
        "--graph", s(&data.join("er_000.edges")),
        "--graph", s(&data.join("er_001.metis")),
        "--validation", s(&data.join("er_002.edges")),
        "-g", "3", "--epochs", "5", "--pca-dim", "8", "--seed", "1", "--out", s(&model),
    ]);
    for f in ["model.ckpt", "history.csv", "train_report.json", "config.resolved.toml"] {
        assert!(model.join(f).exists(), "{f}");
    }
    let history = fs::read_to_string(model.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 2 * 5);

    let inf = dir.path().join("inf");
    let ckpt = model.join("model.ckpt");
    ok(&["infer", "--checkpoint", s(&ckpt), "--graph", s(&data.join("er_002.edges")), "--out", s(&inf)]);
    let lines = fs::read_to_string(inf.join("assignment.txt")).unwrap();
    assert_eq!(lines.lines().count(), 80);
    assert!(lines.lines().all(|l| l.parse::<usize>().unwrap() < 3));
    let m = json(inf.join("metrics.json"));
    assert!(m["wall_clock_ms"].as_f64().unwrap() >= 0.0);

    let wrong = gap(&["infer", "--checkpoint", s(&ckpt), "--graph", s(&data.join("er_002.edges")), "-g", "2", "--out", s(&inf)]);
    assert_eq!(code(&wrong), 2);
    assert!(String::from_utf8_lossy(&wrong.stderr).contains('3'));
}

#[test]
fn training_reproduces_from_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let g = two_triangles(dir.path());
    let a = dir.path().join("a");
    ok(&["train", "--graph", s(&g), "-g", "2", "--epochs", "20", "--pca-dim", "4", "--seed", "3", "--out", s(&a)]);
    let b = dir.path().join("b");
    ok(&["train", "--config", s(&a.join("config.resolved.toml")), "--out", s(&b)]);
    assert_eq!(fs::read(a.join("history.csv")).unwrap(), fs::read(b.join("history.csv")).unwrap());
    assert_eq!(fs::read(a.join("model.ckpt")).unwrap(), fs::read(b.join("model.ckpt")).unwrap());
}

#[test]
fn resume_continues_with_optimizer_state() {
    let dir = tempfile::tempdir().unwrap();
    let g = two_triangles(dir.path());
    let a = dir.path().join("a");
    ok(&["train", "--graph", s(&g), "-g", "2", "--epochs", "4", "--pca-dim", "4", "--out", s(&a)]);
    let b = dir.path().join("b");
    ok(&["train", "--graph", s(&g), "--resume", s(&a.join("model.ckpt")), "--epochs", "3", "--out", s(&b)]);
    let r = json(b.join("train_report.json"));
    assert_eq!(r["epochs_run"], 3);
    let resolved = fs::read_to_string(b.join("config.resolved.toml")).unwrap();
    assert!(resolved.contains("resume = true"));
}

#[test]
fn missing_validation_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let g = two_triangles(dir.path());
    let missing = dir.path().join("nope.edges");
    let out = gap(&["train", "--graph", s(&g), "--validation", s(&missing), "-g", "2", "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.edges"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let g = two_triangles(dir.path());
    let cfg = write(dir.path(), "run.toml", "[model]\npartitions = 2\nflavour = \"x\"\n");
    let out = gap(&["train", "--config", s(&cfg), "--graph", s(&g), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
    let cfg = write(dir.path(), "run2.toml", "[training]\nlearning_rat = 0.1\n");
    let out = gap(&["train", "--config", s(&cfg), "--graph", s(&g), "-g", "2", "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let g = two_triangles(dir.path());
    let cfg = write(
        dir.path(),
        "run.toml",
        "seed = 1\n[model]\npartitions = 2\npca_dim = 4\n[training]\nmax_epochs = 50\nlearning_rate = 0.01\n",
    );
    let out = dir.path().join("o");
    ok(&["train", "--config", s(&cfg), "--graph", s(&g), "--epochs", "2", "--out", s(&out)]);
    let r = json(out.join("train_report.json"));
    assert_eq!(r["epochs_run"], 2);
    let resolved: toml::Table = toml::from_str(&fs::read_to_string(out.join("config.resolved.toml")).unwrap()).unwrap();
    assert_eq!(resolved["training"]["max_epochs"].as_integer(), Some(2));
    assert_eq!(resolved["training"]["learning_rate"].as_float(), Some(0.01));
}

#[test]
fn divergence_exits_with_numeric_code() {
    let dir = tempfile::tempdir().unwrap();
    let g = two_triangles(dir.path());
    let cfg = write(
        dir.path(),
        "run.toml",
        r#"
[model.spec]
partitions = 2
embedding = "none"
hidden = 4
head_layers = [4]
features = { kind = "pca", dim = 3 }

[training]
learning_rate = 1e300
max_epochs = 50
"#,
    );
    let out = gap(&["train", "--config", s(&cfg), "--graph", s(&g), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn preset_training_and_vocabulary_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(
        dir.path(),
        "train.json",
        r#"{"nodes": [{"id": 0, "op_type": "Conv2D"}, {"id": 1, "op_type": "Conv2D"}, {"id": 2, "op_type": "MatMul"}, {"id": 3, "op_type": "MatMul"}],
            "edges": [{"u": 0, "v": 1}, {"u": 1, "v": 2}, {"u": 2, "v": 3}]}"#,
    );
    let unseen = write(
        dir.path(),
        "unseen.json",
        r#"{"nodes": [{"id": "a", "op_type": "Conv2D"}, {"id": "b", "op_type": "Softmax"}], "edges": [{"u": "a", "v": "b"}]}"#,
    );
    let model = dir.path().join("m");
    ok(&["train", "--preset", "gap-op-gcn-offline", "--graph", s(&train), "-g", "2", "--epochs", "3", "--out", s(&model)]);
    assert_eq!(fs::read_to_string(model.join("vocabulary.txt")).unwrap(), "Conv2D\nMatMul\n");

    let out = gap(&["infer", "--checkpoint", s(&model.join("model.ckpt")), "--graph", s(&unseen), "--out", s(&dir.path().join("i"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Softmax"));

    assert_eq!(code(&gap(&["train", "--preset", "gap-nope", "--graph", s(&train), "-g", "2", "--out", s(&model)])), 2);
}

#[test]
fn bench_with_external_adapter_adds_a_column() {
    let dir = tempfile::tempdir().unwrap();
    let g = two_triangles(dir.path());
    let out = dir.path().join("b");
    // prints node i's partition as i mod g from the METIS header
    let cmd = "zeros=awk 'NR==1{for(i=0;i<$1;i++) print i%{g}}' {graph}";
    ok(&["bench", "--graph", s(&g), "-g", "2", "--repeats", "2", "--external", cmd, "--out", s(&out)]);
    let csv = fs::read_to_string(out.join("bench.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().any(|r| r.starts_with("zeros,")));
    let report = json(out.join("bench.json"));
    let ext = report["rows"].as_array().unwrap().iter().find(|r| r["partitioner"] == "zeros").unwrap();
    assert!(ext["error"].is_null());
    assert!(ext["balancedness_mean"].as_f64().unwrap() > 0.99);
}
