//! End-to-end tests of the `pmlp` binary: flag handling, exit codes, and
//! that every output is parseable by the crate's own readers.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pmlp_cli::manifest::load_dataset;
use pmlp_cli::run::RunResult;
use pmlp_cli::sweep::parse_csv;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pmlp"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pmlp-cli-{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn pmlp");
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const CSBM_SMALL: &str = "csbm:n=120,c=2,p=0.08,q=0.01,d=4,signal=1.5,seed=3";

#[test]
fn toy_fixture_parses_to_documented_values() {
    let ds = load_dataset(&fixture("toy3/dataset.json")).unwrap();
    assert_eq!(ds.n(), 3);
    assert_eq!(ds.graph.edges(), &[(0, 1), (1, 2)]);
    assert_eq!(ds.labels, vec![Some(0), Some(0), Some(1)]);
    assert_eq!(ds.split.train_ids, vec![0, 1]);
    assert_eq!(ds.split.test_ids, vec![2]);
    assert_eq!(ds.split.train_graph.num_edges(), 1);
    assert_eq!(ds.meta.normalization, "l1row+colstd(train)");
}

#[test]
fn overlapping_split_is_rejected() {
    let dir = tmp_dir("overlap");
    for f in ["edges.txt", "features.csv", "labels.csv"] {
        std::fs::copy(fixture("toy3").join(f), dir.join(f)).unwrap();
    }
    std::fs::write(
        dir.join("split.json"),
        r#"{"train": [0, 1], "valid": [], "test": [1, 2]}"#,
    )
    .unwrap();
    // Manifest without checksums still loads files; overlap must fail.
    std::fs::write(
        dir.join("dataset.json"),
        r#"{"name":"bad","edges":"edges.txt","features":"features.csv","labels":"labels.csv","split":"split.json","checksums":{}}"#,
    )
    .unwrap();
    let err = load_dataset(&dir.join("dataset.json")).unwrap_err();
    assert!(err.to_string().contains("two split parts"), "{err}");
}

#[test]
fn train_is_reproducible_and_pmlp_shares_the_training_side() {
    let dir = tmp_dir("train");
    let out_a = dir.join("a.json");
    let out_b = dir.join("b.json");
    let out_c = dir.join("c.json");
    let base = ["--dataset", CSBM_SMALL, "--seed", "1", "--epochs", "25"];
    run_ok(bin().arg("train").args(base).args([
        "--model",
        "MLP",
        "--out",
        out_a.to_str().unwrap(),
    ]));
    run_ok(bin().arg("train").args(base).args([
        "--model",
        "MLP",
        "--out",
        out_b.to_str().unwrap(),
    ]));
    run_ok(bin().arg("train").args(base).args([
        "--model",
        "PMLP_GCN",
        "--out",
        out_c.to_str().unwrap(),
    ]));

    let parse = |p: &PathBuf| -> RunResult {
        serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
    };
    let a = parse(&out_a);
    let b = parse(&out_b);
    let c = parse(&out_c);
    assert_eq!(a.schema, 1);
    assert!(a.same_payload(&b), "identical flags must reproduce");
    // Same seed, same training path; only the inference side may differ.
    assert_eq!(a.train_loss_final, c.train_loss_final);
    assert_ne!(a.model, c.model);
}

#[test]
fn train_with_zero_epochs_is_valid() {
    let dir = tmp_dir("zero-epochs");
    let out = dir.join("r.json");
    run_ok(bin().arg("train").args([
        "--dataset",
        CSBM_SMALL,
        "--model",
        "PMLP_APP",
        "--epochs",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]));
    let res: RunResult = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((0.0..=1.0).contains(&res.accuracy));
}

#[test]
fn config_errors_exit_two_with_one_line() {
    let out = bin()
        .arg("train")
        .args(["--dataset", CSBM_SMALL, "--model", "GAT"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.trim().lines().count(), 1, "stderr: {stderr}");
    assert!(stderr.contains("GAT"));

    let out = bin()
        .arg("train")
        .args(["--dataset", "missing-dir/nope.json", "--model", "MLP"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_produces_long_format_csv() {
    let dir = tmp_dir("sweep");
    let out = dir.join("sweep.csv");
    run_ok(bin().arg("sweep").args([
        "--dataset",
        CSBM_SMALL,
        "--sweep",
        "layers",
        "--values",
        "2,3",
        "--models",
        "MLP,PMLP_GCN",
        "--seeds",
        "2",
        "--epochs",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows = parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2);
    assert!(rows
        .iter()
        .all(|(sweep, _, _, _, status)| { sweep == "layers" && status == "OK" }));
}

#[test]
fn ntk_outputs_parse_back() {
    let dir = tmp_dir("ntk");
    let prefix = dir.join("run");
    run_ok(bin().arg("ntk").args([
        "--dataset",
        "csbm:n=200,c=2,p=0.1,q=0.01,d=3,signal=1.0,seed=2",
        "--mode",
        "pmlp-cross",
        "--out",
        prefix.to_str().unwrap(),
    ]));
    let kernel = pmlp_cli::formats::read_matrix(&prefix.with_extension("kernel.txt")).unwrap();
    assert_eq!(kernel.rows(), kernel.cols());
    let sidecar: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(prefix.with_extension("kernel.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(sidecar["node_ids"].as_array().unwrap().len(), kernel.rows());
    let preds: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(prefix.with_extension("predictions.json")).unwrap(),
    )
    .unwrap();
    assert!(!preds["predictions"].as_array().unwrap().is_empty());
}

#[test]
fn extrapolate_writes_probe_series() {
    let dir = tmp_dir("probe");
    let out = dir.join("probe.json");
    run_ok(bin().arg("extrapolate").args([
        "--wiring",
        "star:2",
        "--width",
        "128",
        "--steps",
        "40",
        "--seeds",
        "2",
        "--t-grid",
        "10,50",
        "--out",
        out.to_str().unwrap(),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["wiring"], "star:2");
    assert_eq!(report["probes"].as_array().unwrap().len(), 2);
    let probe = &report["probes"][0];
    assert_eq!(probe["t_grid"].as_array().unwrap().len(), 2);
    assert_eq!(probe["deviations"].as_array().unwrap().len(), 2);

    let bad = bin()
        .arg("extrapolate")
        .args(["--wiring", "ring:3"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bench_report_is_well_formed_with_one_step() {
    let dir = tmp_dir("bench");
    let out = dir.join("bench.json");
    run_ok(bin().arg("bench").args([
        "--n",
        "400",
        "--d",
        "8",
        "--hidden",
        "8",
        "--avg-degree",
        "4",
        "--steps",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let entries = report["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert!(entries[1]["ratio_to_mlp"].as_f64().unwrap() > 0.0);
}

#[test]
fn data_dir_env_resolves_relative_manifests() {
    let out = bin()
        .arg("train")
        .env("PMLP_DATA_DIR", fixture("").to_str().unwrap())
        .args([
            "--dataset",
            "toy3/dataset.json",
            "--model",
            "MLP",
            "--epochs",
            "3",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let res: RunResult = serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(res.config["dataset"], "toy3");
}
