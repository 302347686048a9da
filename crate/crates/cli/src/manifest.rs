//! Dataset manifests: a `dataset.json` binds the edge, feature, label, and
//! split files with checksums so a dataset directory is self-verifying.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pmlp_core::dataset::{csbm_generate, normalize_features, CsbmParams, Dataset, DatasetMeta};
use pmlp_core::graph::{build_graph, inductive_split};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::formats;

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub edges: String,
    pub features: String,
    pub labels: String,
    pub split: String,
    /// Normalization already applied to the feature file; `raw` features are
    /// normalized at load time.
    #[serde(default = "default_normalization")]
    pub normalization: String,
    pub checksums: BTreeMap<String, String>,
}

fn default_normalization() -> String {
    String::from("raw")
}

/// Loads and verifies a dataset directory via its manifest. Raw features are
/// row-L1 scaled and column-standardized with statistics from the training
/// rows.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let text =
        std::fs::read_to_string(manifest_path).map_err(|e| CliError::io(manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::schema(manifest_path.display().to_string(), e.to_string()))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));

    for (file, want) in &manifest.checksums {
        let got = formats::sha256_hex(&dir.join(file))?;
        if &got != want {
            return Err(CliError::schema(
                file.clone(),
                format!("checksum mismatch: manifest {want}, file {got}"),
            ));
        }
    }

    let x = formats::read_features(&dir.join(&manifest.features))?;
    let n = x.rows();
    let edges = formats::read_edges(&dir.join(&manifest.edges))?;
    for &(u, v) in &edges {
        if u >= n || v >= n {
            return Err(CliError::schema(
                manifest.edges.clone(),
                format!("edge ({u},{v}) outside {n} feature rows"),
            ));
        }
    }
    let graph = build_graph(n, &edges)?;
    let labels = formats::read_labels(&dir.join(&manifest.labels), n)?;
    let split_file = formats::read_split(&dir.join(&manifest.split))?;
    let split = inductive_split(
        &graph,
        &split_file.train,
        &split_file.valid,
        &split_file.test,
    )?;
    for part in [&split.train_ids, &split.valid_ids, &split.test_ids] {
        for &id in part {
            if labels[id].is_none() {
                return Err(CliError::schema(
                    manifest.labels.clone(),
                    format!("node {id} is in the split but unlabeled"),
                ));
            }
        }
    }
    let num_classes = labels.iter().flatten().max().map_or(0, |m| m + 1);

    let (x, normalization) = if manifest.normalization == "raw" {
        normalize_features(&x, &split.train_ids)
    } else {
        (x, manifest.normalization.clone())
    };

    Ok(Dataset {
        graph,
        x,
        labels,
        num_classes,
        split,
        meta: DatasetMeta {
            name: manifest.name,
            normalization,
        },
    })
}

/// Writes a dataset directory with its manifest; features are saved exactly
/// as held, and the manifest records their normalization state.
pub fn save_dataset(dir: &Path, dataset: &Dataset) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    formats::write_edges(&dir.join("edges.txt"), dataset.graph.edges())?;
    formats::write_features(&dir.join("features.csv"), &dataset.x)?;
    formats::write_labels(&dir.join("labels.csv"), &dataset.labels)?;
    formats::write_split(
        &dir.join("split.json"),
        &formats::SplitFile {
            train: dataset.split.train_ids.clone(),
            valid: dataset.split.valid_ids.clone(),
            test: dataset.split.test_ids.clone(),
        },
    )?;
    let checksums = formats::checksums_for(
        dir,
        &["edges.txt", "features.csv", "labels.csv", "split.json"],
    )?;
    let manifest = DatasetManifest {
        name: dataset.meta.name.clone(),
        edges: "edges.txt".into(),
        features: "features.csv".into(),
        labels: "labels.csv".into(),
        split: "split.json".into(),
        normalization: dataset.meta.normalization.clone(),
        checksums,
    };
    let path = dir.join("dataset.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::schema("dataset.json", e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// Parses a `csbm:` spec of the form
/// `csbm:n=1000,c=2,p=0.02,q=0.002,d=16,signal=1.0,seed=0`.
pub fn parse_csbm_spec(spec: &str) -> Result<CsbmParams> {
    let mut params = CsbmParams {
        n: 1000,
        num_classes: 2,
        intra_p: 0.02,
        inter_q: 0.002,
        feature_dim: 16,
        feature_signal: 1.0,
        seed: 0,
    };
    if spec.is_empty() {
        return Ok(params);
    }
    for pair in spec.split(',') {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("bad csbm field `{pair}`")))?;
        let bad = || CliError::Config(format!("bad csbm value `{value}` for `{key}`"));
        match key.trim() {
            "n" => params.n = value.parse().map_err(|_| bad())?,
            "c" | "classes" => params.num_classes = value.parse().map_err(|_| bad())?,
            "p" => params.intra_p = value.parse().map_err(|_| bad())?,
            "q" => params.inter_q = value.parse().map_err(|_| bad())?,
            "d" | "dim" => params.feature_dim = value.parse().map_err(|_| bad())?,
            "signal" => params.feature_signal = value.parse().map_err(|_| bad())?,
            "seed" => params.seed = value.parse().map_err(|_| bad())?,
            other => return Err(CliError::Config(format!("unknown csbm field `{other}`"))),
        }
    }
    Ok(params)
}

/// Resolves a `--dataset` argument: a `csbm:` spec generates in memory; any
/// other value is a manifest path, tried as-is and then under
/// `PMLP_DATA_DIR`.
pub fn resolve_dataset(spec: &str) -> Result<Dataset> {
    if let Some(rest) = spec.strip_prefix("csbm:") {
        let params = parse_csbm_spec(rest)?;
        return Ok(csbm_generate(&params)?);
    }
    let direct = PathBuf::from(spec);
    if direct.exists() {
        return load_dataset(&direct);
    }
    if let Ok(root) = std::env::var("PMLP_DATA_DIR") {
        let under_root = Path::new(&root).join(spec);
        if under_root.exists() {
            return load_dataset(&under_root);
        }
    }
    Err(CliError::Config(format!("dataset `{spec}` not found")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csbm_spec_parsing() {
        let p = parse_csbm_spec("n=200,c=3,p=0.1,q=0.01,d=8,signal=0.7,seed=5").unwrap();
        assert_eq!(p.n, 200);
        assert_eq!(p.num_classes, 3);
        assert_eq!(p.feature_dim, 8);
        assert_eq!(p.seed, 5);
        assert!(parse_csbm_spec("bogus").is_err());
        assert!(parse_csbm_spec("n=x").is_err());
    }

    #[test]
    fn save_load_round_trip_is_identical() {
        let params = CsbmParams {
            n: 60,
            num_classes: 2,
            intra_p: 0.1,
            inter_q: 0.02,
            feature_dim: 3,
            feature_signal: 1.0,
            seed: 2,
        };
        let ds = csbm_generate(&params).unwrap();
        let dir = std::env::temp_dir().join("pmlp-manifest-roundtrip");
        let _ = std::fs::remove_dir_all(&dir);
        let manifest = save_dataset(&dir, &ds).unwrap();
        let loaded = load_dataset(&manifest).unwrap();
        // Loading normalizes the raw features once...
        assert_eq!(loaded.meta.normalization, "l1row+colstd(train)");
        assert_eq!(loaded.graph, ds.graph);
        assert_eq!(loaded.labels, ds.labels);
        assert_eq!(loaded.split.train_ids, ds.split.train_ids);
        // ...and a second save/load cycle is bit-identical.
        let dir2 = std::env::temp_dir().join("pmlp-manifest-roundtrip2");
        let _ = std::fs::remove_dir_all(&dir2);
        let manifest2 = save_dataset(&dir2, &loaded).unwrap();
        let loaded2 = load_dataset(&manifest2).unwrap();
        assert_eq!(loaded.x, loaded2.x);
        assert_eq!(loaded.graph, loaded2.graph);
        assert_eq!(loaded.labels, loaded2.labels);
        assert_eq!(loaded.split.train_ids, loaded2.split.train_ids);
        assert_eq!(loaded.split.valid_ids, loaded2.split.valid_ids);
        assert_eq!(loaded.split.test_ids, loaded2.split.test_ids);
    }

    #[test]
    fn checksum_mismatch_is_reported() {
        let params = CsbmParams {
            n: 30,
            num_classes: 2,
            intra_p: 0.1,
            inter_q: 0.02,
            feature_dim: 2,
            feature_signal: 1.0,
            seed: 3,
        };
        let ds = csbm_generate(&params).unwrap();
        let dir = std::env::temp_dir().join("pmlp-manifest-tamper");
        let _ = std::fs::remove_dir_all(&dir);
        let manifest = save_dataset(&dir, &ds).unwrap();
        std::fs::write(dir.join("labels.csv"), "node_id,class\n0,1\n").unwrap();
        let err = load_dataset(&manifest).unwrap_err();
        assert!(matches!(err, CliError::Schema { .. }), "{err:?}");
    }
}
