//! Text formats: dense matrices, edge lists, feature and label tables, split
//! files, and network checkpoints. Floats are written in Rust's shortest
//! round-trip representation, so write-then-read is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pmlp_core::nn::{Activation, Layer, Network};
use pmlp_core::DenseMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_string(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
    }
    fs::write(path, content).map_err(|e| CliError::io(path, e))
}

fn parse_f64(tok: &str, path: &Path) -> Result<f64> {
    tok.parse()
        .map_err(|_| CliError::schema(path.display().to_string(), format!("bad number `{tok}`")))
}

/// Matrix file: a `rows cols` header line, then row-major values.
pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    write_string(path, &out)
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = read_to_string(path)?;
    let mut tokens = text.split_whitespace();
    let rows: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| CliError::schema(path.display().to_string(), "missing row count"))?;
    let cols: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| CliError::schema(path.display().to_string(), "missing col count"))?;
    let mut data = Vec::with_capacity(rows * cols);
    for tok in tokens {
        data.push(parse_f64(tok, path)?);
    }
    if data.len() != rows * cols {
        return Err(CliError::schema(
            path.display().to_string(),
            format!("expected {} values, found {}", rows * cols, data.len()),
        ));
    }
    Ok(DenseMatrix::from_vec(rows, cols, data)?)
}

/// Edge list: one `u v` pair per line, `#` comment lines ignored.
pub fn write_edges(path: &Path, edges: &[(usize, usize)]) -> Result<()> {
    let mut out = String::new();
    for &(u, v) in edges {
        let _ = writeln!(out, "{u} {v}");
    }
    write_string(path, &out)
}

pub fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = read_to_string(path)?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.and_then(|t| t.parse().ok()).ok_or_else(|| {
                CliError::schema(
                    path.display().to_string(),
                    format!("line {}: expected two node ids", lineno + 1),
                )
            })
        };
        let u = parse(parts.next())?;
        let v = parse(parts.next())?;
        edges.push((u, v));
    }
    Ok(edges)
}

/// Feature table: comma-separated values, one node per row, row index is the
/// node id.
pub fn write_features(path: &Path, x: &DenseMatrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..x.rows() {
        let row: Vec<String> = x.row(i).iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    write_string(path, &out)
}

pub fn read_features(path: &Path) -> Result<DenseMatrix> {
    let text = read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>> = line.split(',').map(|t| parse_f64(t.trim(), path)).collect();
        rows.push(row?);
    }
    if rows.is_empty() {
        return Err(CliError::schema(
            path.display().to_string(),
            "no feature rows",
        ));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::schema(
            path.display().to_string(),
            "ragged feature rows",
        ));
    }
    let n = rows.len();
    Ok(DenseMatrix::from_vec(n, cols, rows.concat())?)
}

/// Label table: `node_id,class` per line; an optional header is skipped.
pub fn write_labels(path: &Path, labels: &[Option<usize>]) -> Result<()> {
    let mut out = String::from("node_id,class\n");
    for (i, label) in labels.iter().enumerate() {
        if let Some(c) = label {
            let _ = writeln!(out, "{i},{c}");
        }
    }
    write_string(path, &out)
}

pub fn read_labels(path: &Path, n: usize) -> Result<Vec<Option<usize>>> {
    let text = read_to_string(path)?;
    let mut labels = vec![None; n];
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("node_id") {
            continue;
        }
        let mut parts = line.split(',');
        let id: usize = parts
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| CliError::schema(path.display().to_string(), "bad node id"))?;
        let class_tok = parts
            .next()
            .ok_or_else(|| CliError::schema(path.display().to_string(), "missing class"))?
            .trim();
        let class: usize = class_tok.parse().map_err(|_| CliError::Label {
            file: path.display().to_string(),
            label: class_tok.to_string(),
        })?;
        if id >= n {
            return Err(CliError::schema(
                path.display().to_string(),
                format!("node id {id} exceeds node count {n}"),
            ));
        }
        labels[id] = Some(class);
    }
    Ok(labels)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SplitFile {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn write_split(path: &Path, split: &SplitFile) -> Result<()> {
    let text = serde_json::to_string_pretty(split)
        .map_err(|e| CliError::schema(path.display().to_string(), e.to_string()))?;
    write_string(path, &text)
}

pub fn read_split(path: &Path) -> Result<SplitFile> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::schema(path.display().to_string(), e.to_string()))
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn checksums_for(dir: &Path, files: &[&str]) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for f in files {
        map.insert((*f).to_string(), sha256_hex(&dir.join(f))?);
    }
    Ok(map)
}

fn activation_tag(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "RELU",
        Activation::Tanh => "TANH",
        Activation::Cos => "COS",
        Activation::Elu => "ELU",
    }
}

pub fn parse_activation(s: &str) -> Result<Activation> {
    match s.to_ascii_uppercase().as_str() {
        "RELU" => Ok(Activation::Relu),
        "TANH" => Ok(Activation::Tanh),
        "COS" => Ok(Activation::Cos),
        "ELU" => Ok(Activation::Elu),
        other => Err(CliError::Config(format!("unknown activation `{other}`"))),
    }
}

pub fn parse_scheme(s: &str) -> Result<pmlp_core::Scheme> {
    use pmlp_core::Scheme;
    match s.to_ascii_uppercase().replace('-', "_").as_str() {
        "SYM" => Ok(Scheme::Sym),
        "NO_LOOP" | "NOLOOP" => Ok(Scheme::NoLoop),
        "RW" => Ok(Scheme::Rw),
        "DIFF" => Ok(Scheme::Diff),
        other => Err(CliError::Config(format!("unknown scheme `{other}`"))),
    }
}

pub fn scheme_tag(s: pmlp_core::Scheme) -> &'static str {
    match s {
        pmlp_core::Scheme::Sym => "SYM",
        pmlp_core::Scheme::NoLoop => "NO_LOOP",
        pmlp_core::Scheme::Rw => "RW",
        pmlp_core::Scheme::Diff => "DIFF",
    }
}

/// Checkpoint: a small header followed by one matrix block and one bias line
/// per layer.
pub fn write_checkpoint(path: &Path, net: &Network) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "pmlp-checkpoint 1");
    let dims: Vec<String> = net.dims().iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "dims {}", dims.join(" "));
    let _ = writeln!(out, "activation {}", activation_tag(net.activation));
    let _ = writeln!(out, "dropout {}", net.dropout_rate);
    for layer in &net.layers {
        let _ = writeln!(out, "{} {}", layer.weight.rows(), layer.weight.cols());
        for i in 0..layer.weight.rows() {
            let row: Vec<String> = layer.weight.row(i).iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        let bias: Vec<String> = layer.bias.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "bias {}", bias.join(" "));
    }
    write_string(path, &out)
}

pub fn read_checkpoint(path: &Path) -> Result<Network> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    let schema_err = |msg: &str| CliError::schema(path.display().to_string(), msg.to_string());
    let header = lines.next().ok_or_else(|| schema_err("empty checkpoint"))?;
    if header.trim() != "pmlp-checkpoint 1" {
        return Err(schema_err("unrecognized checkpoint header"));
    }
    let dims_line = lines.next().ok_or_else(|| schema_err("missing dims"))?;
    let dims: Vec<usize> = dims_line
        .trim()
        .strip_prefix("dims ")
        .ok_or_else(|| schema_err("missing dims"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| schema_err("bad dim")))
        .collect::<Result<_>>()?;
    let act_line = lines
        .next()
        .ok_or_else(|| schema_err("missing activation"))?;
    let activation = parse_activation(
        act_line
            .trim()
            .strip_prefix("activation ")
            .ok_or_else(|| schema_err("missing activation"))?,
    )?;
    let drop_line = lines.next().ok_or_else(|| schema_err("missing dropout"))?;
    let dropout_rate: f64 = drop_line
        .trim()
        .strip_prefix("dropout ")
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| schema_err("missing dropout"))?;

    let mut layers = Vec::new();
    for _ in 0..dims.len().saturating_sub(1) {
        let shape_line = lines
            .next()
            .ok_or_else(|| schema_err("missing layer shape"))?;
        let mut parts = shape_line.split_whitespace();
        let rows: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| schema_err("bad layer shape"))?;
        let cols: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| schema_err("bad layer shape"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let row_line = lines
                .next()
                .ok_or_else(|| schema_err("truncated weights"))?;
            for tok in row_line.split_whitespace() {
                data.push(parse_f64(tok, path)?);
            }
        }
        if data.len() != rows * cols {
            return Err(schema_err("weight block size mismatch"));
        }
        let bias_line = lines.next().ok_or_else(|| schema_err("missing bias"))?;
        let bias: Vec<f64> = bias_line
            .trim()
            .strip_prefix("bias ")
            .ok_or_else(|| schema_err("missing bias"))?
            .split_whitespace()
            .map(|t| parse_f64(t, path))
            .collect::<Result<_>>()?;
        layers.push(Layer {
            weight: DenseMatrix::from_vec(rows, cols, data)?,
            bias,
        });
    }
    Ok(Network {
        layers,
        activation,
        dropout_rate,
    })
}
