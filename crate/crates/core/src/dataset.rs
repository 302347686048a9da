//! Dataset assembly: synthetic contextual stochastic-block-model graphs,
//! stratified splits, feature normalization, and structural perturbations
//! that keep the inductive split consistent.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{build_graph, inductive_split, perturb, Graph, InductiveSplit, Perturbation};
use crate::matrix::DenseMatrix;
use crate::nn::Targets;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetMeta {
    pub name: String,
    /// Which feature normalization produced `x`.
    pub normalization: String,
}

/// A node-classification instance: graph, features, labels, inductive split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub x: DenseMatrix,
    pub labels: Vec<Option<usize>>,
    pub num_classes: usize,
    pub split: InductiveSplit,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn targets(&self) -> Targets {
        Targets::Classes(self.labels.clone())
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }
}

/// Contextual stochastic-block-model parameters.
///
/// Edges appear with probability `intra_p` between same-class nodes and
/// `inter_q` otherwise; features are the class mean (norm `feature_signal`)
/// plus unit Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct CsbmParams {
    pub n: usize,
    pub num_classes: usize,
    pub intra_p: f64,
    pub inter_q: f64,
    pub feature_dim: usize,
    pub feature_signal: f64,
    pub seed: u64,
}

pub const DEFAULT_TRAIN_PER_CLASS: usize = 20;
pub const DEFAULT_VALID_PER_CLASS: usize = 30;

/// Generates a CSBM dataset with the default split of 20 labeled and 30
/// validation nodes per class, everything else test. Deterministic per seed;
/// draw order is labels, class means, features, edges, split.
pub fn csbm_generate(params: &CsbmParams) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&params.intra_p)
        || !(0.0..=1.0).contains(&params.inter_q)
        || params.inter_q > params.intra_p
    {
        return Err(Error::InvalidArgument("need 0 <= q <= p <= 1"));
    }
    if params.n == 0 || params.num_classes == 0 || params.feature_dim == 0 {
        return Err(Error::InvalidArgument("counts must be positive"));
    }
    let mut rng = Rng::from_seed(params.seed);
    let n = params.n;
    let c = params.num_classes;
    let d = params.feature_dim;

    let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();

    // Class means: random directions scaled to the requested signal norm.
    let mut means = Vec::with_capacity(c);
    for _ in 0..c {
        let mut m = rng.normal_vec(d);
        let norm = crate::fmath::sqrt(m.iter().map(|v| v * v).sum::<f64>());
        for v in m.iter_mut() {
            *v = if norm > 0.0 {
                *v / norm * params.feature_signal
            } else {
                0.0
            };
        }
        means.push(m);
    }

    let mut x = DenseMatrix::zeros(n, d);
    for i in 0..n {
        let mean = &means[labels[i]];
        for (j, m) in mean.iter().enumerate() {
            x.set(i, j, m + rng.normal());
        }
    }

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] {
                params.intra_p
            } else {
                params.inter_q
            };
            if rng.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    let graph = build_graph(n, &edges)?;

    let (train, valid, test) = per_class_split(
        &labels,
        c,
        DEFAULT_TRAIN_PER_CLASS,
        DEFAULT_VALID_PER_CLASS,
        &mut rng,
    );
    let split = inductive_split(&graph, &train, &valid, &test)?;

    Ok(Dataset {
        graph,
        x,
        labels: labels.into_iter().map(Some).collect(),
        num_classes: c,
        split,
        meta: DatasetMeta {
            name: format!("csbm-n{}-c{}-seed{}", n, c, params.seed),
            normalization: String::from("raw"),
        },
    })
}

/// Shuffles each class and takes fixed head counts for train and valid.
fn per_class_split(
    labels: &[usize],
    num_classes: usize,
    train_per_class: usize,
    valid_per_class: usize,
    rng: &mut Rng,
) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut valid = Vec::new();
    let mut test = Vec::new();
    for cls in 0..num_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == cls).collect();
        rng.shuffle(&mut members);
        let t = train_per_class.min(members.len());
        let v = valid_per_class.min(members.len() - t);
        train.extend_from_slice(&members[..t]);
        valid.extend_from_slice(&members[t..t + v]);
        test.extend_from_slice(&members[t + v..]);
    }
    (train, valid, test)
}

/// Re-splits a dataset with `floor(fraction * n_class)` training nodes per
/// class; validation and test are re-drawn from the remainder.
pub fn labeled_fraction_split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&fraction) || fraction == 0.0 {
        return Err(Error::InvalidArgument("fraction must be in (0, 1)"));
    }
    let labels: Vec<usize> = dataset
        .labels
        .iter()
        .map(|l| l.ok_or(Error::MissingLabels { node: 0 }))
        .collect::<Result<_>>()?;
    let mut rng = Rng::from_seed(seed);
    let mut train = Vec::new();
    let mut valid = Vec::new();
    let mut test = Vec::new();
    for cls in 0..dataset.num_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == cls).collect();
        if members.is_empty() {
            continue;
        }
        let take = ((fraction * members.len() as f64) as usize).min(members.len());
        if take == 0 {
            return Err(Error::StratificationError { class: cls });
        }
        rng.shuffle(&mut members);
        let v = DEFAULT_VALID_PER_CLASS.min(members.len() - take);
        train.extend_from_slice(&members[..take]);
        valid.extend_from_slice(&members[take..take + v]);
        test.extend_from_slice(&members[take + v..]);
    }
    let split = inductive_split(&dataset.graph, &train, &valid, &test)?;
    Ok(Dataset {
        graph: dataset.graph.clone(),
        x: dataset.x.clone(),
        labels: dataset.labels.clone(),
        num_classes: dataset.num_classes,
        split,
        meta: dataset.meta.clone(),
    })
}

/// Perturbs the full graph and recomputes the split's train graph from the
/// unchanged id sets, so training sees the perturbed structure exactly as
/// inference does.
pub fn apply_perturbation(
    dataset: &Dataset,
    op: Perturbation,
    ratio: f64,
    seed: u64,
) -> Result<Dataset> {
    let graph = perturb(&dataset.graph, op, ratio, seed)?;
    let split = inductive_split(
        &graph,
        &dataset.split.train_ids,
        &dataset.split.valid_ids,
        &dataset.split.test_ids,
    )?;
    Ok(Dataset {
        graph,
        x: dataset.x.clone(),
        labels: dataset.labels.clone(),
        num_classes: dataset.num_classes,
        split,
        meta: dataset.meta.clone(),
    })
}

/// Row-wise L1 scaling followed by column standardization with statistics
/// taken from the training rows only. Returns the normalization tag.
pub fn normalize_features(x: &DenseMatrix, train_ids: &[usize]) -> (DenseMatrix, String) {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let l1: f64 = row.iter().map(|v| v.abs()).sum();
        if l1 > 0.0 {
            for v in row.iter_mut() {
                *v /= l1;
            }
        }
    }
    let cols = out.cols();
    let stat_rows: Vec<usize> = if train_ids.is_empty() {
        (0..out.rows()).collect()
    } else {
        train_ids.to_vec()
    };
    let m = stat_rows.len() as f64;
    for j in 0..cols {
        let mean: f64 = stat_rows.iter().map(|&i| out.get(i, j)).sum::<f64>() / m;
        let var: f64 = stat_rows
            .iter()
            .map(|&i| {
                let d = out.get(i, j) - mean;
                d * d
            })
            .sum::<f64>()
            / m;
        let std = crate::fmath::sqrt(var);
        let denom = if std > 1e-12 { std } else { 1.0 };
        for i in 0..out.rows() {
            let v = (out.get(i, j) - mean) / denom;
            out.set(i, j, v);
        }
    }
    (out, String::from("l1row+colstd(train)"))
}

/// Random graph with a target average degree, for timing benches.
pub fn random_regularish_graph(n: usize, avg_degree: f64, seed: u64) -> Result<Graph> {
    let m = ((n as f64 * avg_degree) / 2.0) as usize;
    let mut rng = Rng::from_seed(seed);
    let mut edges = Vec::with_capacity(m);
    // Duplicates collapse in build_graph; for sparse graphs the loss is tiny.
    for _ in 0..m {
        let u = rng.below(n);
        let mut v = rng.below(n);
        while v == u {
            v = rng.below(n);
        }
        edges.push((u, v));
    }
    build_graph(n, &edges)
}
