//! Undirected graphs, normalized transition operators, message passing,
//! inductive splits, and structural perturbations.
//!
//! Graphs never store self-loops; the schemes that want them synthesize the
//! loop weights during transition-matrix construction, so there is exactly one
//! canonical edge representation.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::fmath;
use crate::matrix::DenseMatrix;
use crate::rng::Rng;

/// Immutable undirected graph with sorted neighbor lists.
///
/// Structural reads (`neighbors`, `edges`) bump an audit counter so tests can
/// prove that a code path never touched a particular graph. The counter is
/// not part of the graph's value; clones start at zero.
#[derive(Debug)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
    access: AtomicUsize,
}

impl Clone for Graph {
    fn clone(&self) -> Self {
        Graph {
            n: self.n,
            edges: self.edges.clone(),
            adj: self.adj.clone(),
            access: AtomicUsize::new(0),
        }
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges
    }
}

impl Graph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Deduplicated edges as `(min, max)` pairs in ascending order.
    pub fn edges(&self) -> &[(usize, usize)] {
        self.access.fetch_add(1, Ordering::Relaxed);
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        self.access.fetch_add(1, Ordering::Relaxed);
        &self.adj[u]
    }

    /// Degree counting the implicit self-loop; at least 1 for every node.
    pub fn degree_with_loop(&self, u: usize) -> usize {
        self.access.fetch_add(1, Ordering::Relaxed);
        self.adj[u].len() + 1
    }

    /// Number of structural reads since construction or the last reset.
    pub fn access_count(&self) -> usize {
        self.access.load(Ordering::Relaxed)
    }

    pub fn reset_access_count(&self) {
        self.access.store(0, Ordering::Relaxed);
    }
}

/// Builds a deduplicated undirected graph from an edge list.
pub fn build_graph(n: usize, edge_list: &[(usize, usize)]) -> Result<Graph> {
    let mut set: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &(u, v) in edge_list {
        if u >= n || v >= n {
            return Err(Error::InvalidEdge { u, v, n });
        }
        if u == v {
            return Err(Error::SelfLoopRejected { node: u });
        }
        set.insert((u.min(v), u.max(v)));
    }
    let edges: Vec<(usize, usize)> = set.into_iter().collect();
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in &edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    Ok(Graph {
        n,
        edges,
        adj,
        access: AtomicUsize::new(0),
    })
}

/// Message-passing normalization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Symmetric normalization with self-loops.
    Sym,
    /// Symmetric normalization without self-loops.
    NoLoop,
    /// Row-stochastic random walk with self-loops.
    Rw,
    /// Truncated heat-kernel diffusion over the random-walk operator.
    Diff,
}

impl Scheme {
    pub fn has_self_loop(self) -> bool {
        !matches!(self, Scheme::NoLoop)
    }
}

/// Sparse row-indexed operator realizing one message-passing step.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    scheme: Scheme,
    n: usize,
    /// Per-row `(neighbor, weight)` pairs, neighbor ids ascending.
    rows: Vec<Vec<(usize, f64)>>,
    diffusion_order: usize,
    /// Nodes whose row is all-zero (isolated nodes under `NoLoop`).
    zero_rows: Vec<usize>,
}

impl TransitionMatrix {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, u: usize) -> &[(usize, f64)] {
        &self.rows[u]
    }

    pub fn diffusion_order(&self) -> usize {
        self.diffusion_order
    }

    /// Warning record: nodes that map to the zero vector under this operator.
    pub fn zero_rows(&self) -> &[usize] {
        &self.zero_rows
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for (u, row) in self.rows.iter().enumerate() {
            for &(v, w) in row {
                m.set(u, v, w);
            }
        }
        m
    }
}

/// Builds the transition operator for `scheme` over `g`.
///
/// `diffusion_order` is the truncation order of the diffusion series and is
/// ignored by the other schemes. Diffusion rows are renormalized to sum to
/// one after truncation.
pub fn transition_matrix(
    g: &Graph,
    scheme: Scheme,
    diffusion_order: usize,
) -> Result<TransitionMatrix> {
    let n = g.n();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut zero_rows = Vec::new();

    match scheme {
        Scheme::Sym => {
            for u in 0..n {
                let du = (g.neighbors(u).len() + 1) as f64;
                let mut row = Vec::with_capacity(g.neighbors(u).len() + 1);
                for &v in g.neighbors(u) {
                    let dv = (g.neighbors(v).len() + 1) as f64;
                    row.push((v, 1.0 / fmath::sqrt(du * dv)));
                }
                row.push((u, 1.0 / du));
                row.sort_unstable_by_key(|&(v, _)| v);
                rows.push(row);
            }
        }
        Scheme::NoLoop => {
            for u in 0..n {
                let du = g.neighbors(u).len();
                if du == 0 {
                    zero_rows.push(u);
                    rows.push(Vec::new());
                    continue;
                }
                let mut row = Vec::with_capacity(du);
                for &v in g.neighbors(u) {
                    let dv = g.neighbors(v).len();
                    row.push((v, 1.0 / fmath::sqrt((du * dv) as f64)));
                }
                rows.push(row);
            }
        }
        Scheme::Rw => {
            for u in 0..n {
                let du = (g.neighbors(u).len() + 1) as f64;
                let mut row: Vec<(usize, f64)> =
                    g.neighbors(u).iter().map(|&v| (v, 1.0 / du)).collect();
                row.push((u, 1.0 / du));
                row.sort_unstable_by_key(|&(v, _)| v);
                rows.push(row);
            }
        }
        Scheme::Diff => {
            if diffusion_order < 1 {
                return Err(Error::InvalidArgument("diffusion order must be >= 1"));
            }
            // Row u of sum_k coeff_k * P_rw^k, built by iterating the row
            // vector e_u over the random-walk operator.
            let inv_deg: Vec<f64> = (0..n)
                .map(|u| 1.0 / (g.neighbors(u).len() + 1) as f64)
                .collect();
            let e = core::f64::consts::E;
            let mut coeff = Vec::with_capacity(diffusion_order + 1);
            let mut fact = 1.0;
            for k in 0..=diffusion_order {
                if k > 0 {
                    fact *= k as f64;
                }
                coeff.push(1.0 / (e * fact));
            }
            for u in 0..n {
                let mut cur = vec![0.0f64; n];
                let mut acc = vec![0.0f64; n];
                cur[u] = 1.0;
                acc[u] = coeff[0];
                for &ck in &coeff[1..] {
                    let mut next = vec![0.0f64; n];
                    for (i, &ri) in cur.iter().enumerate() {
                        if ri == 0.0 {
                            continue;
                        }
                        let w = ri * inv_deg[i];
                        next[i] += w;
                        for &j in g.neighbors(i) {
                            next[j] += w;
                        }
                    }
                    for (a, x) in acc.iter_mut().zip(&next) {
                        *a += ck * x;
                    }
                    cur = next;
                }
                let sum: f64 = acc.iter().sum();
                let row: Vec<(usize, f64)> = acc
                    .iter()
                    .enumerate()
                    .filter(|&(_, &w)| w != 0.0)
                    .map(|(j, &w)| (j, w / sum))
                    .collect();
                rows.push(row);
            }
        }
    }

    Ok(TransitionMatrix {
        scheme,
        n,
        rows,
        diffusion_order: if scheme == Scheme::Diff {
            diffusion_order
        } else {
            0
        },
        zero_rows,
    })
}

/// One message-passing step: `out = (1-alpha) * P h + alpha * h0`.
///
/// With `alpha = 0` the blend is skipped; with `alpha = 1` the result is `h0`
/// exactly, independent of the operator.
pub fn propagate(
    t: &TransitionMatrix,
    h: &DenseMatrix,
    residual_alpha: f64,
    h0: Option<&DenseMatrix>,
) -> Result<DenseMatrix> {
    if h.rows() != t.n {
        return Err(Error::DimensionError {
            context: "propagate",
            expected: (t.n, h.cols()),
            got: h.shape(),
        });
    }
    if residual_alpha > 0.0 {
        let h0 = h0.ok_or(Error::InvalidArgument("residual blend needs h0"))?;
        if h0.shape() != h.shape() {
            return Err(Error::DimensionError {
                context: "propagate h0",
                expected: h.shape(),
                got: h0.shape(),
            });
        }
        if residual_alpha == 1.0 {
            return Ok(h0.clone());
        }
    }

    let cols = h.cols();
    let mut out = DenseMatrix::zeros(t.n, cols);
    for u in 0..t.n {
        let orow = out.row_mut(u);
        for &(v, w) in &t.rows[u] {
            let hrow = h.row(v);
            for (o, &x) in orow.iter_mut().zip(hrow) {
                *o += w * x;
            }
        }
    }
    if residual_alpha > 0.0 {
        let h0 = h0.unwrap();
        out.scale(1.0 - residual_alpha);
        out.add_scaled(h0, residual_alpha)?;
    }
    Ok(out)
}

/// Adjoint step `P^T g`, used when differentiating through [`propagate`].
pub fn propagate_transpose(t: &TransitionMatrix, g: &DenseMatrix) -> Result<DenseMatrix> {
    if g.rows() != t.n {
        return Err(Error::DimensionError {
            context: "propagate_transpose",
            expected: (t.n, g.cols()),
            got: g.shape(),
        });
    }
    let cols = g.cols();
    let mut out = DenseMatrix::zeros(t.n, cols);
    for u in 0..t.n {
        let grow = g.row(u);
        for &(v, w) in &t.rows[u] {
            let orow = out.row_mut(v);
            for (o, &x) in orow.iter_mut().zip(grow) {
                *o += w * x;
            }
        }
    }
    Ok(out)
}

/// Inductive split: training may only see the subgraph induced by train ids.
#[derive(Debug, Clone)]
pub struct InductiveSplit {
    pub train_ids: Vec<usize>,
    pub valid_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    /// Same node count as the full graph, edges restricted to train-train.
    pub train_graph: Graph,
    pub full_graph: Graph,
}

pub fn inductive_split(
    g: &Graph,
    train_ids: &[usize],
    valid_ids: &[usize],
    test_ids: &[usize],
) -> Result<InductiveSplit> {
    let n = g.n();
    let mut seen = vec![0u8; n];
    for part in [train_ids, valid_ids, test_ids] {
        for &id in part {
            if id >= n {
                return Err(Error::InvalidArgument("split id out of range"));
            }
            if seen[id] != 0 {
                return Err(Error::SplitOverlap { node: id });
            }
            seen[id] = 1;
        }
    }
    let mut in_train = vec![false; n];
    for &id in train_ids {
        in_train[id] = true;
    }
    let train_edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .copied()
        .filter(|&(u, v)| in_train[u] && in_train[v])
        .collect();
    let train_graph = build_graph(n, &train_edges)?;
    let sorted = |ids: &[usize]| -> Vec<usize> {
        let mut v = ids.to_vec();
        v.sort_unstable();
        v
    };
    Ok(InductiveSplit {
        train_ids: sorted(train_ids),
        valid_ids: sorted(valid_ids),
        test_ids: sorted(test_ids),
        train_graph,
        full_graph: g.clone(),
    })
}

/// Structural perturbation applied to a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    /// Add `floor(ratio * |E|)` fresh random edges.
    AddNoise,
    /// Keep a uniform sample of `ceil(ratio * |E|)` edges.
    Sparsify,
}

/// Deterministic structural perturbation; saturates instead of failing when
/// the graph cannot absorb the requested number of new edges.
pub fn perturb(g: &Graph, op: Perturbation, ratio: f64, seed: u64) -> Result<Graph> {
    if ratio < 0.0 {
        return Err(Error::InvalidArgument("perturbation ratio must be >= 0"));
    }
    let mut rng = Rng::from_seed(seed);
    let edges = g.edges().to_vec();
    match op {
        Perturbation::AddNoise => {
            let n = g.n();
            let target = fmath::floor(ratio * edges.len() as f64) as usize;
            let possible = n * (n - 1) / 2 - edges.len();
            let target = target.min(possible);
            let mut set: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
            if target * 3 >= possible {
                // Dense regime: sample directly from the complement.
                let mut complement = Vec::with_capacity(possible);
                for u in 0..n {
                    for v in (u + 1)..n {
                        if !set.contains(&(u, v)) {
                            complement.push((u, v));
                        }
                    }
                }
                for idx in rng.sample_indices(complement.len(), target) {
                    set.insert(complement[idx]);
                }
            } else {
                let mut added = 0;
                while added < target {
                    let u = rng.below(n);
                    let v = rng.below(n);
                    if u == v {
                        continue;
                    }
                    let key = (u.min(v), u.max(v));
                    if set.insert(key) {
                        added += 1;
                    }
                }
            }
            let all: Vec<(usize, usize)> = set.into_iter().collect();
            build_graph(n, &all)
        }
        Perturbation::Sparsify => {
            if ratio > 1.0 {
                return Err(Error::InvalidArgument("sparsify ratio must be <= 1"));
            }
            let keep = fmath::ceil(ratio * edges.len() as f64) as usize;
            let kept: Vec<(usize, usize)> = rng
                .sample_indices(edges.len(), keep.min(edges.len()))
                .into_iter()
                .map(|i| edges[i])
                .collect();
            build_graph(g.n(), &kept)
        }
    }
}
