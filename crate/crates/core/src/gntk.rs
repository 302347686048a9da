//! Node-level neural tangent kernels and min-norm kernel regression.
//!
//! The kernel recursion mirrors the finite-width forward pass: a covariance
//! matrix is pushed through alternating aggregation and feed-forward steps.
//! Aggregation inside the kernel always uses random-walk averaging over the
//! closed neighborhood `N(i) + {i}` with `1/(deg_i * deg_j)` pair weights,
//! independent of the finite-width scheme choice. Feed-forward steps use the
//! closed-form ReLU Gaussian moments, scaled by [`FF_SCALE`] so the diagonal
//! covariance keeps its magnitude layer to layer; any positive scale rescales
//! the kernel uniformly and leaves argmax predictions unchanged.
//!
//! Only the two-feed-forward-layer kernels are oracle-validated against the
//! explicit feature map; deeper recursions are computed but flagged
//! experimental.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::graph::Graph;
use crate::matrix::{solve_spd, DenseMatrix, Ridge};
use crate::nn::{MpMode, MpPlacement};
use crate::rng::Rng;

/// Covariance scale applied per ReLU feed-forward step.
pub const FF_SCALE: f64 = 2.0;

/// Closed-form ReLU Gaussian moments for a 2x2 covariance block.
///
/// With `s_i = sqrt(l_ii)` and `cos t = l_12 / (s_1 s_2)` (clamped):
/// the first moment is `s_1 s_2 (sin t + (pi - t) cos t) / (2 pi)` and the
/// derivative moment is `(pi - t) / (2 pi)`. A zero variance on either side
/// collapses both moments to zero under the `step(0) = 0` convention.
pub fn relu_moments_closed(l11: f64, l12: f64, l22: f64) -> (f64, f64) {
    if l11 <= 0.0 || l22 <= 0.0 {
        return (0.0, 0.0);
    }
    let s1 = fmath::sqrt(l11);
    let s2 = fmath::sqrt(l22);
    let mut c = l12 / (s1 * s2);
    debug_assert!(c.abs() <= 1.0 + 1e-9, "correlation {c} outside unit range");
    c = c.clamp(-1.0, 1.0);
    let theta = fmath::acos(c);
    let pi = core::f64::consts::PI;
    let m1 = s1 * s2 * (fmath::sin(theta) + (pi - theta) * c) / (2.0 * pi);
    let m0 = (pi - theta) / (2.0 * pi);
    (m1, m0)
}

/// Kernel flavor, by which feature maps produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    MlpNtk,
    Gntk,
    Cross,
}

/// Symmetric PSD Gram matrix over a set of nodes.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub mat: DenseMatrix,
    pub kind: KernelKind,
    pub node_ids: Vec<usize>,
    /// Set when the recursion depth exceeds the oracle-validated two layers.
    pub experimental: bool,
}

impl KernelMatrix {
    /// Factorization-based PSD check: succeeds when `K + ridge I` is
    /// positive definite.
    pub fn check_psd(&self, ridge: Ridge) -> Result<()> {
        let zeros = vec![0.0; self.mat.rows()];
        solve_spd(&self.mat, &zeros, ridge).map(|_| ())
    }
}

/// Running covariance / kernel pair for the layer recursion.
#[derive(Debug, Clone)]
pub struct KernelState {
    /// Covariance of the current layer's outputs.
    pub sigma: DenseMatrix,
    /// Derivative covariance of the last feed-forward step.
    pub sigma_dot: Option<DenseMatrix>,
    /// Running tangent kernel.
    pub ntk: DenseMatrix,
}

impl KernelState {
    fn from_features(x: &DenseMatrix) -> Result<Self> {
        let gram = x.matmul_nt(x)?;
        Ok(KernelState {
            sigma: gram.clone(),
            sigma_dot: None,
            ntk: gram,
        })
    }

    /// Random-walk averaging over closed neighborhoods, applied to both the
    /// covariance and the running kernel.
    fn mp_step(&mut self, g: &Graph) -> Result<()> {
        self.sigma = neighborhood_average(g, &self.sigma);
        self.ntk = neighborhood_average(g, &self.ntk);
        Ok(())
    }

    /// One hidden ReLU layer: new covariances from the 2x2 blocks of the
    /// current covariance, then `ntk = ntk * sigma_dot + sigma`.
    fn ff_step(&mut self) {
        let n = self.sigma.rows();
        let mut new_sigma = DenseMatrix::zeros(n, n);
        let mut dot = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let (m1, m0) = relu_moments_closed(
                    self.sigma.get(i, i),
                    self.sigma.get(i, j),
                    self.sigma.get(j, j),
                );
                let s = FF_SCALE * m1;
                let d = FF_SCALE * m0;
                new_sigma.set(i, j, s);
                new_sigma.set(j, i, s);
                dot.set(i, j, d);
                dot.set(j, i, d);
            }
        }
        for ((t, &d), &s) in self
            .ntk
            .data_mut()
            .iter_mut()
            .zip(dot.data())
            .zip(new_sigma.data())
        {
            *t = *t * d + s;
        }
        self.sigma = new_sigma;
        self.sigma_dot = Some(dot);
    }
}

/// `out[i][j] = mean over closed neighborhoods of i and j of m[i'][j']`.
fn neighborhood_average(g: &Graph, m: &DenseMatrix) -> DenseMatrix {
    let n = m.rows();
    // Row pass then column pass.
    let mut half = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let inv = 1.0 / (g.neighbors(i).len() + 1) as f64;
        let dst = half.row_mut(i);
        for (d, &s) in dst.iter_mut().zip(m.row(i)) {
            *d = s;
        }
        for &nb in g.neighbors(i) {
            for (d, &s) in dst.iter_mut().zip(m.row(nb)) {
                *d += s;
            }
        }
        for d in dst.iter_mut() {
            *d *= inv;
        }
    }
    let mut out = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let inv = 1.0 / (g.neighbors(j).len() + 1) as f64;
        for i in 0..n {
            let mut acc = half.get(i, j);
            for &nb in g.neighbors(j) {
                acc += half.get(i, nb);
            }
            out.set(i, j, acc * inv);
        }
    }
    out
}

/// Node-level tangent kernel over `node_ids` for a network with
/// `num_ff_layers` feed-forward layers (the last one linear), with
/// aggregation steps positioned by `placement`.
///
/// `placement.mode == None` yields the plain MLP kernel and needs no graph.
/// Depths beyond two feed-forward layers are returned with the
/// `experimental` flag set.
pub fn gntk_node(
    x: &DenseMatrix,
    g: Option<&Graph>,
    placement: &MpPlacement,
    num_ff_layers: usize,
    node_ids: &[usize],
) -> Result<KernelMatrix> {
    if num_ff_layers < 1 {
        return Err(Error::InvalidArgument(
            "need at least one feed-forward layer",
        ));
    }
    let graph = match (placement.needs_graph(), g) {
        (false, _) => None,
        (true, None) => return Err(Error::MissingGraph),
        (true, Some(g)) => {
            if g.n() != x.rows() {
                return Err(Error::DimensionError {
                    context: "gntk features",
                    expected: (g.n(), x.cols()),
                    got: x.shape(),
                });
            }
            Some(g)
        }
    };

    let mut state = KernelState::from_features(x)?;
    if placement.mode == MpMode::Pre {
        let g = graph.unwrap();
        for _ in 0..placement.num_mp {
            state.mp_step(g)?;
        }
    }
    for _ in 0..num_ff_layers.saturating_sub(1) {
        if placement.mode == MpMode::PerLayer {
            state.mp_step(graph.unwrap())?;
        }
        state.ff_step();
    }
    // Linear head: one more aggregation where the placement puts one.
    match placement.mode {
        MpMode::PerLayer => state.mp_step(graph.unwrap())?,
        MpMode::Post => {
            let g = graph.unwrap();
            for _ in 0..placement.num_mp {
                state.mp_step(g)?;
            }
        }
        _ => {}
    }

    let m = node_ids.len();
    let mat = DenseMatrix::from_fn(m, m, |a, b| state.ntk.get(node_ids[a], node_ids[b]));
    Ok(KernelMatrix {
        mat,
        kind: if placement.mode == MpMode::None {
            KernelKind::MlpNtk
        } else {
            KernelKind::Gntk
        },
        node_ids: node_ids.to_vec(),
        experimental: num_ff_layers > 2,
    })
}

/// Aggregation context of a node for the explicit two-layer kernel: a list
/// of (aggregated feature vector, outer weight) pairs.
#[derive(Debug, Clone)]
pub struct NodeContext {
    pub outer: Vec<(Vec<f64>, f64)>,
}

/// Degenerate context of an isolated node: the node's own feature, weight 1.
pub fn node_context_mlp(x: &DenseMatrix, node: usize) -> NodeContext {
    NodeContext {
        outer: vec![(x.row(node).to_vec(), 1.0)],
    }
}

fn averaged_feature(x: &DenseMatrix, g: &Graph, node: usize) -> Vec<f64> {
    let d = x.cols();
    let mut s = x.row(node).to_vec();
    for &nb in g.neighbors(node) {
        for (si, &v) in s.iter_mut().zip(x.row(nb)) {
            *si += v;
        }
    }
    let inv = 1.0 / (g.neighbors(node).len() + 1) as f64;
    for si in s.iter_mut().take(d) {
        *si *= inv;
    }
    s
}

/// Full context of a node in a graph: the averaged features of its closed
/// neighborhood, each with outer weight `1/deg`.
pub fn node_context_gnn(x: &DenseMatrix, g: &Graph, node: usize) -> NodeContext {
    let inv = 1.0 / (g.neighbors(node).len() + 1) as f64;
    let mut outer = Vec::with_capacity(g.neighbors(node).len() + 1);
    outer.push((averaged_feature(x, g, node), inv));
    for &nb in g.neighbors(node) {
        outer.push((averaged_feature(x, g, nb), inv));
    }
    NodeContext { outer }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-layer tangent kernel between two aggregated feature vectors.
fn ntk2(u: &[f64], v: &[f64]) -> f64 {
    let (m1, m0) = relu_moments_closed(dot(u, u), dot(u, v), dot(v, v));
    FF_SCALE * m1 + dot(u, v) * FF_SCALE * m0
}

/// Explicit two-layer kernel between two contexts: the double sum of
/// pairwise kernels weighted by the outer aggregation weights. This is the
/// closed-form route the matrix recursion is checked against.
pub fn two_layer_kernel(a: &NodeContext, b: &NodeContext) -> f64 {
    let mut acc = 0.0;
    for (u, wu) in &a.outer {
        for (v, wv) in &b.outer {
            acc += wu * wv * ntk2(u, v);
        }
    }
    acc
}

/// Cross kernels between training rows seen through the degenerate (MLP)
/// feature map and a test node seen through the full-graph feature map.
/// Entry `i` is the kernel between row `i` of `x_train` and `test_id`.
pub fn cross_kernel_pmlp(
    x_train: &DenseMatrix,
    x_full: &DenseMatrix,
    g_full: &Graph,
    test_id: usize,
) -> Result<Vec<f64>> {
    if test_id >= g_full.n() {
        return Err(Error::InvalidArgument("test node outside the graph"));
    }
    if x_full.rows() != g_full.n() {
        return Err(Error::DimensionError {
            context: "cross kernel features",
            expected: (g_full.n(), x_full.cols()),
            got: x_full.shape(),
        });
    }
    let test_ctx = node_context_gnn(x_full, g_full, test_id);
    let mut out = Vec::with_capacity(x_train.rows());
    for i in 0..x_train.rows() {
        let ctx = node_context_mlp(x_train, i);
        out.push(two_layer_kernel(&ctx, &test_ctx));
    }
    Ok(out)
}

/// Plain two-layer kernel row between training rows and a raw feature vector.
pub fn cross_kernel_mlp(x_train: &DenseMatrix, x_test: &[f64]) -> Vec<f64> {
    (0..x_train.rows())
        .map(|i| ntk2(x_train.row(i), x_test))
        .collect()
}

/// Finite-width realization of the explicit two-layer feature map.
///
/// Each of the `width` sampled directions `w ~ N(0, I_d)` contributes a
/// `(d+1)`-sized block: the active aggregated features and their projections,
/// averaged over the closed neighborhood with weight `1/deg`. Blocks carry a
/// `sqrt(FF_SCALE / width)` factor so inner products of two maps converge to
/// [`gntk_node`] entries as the width grows.
pub fn lemma3_feature_map_mc(
    x: &DenseMatrix,
    g: &Graph,
    node_id: usize,
    width: usize,
    rng: &mut Rng,
) -> Vec<f64> {
    assert!(width >= 1);
    let d = x.cols();
    let inv_deg = 1.0 / (g.neighbors(node_id).len() + 1) as f64;
    // Aggregated features for the closed neighborhood.
    let mut aggregated: Vec<Vec<f64>> = vec![averaged_feature(x, g, node_id)];
    for &nb in g.neighbors(node_id) {
        aggregated.push(averaged_feature(x, g, nb));
    }
    let scale = fmath::sqrt(FF_SCALE / width as f64);
    let mut out = vec![0.0f64; width * (d + 1)];
    let mut w = vec![0.0f64; d];
    for k in 0..width {
        for wi in &mut w {
            *wi = rng.normal();
        }
        let block = &mut out[k * (d + 1)..(k + 1) * (d + 1)];
        for s in &aggregated {
            let z = dot(&w, s);
            if z > 0.0 {
                for (bi, &si) in block.iter_mut().zip(s.iter()) {
                    *bi += inv_deg * si;
                }
                block[d] += inv_deg * z;
            }
        }
        for bi in block.iter_mut() {
            *bi *= scale;
        }
    }
    out
}

/// Min-norm kernel regression coefficients `lambda = (K + ridge I)^-1 y`.
#[derive(Debug, Clone)]
pub struct KernelRegressor {
    pub coefficients: Vec<f64>,
    pub ridge: f64,
    pub node_ids: Vec<usize>,
}

pub fn kernel_fit(k_train: &KernelMatrix, y: &[f64], ridge: Ridge) -> Result<KernelRegressor> {
    let ridge_value = ridge.value(&k_train.mat);
    let coefficients = solve_spd(&k_train.mat, y, Ridge::Exact(ridge_value))?;
    Ok(KernelRegressor {
        coefficients,
        ridge: ridge_value,
        node_ids: k_train.node_ids.clone(),
    })
}

/// Prediction `lambda . cross` for one test point.
pub fn kernel_predict(reg: &KernelRegressor, cross: &[f64]) -> Result<f64> {
    if cross.len() != reg.coefficients.len() {
        return Err(Error::DimensionError {
            context: "kernel_predict",
            expected: (reg.coefficients.len(), 1),
            got: (cross.len(), 1),
        });
    }
    Ok(dot(&reg.coefficients, cross))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::matrix::mc_relu_moments;

    #[test]
    fn closed_moments_trivials() {
        let (m1, m0) = relu_moments_closed(1.0, 1.0, 1.0);
        assert!((m1 - 0.5).abs() < 1e-15);
        assert!((m0 - 0.5).abs() < 1e-15);

        let (m1, m0) = relu_moments_closed(1.0, -1.0, 1.0);
        assert!(m1.abs() < 1e-15);
        assert!(m0.abs() < 1e-15);

        let (m1, m0) = relu_moments_closed(1.0, 0.0, 1.0);
        assert!((m1 - 1.0 / (2.0 * core::f64::consts::PI)).abs() < 1e-15);
        assert!((m0 - 0.25).abs() < 1e-15);

        assert_eq!(relu_moments_closed(0.0, 0.0, 1.0), (0.0, 0.0));
    }

    #[test]
    fn closed_moments_match_monte_carlo() {
        let mut rng = Rng::from_seed(51);
        for trial in 0..5 {
            // Random pair of directions in R^3 defines a valid 2x2 block.
            let a: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let (m1, m0) = relu_moments_closed(dot(&a, &a), dot(&a, &b), dot(&b, &b));
            let mc = mc_relu_moments(&a, &b, 300_000, &mut rng);
            assert!(
                (m1 - mc.m1).abs() < 3.0 * mc.se1,
                "trial {trial}: m1 {m1} vs mc {} (se {})",
                mc.m1,
                mc.se1
            );
            assert!(
                (m0 - mc.m0).abs() < 3.0 * mc.se0,
                "trial {trial}: m0 {m0} vs mc {}",
                mc.m0
            );
        }
    }

    #[test]
    fn edgeless_gntk_is_mlp_ntk() {
        let mut rng = Rng::from_seed(52);
        let x = DenseMatrix::from_fn(5, 3, |_, _| rng.normal());
        let g = build_graph(5, &[]).unwrap();
        let ids: Vec<usize> = (0..5).collect();
        let mlp = gntk_node(&x, None, &MpPlacement::none(), 2, &ids).unwrap();
        assert_eq!(mlp.kind, KernelKind::MlpNtk);
        let placement = MpPlacement::per_layer(crate::graph::Scheme::Rw, 0.0);
        let gntk = gntk_node(&x, Some(&g), &placement, 2, &ids).unwrap();
        assert!(mlp.mat.max_abs_diff(&gntk.mat) < 1e-12);
    }

    #[test]
    fn two_node_path_kernel_is_symmetric_psd() {
        let x = DenseMatrix::from_vec(2, 2, vec![1.0, 0.2, -0.4, 0.9]).unwrap();
        let g = build_graph(2, &[(0, 1)]).unwrap();
        let placement = MpPlacement::per_layer(crate::graph::Scheme::Rw, 0.0);
        let k = gntk_node(&x, Some(&g), &placement, 2, &[0, 1]).unwrap();
        assert!(k.mat.is_symmetric(1e-12));
        k.check_psd(Ridge::Auto).unwrap();
        assert!(!k.experimental);
        let deep = gntk_node(&x, Some(&g), &placement, 3, &[0, 1]).unwrap();
        assert!(deep.experimental);
    }

    #[test]
    fn recursion_matches_explicit_two_layer_route() {
        // Same kernel via the matrix recursion and via the explicit
        // context formula.
        let mut rng = Rng::from_seed(53);
        let x = DenseMatrix::from_fn(6, 3, |_, _| rng.normal());
        let g = build_graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 5), (2, 5)]).unwrap();
        let ids: Vec<usize> = (0..6).collect();
        let placement = MpPlacement::per_layer(crate::graph::Scheme::Rw, 0.0);
        let k = gntk_node(&x, Some(&g), &placement, 2, &ids).unwrap();
        // The two routes compute the pair correlations in different orders;
        // acos amplifies that rounding near perfectly aligned pairs, so the
        // comparison is relative at 1e-7 rather than near machine precision.
        for i in 0..6 {
            for j in 0..6 {
                let want =
                    two_layer_kernel(&node_context_gnn(&x, &g, i), &node_context_gnn(&x, &g, j));
                assert!(
                    (k.mat.get(i, j) - want).abs() < 1e-7 * want.abs().max(1.0),
                    "({i},{j}): {} vs {want}",
                    k.mat.get(i, j)
                );
            }
        }
        // The MLP kernel agrees with the degenerate contexts too.
        let mlp = gntk_node(&x, None, &MpPlacement::none(), 2, &ids).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = two_layer_kernel(&node_context_mlp(&x, i), &node_context_mlp(&x, j));
                assert!((mlp.mat.get(i, j) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn feature_map_inner_products_approach_kernel() {
        let mut rng = Rng::from_seed(54);
        let x = DenseMatrix::from_fn(3, 2, |_, _| rng.normal());
        let g = build_graph(3, &[(0, 1), (1, 2)]).unwrap();
        let placement = MpPlacement::per_layer(crate::graph::Scheme::Rw, 0.0);
        let k = gntk_node(&x, Some(&g), &placement, 2, &[0, 1, 2]).unwrap();

        let width = 1 << 17;
        let maps: Vec<Vec<f64>> = (0..3)
            .map(|i| lemma3_feature_map_mc(&x, &g, i, width, &mut Rng::from_seed(1000)))
            .collect();
        for i in 0..3 {
            for j in 0..3 {
                let got = dot(&maps[i], &maps[j]);
                let want = k.mat.get(i, j);
                assert!(
                    (got - want).abs() <= 0.02 * want.abs().max(0.05),
                    "({i},{j}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn single_unit_node_kernel_two_ways() {
        // One isolated node with a unit feature: the recursion gives exactly
        // 2 (covariance 1 plus derivative term 1), and the wide feature map
        // agrees within a percent.
        let x = DenseMatrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let g = build_graph(1, &[]).unwrap();
        let placement = MpPlacement::per_layer(crate::graph::Scheme::Rw, 0.0);
        let k = gntk_node(&x, Some(&g), &placement, 2, &[0]).unwrap();
        assert!((k.mat.get(0, 0) - 2.0).abs() < 1e-12);

        let width = 1 << 20;
        let map = lemma3_feature_map_mc(&x, &g, 0, width, &mut Rng::from_seed(2));
        let got = dot(&map, &map);
        assert!((got - 2.0).abs() < 0.01 * 2.0, "{got}");
    }

    #[test]
    fn feature_map_edgeless_reduces_to_mlp_map() {
        let mut rng = Rng::from_seed(55);
        let x = DenseMatrix::from_fn(2, 3, |_, _| rng.normal());
        let g = build_graph(2, &[]).unwrap();
        let width = 1 << 14;
        let phi0 = lemma3_feature_map_mc(&x, &g, 0, width, &mut Rng::from_seed(7));
        // Hand-built degenerate map for node 0 with the same draws.
        let mut rng2 = Rng::from_seed(7);
        let d = 3;
        let scale = (FF_SCALE / width as f64).sqrt();
        let mut want = vec![0.0; width * (d + 1)];
        for k in 0..width {
            let w: Vec<f64> = (0..d).map(|_| rng2.normal()).collect();
            let z = dot(&w, x.row(0));
            if z > 0.0 {
                for j in 0..d {
                    want[k * (d + 1) + j] = scale * x.get(0, j);
                }
                want[k * (d + 1) + d] = scale * z;
            }
        }
        for (a, b) in phi0.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_is_two_homogeneous() {
        let mut rng = Rng::from_seed(56);
        let x = DenseMatrix::from_fn(4, 2, |_, _| rng.normal());
        let doubled = x.map(|v| 2.0 * v);
        let g = build_graph(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let ids: Vec<usize> = (0..4).collect();
        let placement = MpPlacement::per_layer(crate::graph::Scheme::Rw, 0.0);
        let k1 = gntk_node(&x, Some(&g), &placement, 2, &ids).unwrap();
        let k2 = gntk_node(&doubled, Some(&g), &placement, 2, &ids).unwrap();
        for (a, b) in k1.mat.data().iter().zip(k2.mat.data()) {
            assert!(
                (b - 4.0 * a).abs() < 1e-9 * a.abs().max(1.0),
                "{b} vs 4*{a}"
            );
        }

        // The finite-width map shows the same scaling.
        let width = 1 << 12;
        let m1 = lemma3_feature_map_mc(&x, &g, 0, width, &mut Rng::from_seed(5));
        let m2 = lemma3_feature_map_mc(&doubled, &g, 0, width, &mut Rng::from_seed(5));
        let r = dot(&m2, &m2) / dot(&m1, &m1);
        assert!((r - 4.0).abs() < 1e-9, "ratio {r}");
    }

    #[test]
    fn cross_kernel_isolated_test_node_is_mlp_row() {
        let mut rng = Rng::from_seed(57);
        let mut x = DenseMatrix::from_fn(4, 2, |_, _| rng.normal());
        // Node 3 isolated; nodes 0..2 form a triangle.
        let g = build_graph(4, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        x.set(3, 0, 0.7);
        x.set(3, 1, -0.3);
        let train = DenseMatrix::from_fn(3, 2, |i, j| x.get(i, j));
        let cross = cross_kernel_pmlp(&train, &x, &g, 3).unwrap();
        let mlp = cross_kernel_mlp(&train, x.row(3));
        for (a, b) in cross.iter().zip(&mlp) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_kernel_symmetric_configuration() {
        // Training node and test node with identical features and identical
        // aggregated neighborhoods: the cross value equals the GNTK diagonal.
        let x = DenseMatrix::from_vec(2, 2, vec![0.6, -0.8, 0.6, -0.8]).unwrap();
        let g = build_graph(2, &[]).unwrap();
        let train = DenseMatrix::from_vec(1, 2, vec![0.6, -0.8]).unwrap();
        let cross = cross_kernel_pmlp(&train, &x, &g, 1).unwrap();
        let placement = MpPlacement::per_layer(crate::graph::Scheme::Rw, 0.0);
        let k = gntk_node(&x, Some(&g), &placement, 2, &[1]).unwrap();
        assert!((cross[0] - k.mat.get(0, 0)).abs() < 1e-12);
    }

    #[test]
    fn fit_and_predict_basics() {
        let k = KernelMatrix {
            mat: DenseMatrix::identity(3),
            kind: KernelKind::MlpNtk,
            node_ids: vec![0, 1, 2],
            experimental: false,
        };
        let reg = kernel_fit(&k, &[2.0, -1.0, 0.5], Ridge::Exact(0.0)).unwrap();
        assert_eq!(reg.coefficients, vec![2.0, -1.0, 0.5]);

        // cross = column i of K reproduces y_i.
        let col0 = vec![1.0, 0.0, 0.0];
        assert!((kernel_predict(&reg, &col0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(kernel_predict(&reg, &[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(kernel_predict(&reg, &[1.0]).is_err());
    }

    #[test]
    fn duplicated_training_point_interpolates_with_ridge() {
        // 3-point system with an exact duplicate; tiny ridge keeps the solve
        // well-posed and the prediction at the duplicated point still matches.
        let mut rng = Rng::from_seed(58);
        let x = DenseMatrix::from_vec(3, 2, vec![1.0, 0.5, 1.0, 0.5, -0.3, 0.8]).unwrap();
        let _ = rng.normal();
        let ids: Vec<usize> = (0..3).collect();
        let k = gntk_node(&x, None, &MpPlacement::none(), 2, &ids).unwrap();
        let y = [1.5, 1.5, -0.7];
        let reg = kernel_fit(&k, &y, Ridge::Exact(1e-10)).unwrap();
        let cross: Vec<f64> = (0..3).map(|j| k.mat.get(j, 0)).collect();
        let pred = kernel_predict(&reg, &cross).unwrap();
        assert!((pred - 1.5).abs() < 1e-6, "pred {pred}");

        // The duplicate rows split the weight one merged point would carry:
        // compare against the hand-solvable deduplicated 2x2 system. The
        // individual coefficients are ill-conditioned, their sum is not.
        let dedup = DenseMatrix::from_vec(
            2,
            2,
            vec![
                k.mat.get(0, 0),
                k.mat.get(0, 2),
                k.mat.get(2, 0),
                k.mat.get(2, 2),
            ],
        )
        .unwrap();
        let merged = solve_spd(&dedup, &[1.5, -0.7], Ridge::Exact(0.0)).unwrap();
        let split_sum = reg.coefficients[0] + reg.coefficients[1];
        assert!(
            (split_sum - merged[0]).abs() < 1e-5,
            "{split_sum} vs {}",
            merged[0]
        );
        assert!((reg.coefficients[2] - merged[1]).abs() < 1e-5);
    }

    #[test]
    fn interpolation_on_training_nodes() {
        let mut rng = Rng::from_seed(59);
        let x = DenseMatrix::from_fn(5, 3, |_, _| rng.normal());
        let ids: Vec<usize> = (0..5).collect();
        let k = gntk_node(&x, None, &MpPlacement::none(), 2, &ids).unwrap();
        let y: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
        let ridge = 1e-10 * k.mat.trace() / 5.0;
        let reg = kernel_fit(&k, &y, Ridge::Exact(ridge)).unwrap();
        for i in 0..5 {
            let cross: Vec<f64> = (0..5).map(|j| k.mat.get(j, i)).collect();
            let pred = kernel_predict(&reg, &cross).unwrap();
            assert!((pred - y[i]).abs() < 1e-6, "node {i}: {pred} vs {}", y[i]);
        }
    }

    #[test]
    fn same_coefficients_for_mlp_and_pmlp_predictions() {
        // One fit with the MLP kernel serves both prediction paths; a refit
        // with the graph kernel lands on different coefficients.
        let mut rng = Rng::from_seed(60);
        let n = 8;
        let x = DenseMatrix::from_fn(n, 3, |_, _| rng.normal());
        let g = build_graph(
            n,
            &[
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 4),
                (4, 5),
                (5, 6),
                (6, 7),
                (0, 7),
                (1, 5),
            ],
        )
        .unwrap();
        let ids: Vec<usize> = (0..n).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let ridge = Ridge::Exact(1e-8);

        let k_mlp = gntk_node(&x, None, &MpPlacement::none(), 2, &ids).unwrap();
        let reg_mlp = kernel_fit(&k_mlp, &y, ridge).unwrap();

        let placement = MpPlacement::per_layer(crate::graph::Scheme::Rw, 0.0);
        let k_gnn = gntk_node(&x, Some(&g), &placement, 2, &ids).unwrap();
        let reg_gnn = kernel_fit(&k_gnn, &y, ridge).unwrap();

        let max_diff = reg_mlp
            .coefficients
            .iter()
            .zip(&reg_gnn.coefficients)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_diff > 1e-6, "refit coefficients unexpectedly equal");
    }
}
