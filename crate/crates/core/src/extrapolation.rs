//! Directional extrapolation probes.
//!
//! A probe sends a synthetic test node along a ray `t * v` and tracks the
//! discrete slope `(f(x + dt v) - f(x)) / dt` of a predictor as `t` grows.
//! The test node is wired into a scene graph as an appendage: the training
//! nodes stay untouched across wirings, so any change in the slope series is
//! an inference-time effect of the wiring alone. Far out on the ray both the
//! plain and the message-passing forward linearize; the ratio of their
//! limiting slopes is the degree factor computed by
//! [`degree_slope_factor`], and the speed of settling is bounded through
//! the neighborhood's degree and feature alignment in [`settling_rate_bound`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::gntk::{cross_kernel_mlp, cross_kernel_pmlp, KernelRegressor};
use crate::graph::{build_graph, Graph, Scheme};
use crate::matrix::DenseMatrix;
use crate::nn::{forward, MpPlacement, Network};
use crate::rng::Rng;

/// How the synthetic test node is attached to the scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeWiring {
    /// No edges; the probe degenerates to the plain predictor.
    Isolated,
    /// Test node connected to `k` fresh neighbors, which have no other edges.
    Star(usize),
    /// Test node in a clique with `k` fresh neighbors.
    Complete(usize),
}

impl ProbeWiring {
    pub fn num_neighbors(self) -> usize {
        match self {
            ProbeWiring::Isolated => 0,
            ProbeWiring::Star(k) | ProbeWiring::Complete(k) => k,
        }
    }
}

/// Direction, scale grid, and step size of one probe.
#[derive(Debug, Clone)]
pub struct ExtrapolationProbe {
    /// Unit direction of the ray.
    pub direction: Vec<f64>,
    /// Strictly increasing positive scales.
    pub t_grid: Vec<f64>,
    pub delta_t: f64,
    pub wiring: ProbeWiring,
}

impl ExtrapolationProbe {
    pub fn new(
        direction: Vec<f64>,
        t_grid: Vec<f64>,
        delta_t: f64,
        wiring: ProbeWiring,
    ) -> Result<Self> {
        let norm = fmath::sqrt(direction.iter().map(|v| v * v).sum());
        if fmath::abs(norm - 1.0) > 1e-12 {
            return Err(Error::InvalidArgument(
                "probe direction must be unit length",
            ));
        }
        if delta_t <= 0.0 {
            return Err(Error::InvalidArgument("delta_t must be positive"));
        }
        if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] <= 0.0 {
            return Err(Error::InvalidArgument(
                "t grid must be increasing and positive",
            ));
        }
        Ok(ExtrapolationProbe {
            direction,
            t_grid,
            delta_t,
            wiring,
        })
    }
}

/// Scene graph holding training nodes (isolated), wiring neighbors, and the
/// test node as the last row.
#[derive(Debug, Clone)]
pub struct ProbeScene {
    pub graph: Graph,
    /// Features for all scene nodes; the test row is a placeholder updated
    /// per prediction.
    pub features: DenseMatrix,
    pub test_node: usize,
}

/// Assembles the scene for a wiring. `neighbor_features` must have one row
/// per wiring neighbor.
pub fn build_probe_scene(
    x_train: &DenseMatrix,
    neighbor_features: &DenseMatrix,
    wiring: ProbeWiring,
) -> Result<ProbeScene> {
    let k = wiring.num_neighbors();
    if neighbor_features.rows() != k || (k > 0 && neighbor_features.cols() != x_train.cols()) {
        return Err(Error::DimensionError {
            context: "probe neighbor features",
            expected: (k, x_train.cols()),
            got: neighbor_features.shape(),
        });
    }
    let n_train = x_train.rows();
    let test = n_train + k;
    let mut edges = Vec::new();
    match wiring {
        ProbeWiring::Isolated => {}
        ProbeWiring::Star(_) => {
            for j in 0..k {
                edges.push((test, n_train + j));
            }
        }
        ProbeWiring::Complete(_) => {
            for j in 0..k {
                edges.push((test, n_train + j));
                for l in (j + 1)..k {
                    edges.push((n_train + j, n_train + l));
                }
            }
        }
    }
    let graph = build_graph(test + 1, &edges)?;
    let d = x_train.cols();
    let features = DenseMatrix::from_fn(test + 1, d, |i, j| {
        if i < n_train {
            x_train.get(i, j)
        } else if i < test {
            neighbor_features.get(i - n_train, j)
        } else {
            0.0
        }
    });
    Ok(ProbeScene {
        graph,
        features,
        test_node: test,
    })
}

/// The degree factor relating the limiting slope with message passing to the
/// plain limiting slope: the sum of `1 / (deg_test * deg_i)` over the test
/// node's closed neighborhood.
pub fn degree_slope_factor(g: &Graph, test_node: usize) -> f64 {
    let d0 = (g.neighbors(test_node).len() + 1) as f64;
    let mut acc = 1.0 / (d0 * d0);
    for &nb in g.neighbors(test_node) {
        let di = (g.neighbors(nb).len() + 1) as f64;
        acc += 1.0 / (d0 * di);
    }
    acc
}

/// Anything that can score the test node as its feature moves along the ray.
pub trait ProbePredictor {
    fn predict(&self, x0: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMode {
    /// Plain forward on the test feature alone.
    Mlp,
    /// Message-passing forward over the scene graph.
    Pmlp,
}

/// Finite-width predictor: a trained network evaluated in either mode.
/// Message passing uses random-walk averaging before every layer, matching
/// the averaged-aggregation setting of the slope theory.
pub struct NetProbePredictor<'a> {
    pub net: &'a Network,
    pub scene: &'a ProbeScene,
    pub mode: ProbeMode,
}

impl ProbePredictor for NetProbePredictor<'_> {
    fn predict(&self, x0: &[f64]) -> Result<f64> {
        let mut rng = Rng::from_seed(0);
        let value = match self.mode {
            ProbeMode::Mlp => {
                let x = DenseMatrix::from_vec(1, x0.len(), x0.to_vec())?;
                let (logits, _) =
                    forward(self.net, &x, None, &MpPlacement::none(), false, &mut rng)?;
                logits.get(0, 0)
            }
            ProbeMode::Pmlp => {
                let mut x = self.scene.features.clone();
                x.row_mut(self.scene.test_node).copy_from_slice(x0);
                let placement = MpPlacement::per_layer(Scheme::Rw, 0.0);
                let (logits, _) = forward(
                    self.net,
                    &x,
                    Some(&self.scene.graph),
                    &placement,
                    false,
                    &mut rng,
                )?;
                logits.get(self.scene.test_node, 0)
            }
        };
        Ok(value)
    }
}

/// Appends the constant bias coordinate the slope analysis carries on every
/// feature vector.
pub fn augment_with_bias(x: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(x.rows(), x.cols() + 1, |i, j| {
        if j < x.cols() {
            x.get(i, j)
        } else {
            1.0
        }
    })
}

/// Infinite-width predictor: min-norm kernel regression coefficients applied
/// through the matching cross kernel. The regressor must have been fit on
/// bias-augmented training features; raw features come in and the bias
/// coordinate is appended here.
pub struct KernelProbePredictor<'a> {
    pub reg: &'a KernelRegressor,
    pub x_train_aug: &'a DenseMatrix,
    pub scene: &'a ProbeScene,
    pub mode: ProbeMode,
}

impl ProbePredictor for KernelProbePredictor<'_> {
    fn predict(&self, x0: &[f64]) -> Result<f64> {
        let cross = match self.mode {
            ProbeMode::Mlp => {
                let mut aug = x0.to_vec();
                aug.push(1.0);
                cross_kernel_mlp(self.x_train_aug, &aug)
            }
            ProbeMode::Pmlp => {
                let mut x = self.scene.features.clone();
                x.row_mut(self.scene.test_node).copy_from_slice(x0);
                let aug = augment_with_bias(&x);
                cross_kernel_pmlp(
                    self.x_train_aug,
                    &aug,
                    &self.scene.graph,
                    self.scene.test_node,
                )?
            }
        };
        crate::gntk::kernel_predict(self.reg, &cross)
    }
}

/// Discrete slopes of the predictor along the probe ray, one per grid point.
pub fn probe_slopes(
    predictor: &dyn ProbePredictor,
    probe: &ExtrapolationProbe,
) -> Result<Vec<f64>> {
    let d = probe.direction.len();
    let mut slopes = Vec::with_capacity(probe.t_grid.len());
    for &t in &probe.t_grid {
        let mut x0 = vec![0.0; d];
        let mut x1 = vec![0.0; d];
        for j in 0..d {
            x0[j] = t * probe.direction[j];
            x1[j] = (t + probe.delta_t) * probe.direction[j];
        }
        let f0 = predictor.predict(&x0)?;
        let f1 = predictor.predict(&x1)?;
        if !f0.is_finite() || !f1.is_finite() {
            return Err(Error::NumericalOverflow { t });
        }
        slopes.push((f1 - f0) / probe.delta_t);
    }
    Ok(slopes)
}

/// Slope series of one probe in both modes, with the quantities the slope
/// limits are stated in.
#[derive(Debug, Clone)]
pub struct SlopeSeries {
    pub t_grid: Vec<f64>,
    pub slopes_pmlp: Vec<f64>,
    pub slopes_mlp: Vec<f64>,
    /// Plain-mode slope at the largest scale; the estimator of the limiting
    /// linear coefficient.
    pub limit_mlp: f64,
    pub coeff_factor: f64,
    /// Minimum neighborhood feature alignment, clamped to `[0, 1]`.
    pub alpha_min: f64,
    /// Same quantity before clamping; negative alignments do occur.
    pub alpha_min_raw: f64,
    pub d_max: usize,
}

impl SlopeSeries {
    pub fn from_probes(
        t_grid: Vec<f64>,
        slopes_pmlp: Vec<f64>,
        slopes_mlp: Vec<f64>,
        coeff_factor: f64,
        alignment: &AlignmentStats,
    ) -> Self {
        let limit_mlp = *slopes_mlp.last().expect("nonempty grid");
        SlopeSeries {
            t_grid,
            slopes_pmlp,
            slopes_mlp,
            limit_mlp,
            coeff_factor,
            alpha_min: alignment.alpha_min,
            alpha_min_raw: alignment.alpha_min_raw,
            d_max: alignment.d_max,
        }
    }
}

/// Per-scale deviation `|s(t) / (c_v * factor) - 1|` of the message-passing
/// slopes from their predicted limit.
pub fn deviation_series(series: &SlopeSeries) -> Vec<f64> {
    let denom = series.limit_mlp * series.coeff_factor;
    series
        .slopes_pmlp
        .iter()
        .map(|s| fmath::abs(s / denom - 1.0))
        .collect()
}

/// Neighborhood alignment statistics entering the rate bound.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentStats {
    pub alpha_min: f64,
    pub alpha_min_raw: f64,
    pub d_max: usize,
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = fmath::sqrt(a.iter().map(|v| v * v).sum());
    let nb = fmath::sqrt(b.iter().map(|v| v * v).sum());
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

/// Minimum cosine between each closed-neighborhood member's feature and the
/// average of its neighbors, plus the maximum closed degree. Nodes without
/// neighbors count as perfectly aligned.
pub fn alignment_stats(
    g: &Graph,
    features: &DenseMatrix,
    test_node: usize,
) -> Result<AlignmentStats> {
    let mut members = vec![test_node];
    members.extend_from_slice(g.neighbors(test_node));
    let mut alpha_min_raw = 1.0f64;
    let mut d_max = 0usize;
    for &i in &members {
        d_max = d_max.max(g.neighbors(i).len() + 1);
        if features.row(i).iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateFeature { node: i });
        }
        let nbs = g.neighbors(i);
        if nbs.is_empty() {
            continue;
        }
        let d = features.cols();
        let mut avg = vec![0.0; d];
        for &nb in nbs {
            for (a, &v) in avg.iter_mut().zip(features.row(nb)) {
                *a += v;
            }
        }
        for a in avg.iter_mut() {
            *a /= nbs.len() as f64;
        }
        let alpha = cosine(features.row(i), &avg).ok_or(Error::DegenerateFeature { node: i })?;
        alpha_min_raw = alpha_min_raw.min(alpha);
    }
    Ok(AlignmentStats {
        alpha_min: alpha_min_raw.clamp(0.0, 1.0),
        alpha_min_raw,
        d_max,
    })
}

/// Rate bound `(1 + (d_max - 1) sqrt(1 - alpha_min^2)) / t` for the slope
/// settling of the message-passing predictor.
#[derive(Debug, Clone, Copy)]
pub struct SettlingRateBound {
    pub bound: f64,
    pub alpha_min: f64,
    pub alpha_min_raw: f64,
    pub d_max: usize,
}

pub fn settling_rate_bound(
    g: &Graph,
    features: &DenseMatrix,
    test_node: usize,
    t: f64,
) -> Result<SettlingRateBound> {
    let stats = alignment_stats(g, features, test_node)?;
    let bound = (1.0
        + (stats.d_max as f64 - 1.0) * fmath::sqrt(1.0 - stats.alpha_min * stats.alpha_min))
        / t;
    Ok(SettlingRateBound {
        bound,
        alpha_min: stats.alpha_min,
        alpha_min_raw: stats.alpha_min_raw,
        d_max: stats.d_max,
    })
}

/// Protocol for the finite-width slope experiments: a wide two-layer ReLU
/// network trained by plain full-batch gradient descent on squared loss.
///
/// Gradient descent (rather than an adaptive optimizer) keeps the trained
/// network close to its linearization, which is the regime the slope limits
/// are stated in; the width controls the residual deviation.
#[derive(Debug, Clone)]
pub struct FiniteProbeConfig {
    pub train_n: usize,
    pub feature_dim: usize,
    pub width: usize,
    pub gd_steps: usize,
    pub gd_lr: f64,
    pub t_grid: Vec<f64>,
    pub delta_t: f64,
    pub direction: Vec<f64>,
}

impl FiniteProbeConfig {
    /// Reference protocol: 48 training points in 4 dimensions, width 4096,
    /// 400 descent steps, scales 10 through 100 with unit step.
    pub fn standard() -> Self {
        let mut direction = vec![1.0, 0.4, -0.3, 0.2];
        let norm = fmath::sqrt(direction.iter().map(|v| v * v).sum());
        for v in direction.iter_mut() {
            *v /= norm;
        }
        FiniteProbeConfig {
            train_n: 48,
            feature_dim: 4,
            width: 4096,
            gd_steps: 400,
            gd_lr: 0.2,
            t_grid: vec![10.0, 20.0, 50.0, 100.0],
            delta_t: 1.0,
            direction,
        }
    }
}

/// Orthonormal directions perpendicular to `v`, built by projecting basis
/// vectors and Gram-Schmidt.
pub fn perpendicular_directions(v: &[f64], k: usize) -> Vec<Vec<f64>> {
    let d = v.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for axis in 0..d {
        if basis.len() == k {
            break;
        }
        let mut cand = vec![0.0; d];
        cand[axis] = 1.0;
        let proj: f64 = cand.iter().zip(v).map(|(a, b)| a * b).sum();
        for (c, &vi) in cand.iter_mut().zip(v) {
            *c -= proj * vi;
        }
        for prev in &basis {
            let p: f64 = cand.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (c, &pi) in cand.iter_mut().zip(prev) {
                *c -= p * pi;
            }
        }
        let norm = fmath::sqrt(cand.iter().map(|x| x * x).sum());
        if norm > 1e-9 {
            for c in cand.iter_mut() {
                *c /= norm;
            }
            basis.push(cand);
        }
    }
    basis
}

/// Unit neighbor features at a prescribed cosine to the probe direction,
/// spread over distinct perpendicular components.
pub fn neighbors_at_cosine(direction: &[f64], k: usize, cos: f64) -> Result<DenseMatrix> {
    if !(-1.0..=1.0).contains(&cos) {
        return Err(Error::InvalidArgument("cosine must be in [-1, 1]"));
    }
    let perp = perpendicular_directions(direction, k.min(direction.len() - 1).max(1));
    if perp.is_empty() {
        return Err(Error::InvalidArgument("need at least 2 feature dimensions"));
    }
    let sin = fmath::sqrt(1.0 - cos * cos);
    let d = direction.len();
    Ok(DenseMatrix::from_fn(k, d, |i, j| {
        let u = &perp[i % perp.len()];
        // Alternate the perpendicular sign so repeated directions differ.
        let sign = if (i / perp.len()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        cos * direction[j] + sign * sin * u[j]
    }))
}

/// Full-batch gradient descent on squared loss for the probe backbone.
pub fn train_probe_network(cfg: &FiniteProbeConfig, seed: u64) -> Result<(Network, DenseMatrix)> {
    use crate::graph::inductive_split;
    use crate::nn::{loss_and_grad, LossKind, Targets};

    let mut rng = Rng::from_seed(seed);
    let d = cfg.feature_dim;
    let x = DenseMatrix::from_fn(cfg.train_n, d, |_, _| 0.7 * rng.normal());
    let u1 = &perpendicular_directions(&cfg.direction, 1)[0];
    let mut yvals = DenseMatrix::zeros(cfg.train_n, 1);
    for i in 0..cfg.train_n {
        let row = x.row(i);
        let along: f64 = row.iter().zip(&cfg.direction).map(|(a, b)| a * b).sum();
        let across: f64 = row.iter().zip(u1).map(|(a, b)| a * b).sum();
        yvals.set(i, 0, along + 0.5 * fmath::tanh(2.0 * across));
    }
    let targets = Targets::Values(yvals);

    let mut net = Network::xavier(
        &[d, cfg.width, 1],
        crate::nn::Activation::Relu,
        0.0,
        &mut rng,
    );
    let mask: Vec<usize> = (0..cfg.train_n).collect();
    let edgeless = build_graph(cfg.train_n, &[])?;
    let _split = inductive_split(&edgeless, &mask, &[], &[])?;
    for _ in 0..cfg.gd_steps {
        let (logits, cache) = forward(&net, &x, None, &MpPlacement::none(), true, &mut rng)?;
        let (_, grads) = loss_and_grad(
            &net,
            &logits,
            &cache,
            &targets,
            &mask,
            LossKind::Squared,
            0.0,
        )?;
        for (layer, grad) in net.layers.iter_mut().zip(&grads.layers) {
            layer
                .weight
                .add_scaled(&grad.weight, -cfg.gd_lr)
                .expect("shapes match");
            for (b, g) in layer.bias.iter_mut().zip(&grad.bias) {
                *b -= cfg.gd_lr * g;
            }
        }
    }
    Ok((net, x))
}

/// One finite-width probe: slopes in both modes and the derived quantities.
#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub seed: u64,
    pub t_grid: Vec<f64>,
    pub slopes_mlp: Vec<f64>,
    pub slopes_pmlp: Vec<f64>,
    /// Plain-mode slope at the largest scale.
    pub c_v_hat: f64,
    pub coeff_factor: f64,
    pub alpha_min: f64,
    pub alpha_min_raw: f64,
    pub d_max: usize,
    pub deviations: Vec<f64>,
    /// `slopes_pmlp / slopes_mlp` at the largest scale.
    pub ratio_at_tmax: f64,
}

/// Trains a probe backbone and runs the slope probe in both modes over the
/// given wiring. Training data depends only on the seed, never on the wiring.
pub fn run_finite_width_probe(
    cfg: &FiniteProbeConfig,
    wiring: ProbeWiring,
    neighbor_features: &DenseMatrix,
    seed: u64,
) -> Result<ProbeReport> {
    let (net, x_train) = train_probe_network(cfg, seed)?;
    probe_trained_network(cfg, &net, &x_train, wiring, neighbor_features, seed)
}

/// Probes an already-trained backbone; lets one training serve many wirings.
pub fn probe_trained_network(
    cfg: &FiniteProbeConfig,
    net: &Network,
    x_train: &DenseMatrix,
    wiring: ProbeWiring,
    neighbor_features: &DenseMatrix,
    seed: u64,
) -> Result<ProbeReport> {
    let scene = build_probe_scene(x_train, neighbor_features, wiring)?;
    let probe = ExtrapolationProbe::new(
        cfg.direction.clone(),
        cfg.t_grid.clone(),
        cfg.delta_t,
        wiring,
    )?;

    let slopes_mlp = probe_slopes(
        &NetProbePredictor {
            net,
            scene: &scene,
            mode: ProbeMode::Mlp,
        },
        &probe,
    )?;
    let slopes_pmlp = probe_slopes(
        &NetProbePredictor {
            net,
            scene: &scene,
            mode: ProbeMode::Pmlp,
        },
        &probe,
    )?;

    let coeff_factor = degree_slope_factor(&scene.graph, scene.test_node);
    let mut feats = scene.features.clone();
    feats
        .row_mut(scene.test_node)
        .copy_from_slice(&cfg.direction);
    let alignment = alignment_stats(&scene.graph, &feats, scene.test_node)?;
    let series = SlopeSeries::from_probes(
        cfg.t_grid.clone(),
        slopes_pmlp.clone(),
        slopes_mlp.clone(),
        coeff_factor,
        &alignment,
    );
    let deviations = deviation_series(&series);
    let last = cfg.t_grid.len() - 1;
    let ratio_at_tmax = slopes_pmlp[last] / slopes_mlp[last];
    Ok(ProbeReport {
        seed,
        t_grid: cfg.t_grid.clone(),
        slopes_mlp,
        slopes_pmlp,
        c_v_hat: series.limit_mlp,
        coeff_factor,
        alpha_min: series.alpha_min,
        alpha_min_raw: series.alpha_min_raw,
        d_max: series.d_max,
        deviations,
        ratio_at_tmax,
    })
}
