//! Feed-forward networks with optional message-passing injection.
//!
//! A [`Network`] is a plain stack of affine layers; where message passing
//! happens is not a property of the weights but of the [`MpPlacement`] handed
//! to [`forward`]. The same trained weights therefore serve as an MLP
//! (`MpMode::None`), a GCN-style model (`MpMode::PerLayer`), an SGC-style
//! model (`MpMode::Pre`), or an APPNP-style model (`MpMode::Post`).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::graph::{
    propagate, propagate_transpose, transition_matrix, Graph, InductiveSplit, Scheme,
    TransitionMatrix,
};
use crate::matrix::{xavier_init, DenseMatrix};
use crate::rng::Rng;

/// Elementwise nonlinearity applied to every layer but the last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
    Cos,
    Elu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => fmath::tanh(z),
            Activation::Cos => fmath::cos(z),
            Activation::Elu => {
                if z >= 0.0 {
                    z
                } else {
                    fmath::exp(z) - 1.0
                }
            }
        }
    }

    /// Derivative in terms of the pre-activation; `relu'(0) = 0` by the
    /// strict-indicator convention.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = fmath::tanh(z);
                1.0 - t * t
            }
            Activation::Cos => -fmath::sin(z),
            Activation::Elu => {
                if z >= 0.0 {
                    1.0
                } else {
                    fmath::exp(z)
                }
            }
        }
    }
}

/// One affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

/// Layer weights plus the activation and dropout they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub dropout_rate: f64,
}

impl Network {
    /// Xavier-initialized weights, zero biases. `dims` chains input through
    /// hidden sizes to the output dimension.
    pub fn xavier(
        dims: &[usize],
        activation: Activation,
        dropout_rate: f64,
        rng: &mut Rng,
    ) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let layers = dims
            .windows(2)
            .map(|w| Layer {
                weight: xavier_init(rng, w[0], w[1]),
                bias: vec![0.0; w[1]],
            })
            .collect();
        Network {
            layers,
            activation,
            dropout_rate,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.cols()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.layers.iter().map(|l| l.weight.rows()).collect();
        d.push(self.out_dim());
        d
    }
}

/// Where message passing is injected around the feed-forward stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpMode {
    None,
    /// One MP step before every FF layer.
    PerLayer,
    /// `num_mp` MP steps on the input features.
    Pre,
    /// `num_mp` MP steps on the output logits.
    Post,
}

pub const DEFAULT_DIFFUSION_ORDER: usize = 10;

/// Message-passing descriptor: mode, step count, scheme, residual blend.
///
/// The residual blend follows `x_k = (1-alpha) * MP(x_{k-1}) + alpha * x_0`
/// with `x_0` the input of the MP block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpPlacement {
    pub mode: MpMode,
    pub num_mp: usize,
    pub scheme: Scheme,
    pub residual_alpha: f64,
    pub diffusion_order: usize,
}

impl MpPlacement {
    pub fn none() -> Self {
        MpPlacement {
            mode: MpMode::None,
            num_mp: 0,
            scheme: Scheme::Sym,
            residual_alpha: 0.0,
            diffusion_order: DEFAULT_DIFFUSION_ORDER,
        }
    }

    pub fn per_layer(scheme: Scheme, residual_alpha: f64) -> Self {
        MpPlacement {
            mode: MpMode::PerLayer,
            num_mp: 0,
            scheme,
            residual_alpha,
            diffusion_order: DEFAULT_DIFFUSION_ORDER,
        }
    }

    pub fn pre(num_mp: usize, scheme: Scheme, residual_alpha: f64) -> Self {
        MpPlacement {
            mode: MpMode::Pre,
            num_mp,
            scheme,
            residual_alpha,
            diffusion_order: DEFAULT_DIFFUSION_ORDER,
        }
    }

    pub fn post(num_mp: usize, scheme: Scheme, residual_alpha: f64) -> Self {
        MpPlacement {
            mode: MpMode::Post,
            num_mp,
            scheme,
            residual_alpha,
            diffusion_order: DEFAULT_DIFFUSION_ORDER,
        }
    }

    pub fn needs_graph(&self) -> bool {
        self.mode != MpMode::None
    }

    pub fn build_operator(&self, g: &Graph) -> Result<TransitionMatrix> {
        transition_matrix(g, self.scheme, self.diffusion_order)
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Matrix actually multiplied into each layer's weights
    /// (after dropout and any per-layer MP step).
    layer_inputs: Vec<DenseMatrix>,
    pre_activations: Vec<DenseMatrix>,
    /// Inverted-scaling dropout masks, present only when training with p > 0.
    dropout_masks: Vec<Option<DenseMatrix>>,
    /// Retained only when the backward pass must differentiate through MP.
    tm: Option<TransitionMatrix>,
    placement: MpPlacement,
}

impl ForwardCache {
    pub fn pre_activations(&self) -> &[DenseMatrix] {
        &self.pre_activations
    }
}

fn affine(input: &DenseMatrix, layer: &Layer) -> Result<DenseMatrix> {
    let mut z = input.matmul(&layer.weight)?;
    for i in 0..z.rows() {
        let row = z.row_mut(i);
        for (zij, b) in row.iter_mut().zip(&layer.bias) {
            *zij += b;
        }
    }
    Ok(z)
}

fn mp_block(
    tm: &TransitionMatrix,
    h: DenseMatrix,
    num_mp: usize,
    alpha: f64,
) -> Result<DenseMatrix> {
    let h0 = if alpha > 0.0 { Some(h.clone()) } else { None };
    let mut cur = h;
    for _ in 0..num_mp {
        cur = propagate(tm, &cur, alpha, h0.as_ref())?;
    }
    Ok(cur)
}

/// Runs the network on all rows of `x`, injecting message passing per
/// `placement`. Builds the transition operator from `g`; use
/// [`forward_with_operator`] to reuse a prebuilt one inside loops.
pub fn forward(
    net: &Network,
    x: &DenseMatrix,
    g: Option<&Graph>,
    placement: &MpPlacement,
    training: bool,
    rng: &mut Rng,
) -> Result<(DenseMatrix, ForwardCache)> {
    let tm = match (placement.needs_graph(), g) {
        (false, _) => None,
        (true, None) => return Err(Error::MissingGraph),
        (true, Some(g)) => Some(placement.build_operator(g)?),
    };
    forward_with_operator(net, x, tm.as_ref(), placement, training, rng)
}

pub fn forward_with_operator(
    net: &Network,
    x: &DenseMatrix,
    tm: Option<&TransitionMatrix>,
    placement: &MpPlacement,
    training: bool,
    rng: &mut Rng,
) -> Result<(DenseMatrix, ForwardCache)> {
    if placement.needs_graph() && tm.is_none() {
        return Err(Error::MissingGraph);
    }
    if x.cols() != net.in_dim() {
        return Err(Error::DimensionError {
            context: "forward input",
            expected: (x.rows(), net.in_dim()),
            got: x.shape(),
        });
    }

    let num_layers = net.num_layers();
    let alpha = placement.residual_alpha;
    let mut h = x.clone();

    if placement.mode == MpMode::Pre {
        h = mp_block(tm.unwrap(), h, placement.num_mp, alpha)?;
    }

    let dropout = net.dropout_rate;
    let mut layer_inputs = Vec::with_capacity(num_layers);
    let mut pre_activations = Vec::with_capacity(num_layers);
    let mut dropout_masks = Vec::with_capacity(num_layers);

    for (idx, layer) in net.layers.iter().enumerate() {
        let mut cur = h;
        if training && dropout > 0.0 {
            let scale = 1.0 / (1.0 - dropout);
            let mask = DenseMatrix::from_fn(cur.rows(), cur.cols(), |_, _| {
                if rng.uniform() < dropout {
                    0.0
                } else {
                    scale
                }
            });
            for (c, m) in cur.data_mut().iter_mut().zip(mask.data()) {
                *c *= m;
            }
            dropout_masks.push(Some(mask));
        } else {
            dropout_masks.push(None);
        }
        if placement.mode == MpMode::PerLayer {
            cur = mp_block(tm.unwrap(), cur, 1, alpha)?;
        }
        let z = affine(&cur, layer)?;
        layer_inputs.push(cur);
        h = if idx + 1 < num_layers {
            z.map(|v| net.activation.apply(v))
        } else {
            z.clone()
        };
        pre_activations.push(z);
    }

    if placement.mode == MpMode::Post {
        h = mp_block(tm.unwrap(), h, placement.num_mp, alpha)?;
    }

    let keep_tm = matches!(placement.mode, MpMode::PerLayer | MpMode::Post);
    Ok((
        h,
        ForwardCache {
            layer_inputs,
            pre_activations,
            dropout_masks,
            tm: if keep_tm { tm.cloned() } else { None },
            placement: *placement,
        },
    ))
}

/// Loss over the masked nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    Squared,
}

/// Per-node supervision: class ids (possibly missing) or dense targets.
#[derive(Debug, Clone)]
pub enum Targets {
    Classes(Vec<Option<usize>>),
    Values(DenseMatrix),
}

impl Targets {
    pub fn class_of(&self, node: usize) -> Result<usize> {
        match self {
            Targets::Classes(c) => c
                .get(node)
                .copied()
                .flatten()
                .ok_or(Error::MissingLabels { node }),
            Targets::Values(_) => Err(Error::InvalidArgument("class lookup on regression targets")),
        }
    }
}

/// Per-layer gradient, same shapes as the layer parameters.
#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

fn backward_mp_block(
    tm: &TransitionMatrix,
    grad_out: DenseMatrix,
    num_mp: usize,
    alpha: f64,
) -> Result<DenseMatrix> {
    // Forward was x_k = (1-alpha) P x_{k-1} + alpha x_0; unwind the chain.
    let mut g = grad_out;
    let mut g0 = if alpha > 0.0 {
        Some(DenseMatrix::zeros(g.rows(), g.cols()))
    } else {
        None
    };
    for _ in 0..num_mp {
        if let Some(acc) = g0.as_mut() {
            acc.add_scaled(&g, alpha)?;
        }
        let mut back = propagate_transpose(tm, &g)?;
        if alpha > 0.0 {
            back.scale(1.0 - alpha);
        }
        g = back;
    }
    if let Some(acc) = g0 {
        g.add_scaled(&acc, 1.0)?;
    }
    Ok(g)
}

/// Average loss over `mask` plus an L2 penalty, and gradients for every layer.
pub fn loss_and_grad(
    net: &Network,
    logits: &DenseMatrix,
    cache: &ForwardCache,
    targets: &Targets,
    mask: &[usize],
    loss_kind: LossKind,
    weight_decay: f64,
) -> Result<(f64, Gradients)> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let c = logits.cols();
    let m = mask.len() as f64;
    let mut dlogits = DenseMatrix::zeros(logits.rows(), c);
    let mut loss = 0.0;

    match loss_kind {
        LossKind::CrossEntropy => {
            for &u in mask {
                let y = targets.class_of(u)?;
                if y >= c {
                    return Err(Error::InvalidArgument("class id exceeds output dim"));
                }
                let row = logits.row(u);
                let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let mut sum = 0.0;
                for &z in row {
                    sum += fmath::exp(z - max);
                }
                let lse = max + fmath::ln(sum);
                loss += (lse - row[y]) / m;
                let drow = dlogits.row_mut(u);
                for (j, &z) in row.iter().enumerate() {
                    let p = fmath::exp(z - lse);
                    drow[j] = (p - if j == y { 1.0 } else { 0.0 }) / m;
                }
            }
        }
        LossKind::Squared => {
            for &u in mask {
                let row = logits.row(u);
                let drow = dlogits.row_mut(u);
                match targets {
                    Targets::Classes(_) => {
                        let y = targets.class_of(u)?;
                        if y >= c {
                            return Err(Error::InvalidArgument("class id exceeds output dim"));
                        }
                        for (j, &z) in row.iter().enumerate() {
                            let t = if j == y { 1.0 } else { 0.0 };
                            loss += 0.5 * (z - t) * (z - t) / m;
                            drow[j] = (z - t) / m;
                        }
                    }
                    Targets::Values(v) => {
                        if v.cols() != c || v.rows() != logits.rows() {
                            return Err(Error::DimensionError {
                                context: "squared targets",
                                expected: logits.shape(),
                                got: v.shape(),
                            });
                        }
                        for (j, &z) in row.iter().enumerate() {
                            let t = v.get(u, j);
                            loss += 0.5 * (z - t) * (z - t) / m;
                            drow[j] = (z - t) / m;
                        }
                    }
                }
            }
        }
    }

    // Backward through a trailing MP block.
    let placement = &cache.placement;
    let mut dz = if placement.mode == MpMode::Post {
        let tm = cache.tm.as_ref().ok_or(Error::MissingGraph)?;
        backward_mp_block(tm, dlogits, placement.num_mp, placement.residual_alpha)?
    } else {
        dlogits
    };

    let num_layers = net.num_layers();
    let mut grads: Vec<Option<LayerGrad>> = (0..num_layers).map(|_| None).collect();
    for idx in (0..num_layers).rev() {
        let layer = &net.layers[idx];
        let input = &cache.layer_inputs[idx];
        let mut dw = input.matmul_tn(&dz)?;
        if weight_decay > 0.0 {
            dw.add_scaled(&layer.weight, weight_decay)?;
        }
        let mut db = vec![0.0f64; layer.bias.len()];
        for i in 0..dz.rows() {
            for (bj, &g) in db.iter_mut().zip(dz.row(i)) {
                *bj += g;
            }
        }
        if weight_decay > 0.0 {
            for (bj, &b) in db.iter_mut().zip(&layer.bias) {
                *bj += weight_decay * b;
            }
        }
        grads[idx] = Some(LayerGrad {
            weight: dw,
            bias: db,
        });

        if idx == 0 {
            break;
        }
        // Down to the previous layer's activation output.
        let mut dinput = dz.matmul_nt(&layer.weight)?;
        if placement.mode == MpMode::PerLayer {
            let tm = cache.tm.as_ref().ok_or(Error::MissingGraph)?;
            dinput = backward_mp_block(tm, dinput, 1, placement.residual_alpha)?;
        }
        if let Some(mask) = &cache.dropout_masks[idx] {
            for (d, &mv) in dinput.data_mut().iter_mut().zip(mask.data()) {
                *d *= mv;
            }
        }
        let prev_z = &cache.pre_activations[idx - 1];
        for (d, &z) in dinput.data_mut().iter_mut().zip(prev_z.data()) {
            *d *= net.activation.derivative(z);
        }
        dz = dinput;
    }

    if weight_decay > 0.0 {
        let mut reg = 0.0;
        for layer in &net.layers {
            reg += layer.weight.data().iter().map(|w| w * w).sum::<f64>();
            reg += layer.bias.iter().map(|b| b * b).sum::<f64>();
        }
        loss += 0.5 * weight_decay * reg;
    }

    Ok((
        loss,
        Gradients {
            layers: grads.into_iter().map(|g| g.unwrap()).collect(),
        },
    ))
}

/// Adam optimizer state; one moment pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<LayerGrad>,
    v: Vec<LayerGrad>,
    step: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        let zeros = |l: &Layer| LayerGrad {
            weight: DenseMatrix::zeros(l.weight.rows(), l.weight.cols()),
            bias: vec![0.0; l.bias.len()],
        };
        AdamState {
            m: net.layers.iter().map(zeros).collect(),
            v: net.layers.iter().map(zeros).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Standard Adam update with bias correction.
    pub fn apply(&mut self, net: &mut Network, grads: &Gradients, lr: f64) {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - fmath::powf(self.beta1, t);
        let bc2 = 1.0 - fmath::powf(self.beta2, t);
        for (idx, layer) in net.layers.iter_mut().enumerate() {
            let g = &grads.layers[idx];
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            for ((w, &gw), (mw, vw)) in layer.weight.data_mut().iter_mut().zip(g.weight.data()).zip(
                m.weight
                    .data_mut()
                    .iter_mut()
                    .zip(v.weight.data_mut().iter_mut()),
            ) {
                *mw = self.beta1 * *mw + (1.0 - self.beta1) * gw;
                *vw = self.beta2 * *vw + (1.0 - self.beta2) * gw * gw;
                let mhat = *mw / bc1;
                let vhat = *vw / bc2;
                *w -= lr * mhat / (fmath::sqrt(vhat) + self.eps);
            }
            for ((b, &gb), (mb, vb)) in layer
                .bias
                .iter_mut()
                .zip(&g.bias)
                .zip(m.bias.iter_mut().zip(v.bias.iter_mut()))
            {
                *mb = self.beta1 * *mb + (1.0 - self.beta1) * gb;
                *vb = self.beta2 * *vb + (1.0 - self.beta2) * gb * gb;
                let mhat = *mb / bc1;
                let vhat = *vb / bc2;
                *b -= lr * mhat / (fmath::sqrt(vhat) + self.eps);
            }
        }
    }
}

/// Index of the largest entry; ties break toward the smallest index.
pub fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Fraction of `ids` whose argmax prediction matches the class label.
pub fn masked_accuracy(logits: &DenseMatrix, targets: &Targets, ids: &[usize]) -> Result<f64> {
    if ids.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut hits = 0usize;
    for &u in ids {
        let y = targets.class_of(u)?;
        if argmax_row(logits.row(u)) == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / ids.len() as f64)
}

/// Architecture description used to initialize a fresh network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    /// Input dim, hidden sizes, output dim.
    pub dims: Vec<usize>,
    pub activation: Activation,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub loss: LossKind,
    pub seed: u64,
    /// Early stopping patience in epochs, on validation accuracy. `Some`
    /// returns the best-validation weights; `None` trains to the last epoch
    /// and returns the final weights.
    pub early_stop_patience: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainData<'a> {
    pub x: &'a DenseMatrix,
    pub targets: &'a Targets,
    pub split: &'a InductiveSplit,
}

/// Per-epoch records and the epoch whose weights were returned.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub valid_acc: Vec<f64>,
    pub best_epoch: Option<usize>,
}

/// Trains a fresh Xavier-initialized network with Adam.
///
/// `placement_train` sees only the split's train graph; `placement_valid`
/// runs on the full graph for model selection. Deterministic given the seed.
pub fn train(
    netcfg: &NetConfig,
    traincfg: &TrainConfig,
    data: &TrainData<'_>,
    placement_train: &MpPlacement,
    placement_valid: &MpPlacement,
) -> Result<(Network, History)> {
    let mut rng = Rng::from_seed(traincfg.seed);
    let mut net = Network::xavier(&netcfg.dims, netcfg.activation, netcfg.dropout, &mut rng);
    let split = data.split;

    let tm_train = if placement_train.needs_graph() {
        Some(placement_train.build_operator(&split.train_graph)?)
    } else {
        None
    };
    let tm_valid = if placement_valid.needs_graph() {
        Some(placement_valid.build_operator(&split.full_graph)?)
    } else {
        None
    };

    let mut adam = AdamState::new(&net);
    let mut history = History {
        train_loss: Vec::with_capacity(traincfg.epochs),
        valid_acc: Vec::with_capacity(traincfg.epochs),
        best_epoch: None,
    };
    let mut best: Option<(f64, Network)> = None;
    let mut since_best = 0usize;

    for epoch in 0..traincfg.epochs {
        let (logits, cache) = forward_with_operator(
            &net,
            data.x,
            tm_train.as_ref(),
            placement_train,
            true,
            &mut rng,
        )?;
        let (loss, grads) = loss_and_grad(
            &net,
            &logits,
            &cache,
            data.targets,
            &split.train_ids,
            traincfg.loss,
            traincfg.weight_decay,
        )?;
        adam.apply(&mut net, &grads, traincfg.learning_rate);
        history.train_loss.push(loss);

        if split.valid_ids.is_empty() {
            history.valid_acc.push(f64::NAN);
            continue;
        }
        let (vlogits, _) = forward_with_operator(
            &net,
            data.x,
            tm_valid.as_ref(),
            placement_valid,
            false,
            &mut rng,
        )?;
        let acc = masked_accuracy(&vlogits, data.targets, &split.valid_ids)?;
        history.valid_acc.push(acc);

        if let Some(patience) = traincfg.early_stop_patience {
            let improved = best.as_ref().is_none_or(|(b, _)| acc > *b);
            if improved {
                best = Some((acc, net.clone()));
                history.best_epoch = Some(epoch);
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    break;
                }
            }
        }
    }

    if let Some((_, snapshot)) = best {
        net = snapshot;
    }
    Ok((net, history))
}
