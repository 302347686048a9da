//! The named model family over a shared feed-forward backbone.
//!
//! Every model is a pair of placements: one used in training, one at
//! inference. MLP uses none; the PMLP variants train without message passing
//! and add it only at inference; the GNN counterparts use the same placement
//! on both sides. The `*_RES` variants blend each MP step with the block
//! input, and `SGC_RESINF` turns the blend on only at inference.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::InductiveSplit;
use crate::graph::Scheme;
use crate::matrix::DenseMatrix;
use crate::nn::{
    argmax_row, forward, masked_accuracy, train, History, MpMode, MpPlacement, NetConfig, Network,
    Targets, TrainConfig, TrainData,
};
use crate::rng::Rng;

/// CLI-facing model vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelName {
    Mlp,
    PmlpGcn,
    PmlpSgc,
    PmlpApp,
    Gcn,
    Sgc,
    Appnp,
    SgcRes,
    SgcResInf,
    AppnpRes,
    PmlpSgcRes,
    PmlpAppRes,
}

impl ModelName {
    pub const ALL: [ModelName; 12] = [
        ModelName::Mlp,
        ModelName::PmlpGcn,
        ModelName::PmlpSgc,
        ModelName::PmlpApp,
        ModelName::Gcn,
        ModelName::Sgc,
        ModelName::Appnp,
        ModelName::SgcRes,
        ModelName::SgcResInf,
        ModelName::AppnpRes,
        ModelName::PmlpSgcRes,
        ModelName::PmlpAppRes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Mlp => "MLP",
            ModelName::PmlpGcn => "PMLP_GCN",
            ModelName::PmlpSgc => "PMLP_SGC",
            ModelName::PmlpApp => "PMLP_APP",
            ModelName::Gcn => "GCN",
            ModelName::Sgc => "SGC",
            ModelName::Appnp => "APPNP",
            ModelName::SgcRes => "SGC_RES",
            ModelName::SgcResInf => "SGC_RESINF",
            ModelName::AppnpRes => "APPNP_RES",
            ModelName::PmlpSgcRes => "PMLP_SGC_RES",
            ModelName::PmlpAppRes => "PMLP_APP_RES",
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelName::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or(Error::UnknownModel {
                name: s.to_string(),
            })
    }
}

/// A model as a (train placement, inference placement) pair over one backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: ModelName,
    pub train_placement: MpPlacement,
    pub infer_placement: MpPlacement,
    pub netcfg: NetConfig,
}

impl ModelSpec {
    /// Trains without message passing but infers with it.
    pub fn is_pmlp(&self) -> bool {
        self.train_placement.mode == MpMode::None && self.infer_placement.mode != MpMode::None
    }

    /// Placement used for validation during training. Models that train
    /// without message passing also validate without it, which keeps their
    /// whole model-selection loop graph-free.
    pub fn valid_placement(&self) -> MpPlacement {
        self.train_placement
    }
}

const DEFAULT_RES_ALPHA: f64 = 0.1;

/// Assembles a [`ModelSpec`] from the model vocabulary.
///
/// `alpha` overrides the residual blend where the model has one; plain SGC
/// and APPNP run with `alpha = 0` unless an explicit value is given, and the
/// `*_RES` variants default to `0.1`.
pub fn make_model(
    name: ModelName,
    netcfg: NetConfig,
    num_mp: usize,
    scheme: Scheme,
    alpha: Option<f64>,
) -> Result<ModelSpec> {
    if let Some(a) = alpha {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidArgument("residual alpha must be in [0, 1]"));
        }
    }
    let needs_steps = !matches!(name, ModelName::Mlp | ModelName::Gcn | ModelName::PmlpGcn);
    if needs_steps && num_mp < 1 {
        return Err(Error::InvalidArgument("num_mp must be >= 1"));
    }
    let plain = alpha.unwrap_or(0.0);
    let res = alpha.unwrap_or(DEFAULT_RES_ALPHA);
    let none = MpPlacement::none();

    let (train_placement, infer_placement) = match name {
        ModelName::Mlp => (none, none),
        ModelName::PmlpGcn => (none, MpPlacement::per_layer(scheme, 0.0)),
        ModelName::Gcn => {
            let p = MpPlacement::per_layer(scheme, 0.0);
            (p, p)
        }
        ModelName::PmlpSgc => (none, MpPlacement::pre(num_mp, scheme, plain)),
        ModelName::Sgc => {
            let p = MpPlacement::pre(num_mp, scheme, plain);
            (p, p)
        }
        ModelName::PmlpApp => (none, MpPlacement::post(num_mp, scheme, plain)),
        ModelName::Appnp => {
            let p = MpPlacement::post(num_mp, scheme, plain);
            (p, p)
        }
        ModelName::SgcRes => {
            let p = MpPlacement::pre(num_mp, scheme, res);
            (p, p)
        }
        ModelName::SgcResInf => (
            MpPlacement::pre(num_mp, scheme, 0.0),
            MpPlacement::pre(num_mp, scheme, res),
        ),
        ModelName::AppnpRes => {
            let p = MpPlacement::post(num_mp, scheme, res);
            (p, p)
        }
        ModelName::PmlpSgcRes => (none, MpPlacement::pre(num_mp, scheme, res)),
        ModelName::PmlpAppRes => (none, MpPlacement::post(num_mp, scheme, res)),
    };

    Ok(ModelSpec {
        name,
        train_placement,
        infer_placement,
        netcfg,
    })
}

/// Trains the spec's backbone; message passing in training comes from the
/// spec's train placement and sees only the split's train graph.
pub fn train_model(
    spec: &ModelSpec,
    traincfg: &TrainConfig,
    data: &TrainData<'_>,
) -> Result<(Network, History)> {
    train(
        &spec.netcfg,
        traincfg,
        data,
        &spec.train_placement,
        &spec.valid_placement(),
    )
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Argmax prediction for every node in the graph.
    pub predictions: Vec<usize>,
}

/// Runs inference with the spec's inference placement on the full graph and
/// scores accuracy over the split's test ids.
pub fn evaluate(
    spec: &ModelSpec,
    net: &Network,
    x: &DenseMatrix,
    targets: &Targets,
    split: &InductiveSplit,
) -> Result<Evaluation> {
    let graph = if spec.infer_placement.needs_graph() {
        Some(&split.full_graph)
    } else {
        None
    };
    let mut rng = Rng::from_seed(0);
    let (logits, _) = forward(net, x, graph, &spec.infer_placement, false, &mut rng)?;
    let predictions: Vec<usize> = (0..logits.rows())
        .map(|u| argmax_row(logits.row(u)))
        .collect();
    let accuracy = masked_accuracy(&logits, targets, &split.test_ids)?;
    Ok(Evaluation {
        accuracy,
        predictions,
    })
}
