//! Per-step training time comparison across models on a synthetic graph.

use std::time::Instant;

use pmlp_core::dataset::random_regularish_graph;
use pmlp_core::graph::inductive_split;
use pmlp_core::models::{make_model, ModelName};
use pmlp_core::nn::{
    forward_with_operator, loss_and_grad, Activation, AdamState, LossKind, NetConfig, Targets,
};
use pmlp_core::{DenseMatrix, Network, Rng, Scheme};
use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct BenchSettings {
    pub n: usize,
    pub d: usize,
    pub hidden: usize,
    pub avg_degree: f64,
    pub steps: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl BenchSettings {
    pub fn defaults() -> Self {
        BenchSettings {
            n: 20_000,
            d: 128,
            hidden: 64,
            avg_degree: 150.0,
            steps: 5,
            warmup: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BenchEntry {
    pub model: String,
    pub median_step_ms: f64,
    pub ratio_to_mlp: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub n: usize,
    pub d: usize,
    pub hidden: usize,
    pub avg_degree: f64,
    pub steps: usize,
    pub entries: Vec<BenchEntry>,
}

/// Median wall-clock time of one full training step (forward, loss,
/// gradients, optimizer update) after warmup.
pub fn median_step_ms(settings: &BenchSettings, model: ModelName) -> Result<f64> {
    let g = random_regularish_graph(settings.n, settings.avg_degree, settings.seed)?;
    let all: Vec<usize> = (0..settings.n).collect();
    let split = inductive_split(&g, &all, &[], &[])?;
    let mut rng = Rng::from_seed(settings.seed);
    let x = DenseMatrix::from_fn(settings.n, settings.d, |_, _| rng.normal());
    let targets = Targets::Classes((0..settings.n).map(|i| Some(i % 2)).collect());

    let netcfg = NetConfig {
        dims: vec![settings.d, settings.hidden, 2],
        activation: Activation::Relu,
        dropout: 0.5,
    };
    let spec = make_model(model, netcfg, 2, Scheme::Sym, None)?;
    let placement = spec.train_placement;
    let tm = if placement.needs_graph() {
        Some(placement.build_operator(&split.train_graph)?)
    } else {
        None
    };

    let mut net = Network::xavier(
        &[settings.d, settings.hidden, 2],
        Activation::Relu,
        0.5,
        &mut rng,
    );
    let mut adam = AdamState::new(&net);
    let mut times = Vec::with_capacity(settings.steps);
    for step in 0..settings.warmup + settings.steps {
        let t0 = Instant::now();
        let (logits, cache) =
            forward_with_operator(&net, &x, tm.as_ref(), &placement, true, &mut rng)?;
        let (_, grads) = loss_and_grad(
            &net,
            &logits,
            &cache,
            &targets,
            &split.train_ids,
            LossKind::CrossEntropy,
            5e-4,
        )?;
        adam.apply(&mut net, &grads, 0.01);
        if step >= settings.warmup {
            times.push(t0.elapsed().as_secs_f64() * 1e3);
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(times[times.len() / 2])
}

pub fn run_bench(settings: &BenchSettings, models: &[ModelName]) -> Result<BenchReport> {
    let mut entries = Vec::with_capacity(models.len());
    let mut mlp_ms = None;
    for &model in models {
        let ms = median_step_ms(settings, model)?;
        if model == ModelName::Mlp {
            mlp_ms = Some(ms);
        }
        entries.push((model, ms));
    }
    let entries = entries
        .into_iter()
        .map(|(model, ms)| BenchEntry {
            model: model.as_str().to_string(),
            median_step_ms: ms,
            ratio_to_mlp: mlp_ms.map(|base| ms / base),
        })
        .collect();
    Ok(BenchReport {
        n: settings.n,
        d: settings.d,
        hidden: settings.hidden,
        avg_degree: settings.avg_degree,
        steps: settings.steps,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_report_is_well_formed() {
        let settings = BenchSettings {
            n: 500,
            d: 8,
            hidden: 8,
            avg_degree: 5.0,
            steps: 1,
            warmup: 0,
            seed: 1,
        };
        let report = run_bench(&settings, &[ModelName::Mlp, ModelName::Gcn]).unwrap();
        assert_eq!(report.entries.len(), 2);
        assert!(report.entries.iter().all(|e| e.median_step_ms > 0.0));
        assert!(report.entries[1].ratio_to_mlp.unwrap() > 0.0);
        serde_json::to_string(&report).unwrap();
    }

    #[test]
    fn repeated_timing_is_stable() {
        let settings = BenchSettings {
            n: 2000,
            d: 16,
            hidden: 16,
            avg_degree: 8.0,
            steps: 5,
            warmup: 2,
            seed: 2,
        };
        let a = median_step_ms(&settings, ModelName::Mlp).unwrap();
        let b = median_step_ms(&settings, ModelName::Mlp).unwrap();
        let ratio = a.max(b) / a.min(b);
        assert!(ratio < 1.5, "run-to-run ratio {ratio}");
    }
}
