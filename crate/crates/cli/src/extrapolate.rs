//! Slope-probe experiments over seeds, serialized to JSON.

use pmlp_core::extrapolation::{
    neighbors_at_cosine, probe_trained_network, train_probe_network, FiniteProbeConfig,
    ProbeReport, ProbeWiring,
};
use serde::Serialize;

use crate::error::{CliError, Result};

pub fn parse_wiring(s: &str) -> Result<ProbeWiring> {
    let lower = s.to_ascii_lowercase();
    if lower == "isolated" {
        return Ok(ProbeWiring::Isolated);
    }
    if let Some(k) = lower.strip_prefix("star:") {
        let k: usize = k
            .parse()
            .map_err(|_| CliError::Config(format!("bad star arity in `{s}`")))?;
        return Ok(ProbeWiring::Star(k));
    }
    if let Some(k) = lower.strip_prefix("complete:") {
        let k: usize = k
            .parse()
            .map_err(|_| CliError::Config(format!("bad clique arity in `{s}`")))?;
        return Ok(ProbeWiring::Complete(k));
    }
    Err(CliError::Config(format!(
        "unknown wiring `{s}` (expected isolated, star:K, or complete:K)"
    )))
}

pub fn wiring_tag(w: ProbeWiring) -> String {
    match w {
        ProbeWiring::Isolated => "isolated".into(),
        ProbeWiring::Star(k) => format!("star:{k}"),
        ProbeWiring::Complete(k) => format!("complete:{k}"),
    }
}

#[derive(Debug, Serialize)]
pub struct ProbeRecord {
    pub probe_id: String,
    pub wiring: String,
    pub seed: u64,
    pub t_grid: Vec<f64>,
    pub slopes_mlp: Vec<f64>,
    pub slopes_pmlp: Vec<f64>,
    pub c_v_hat: f64,
    pub coeff_factor: f64,
    pub alpha_min: f64,
    pub alpha_min_raw: f64,
    pub d_max: usize,
    pub deviations: Vec<f64>,
    pub ratio_at_tmax: f64,
}

#[derive(Debug, Serialize)]
pub struct ExtrapolateReport {
    pub wiring: String,
    pub width: usize,
    pub seeds: u64,
    pub neighbor_cos: f64,
    pub mean_ratio: f64,
    pub coeff_factor: f64,
    pub probes: Vec<ProbeRecord>,
}

fn record(report: ProbeReport, wiring: ProbeWiring) -> ProbeRecord {
    ProbeRecord {
        probe_id: format!("{}-seed{}", wiring_tag(wiring), report.seed),
        wiring: wiring_tag(wiring),
        seed: report.seed,
        t_grid: report.t_grid,
        slopes_mlp: report.slopes_mlp,
        slopes_pmlp: report.slopes_pmlp,
        c_v_hat: report.c_v_hat,
        coeff_factor: report.coeff_factor,
        alpha_min: report.alpha_min,
        alpha_min_raw: report.alpha_min_raw,
        d_max: report.d_max,
        deviations: report.deviations,
        ratio_at_tmax: report.ratio_at_tmax,
    }
}

/// Runs the probe for each seed; one training per seed serves the wiring.
pub fn run_extrapolation(
    cfg: &FiniteProbeConfig,
    wiring: ProbeWiring,
    neighbor_cos: f64,
    seeds: u64,
) -> Result<ExtrapolateReport> {
    let neighbors = neighbors_at_cosine(&cfg.direction, wiring.num_neighbors(), neighbor_cos)?;
    let mut probes = Vec::with_capacity(seeds as usize);
    for seed in 0..seeds {
        let (net, x_train) = train_probe_network(cfg, seed)?;
        let report = probe_trained_network(cfg, &net, &x_train, wiring, &neighbors, seed)?;
        probes.push(record(report, wiring));
    }
    let mean_ratio = probes.iter().map(|p| p.ratio_at_tmax).sum::<f64>() / probes.len() as f64;
    let coeff_factor = probes.first().map(|p| p.coeff_factor).unwrap_or(1.0);
    Ok(ExtrapolateReport {
        wiring: wiring_tag(wiring),
        width: cfg.width,
        seeds,
        neighbor_cos,
        mean_ratio,
        coeff_factor,
        probes,
    })
}
