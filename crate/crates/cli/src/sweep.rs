//! Cross-product experiment sweeps with long-format CSV output.

use std::fmt::Write as _;
use std::str::FromStr;

use pmlp_core::dataset::{apply_perturbation, labeled_fraction_split, Dataset};
use pmlp_core::graph::Perturbation;
use pmlp_core::models::ModelName;

use crate::error::{CliError, Result};
use crate::formats::parse_scheme;
use crate::run::{execute_run, RunResult, RunSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Layers,
    Hidden,
    Activation,
    Scheme,
    SplitFraction,
    Sparsify,
    Noise,
}

impl FromStr for SweepKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "layers" => Ok(SweepKind::Layers),
            "hidden" => Ok(SweepKind::Hidden),
            "activation" => Ok(SweepKind::Activation),
            "scheme" => Ok(SweepKind::Scheme),
            "split_fraction" => Ok(SweepKind::SplitFraction),
            "sparsify" => Ok(SweepKind::Sparsify),
            "noise" => Ok(SweepKind::Noise),
            other => Err(CliError::Config(format!("unknown sweep `{other}`"))),
        }
    }
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Layers => "layers",
            SweepKind::Hidden => "hidden",
            SweepKind::Activation => "activation",
            SweepKind::Scheme => "scheme",
            SweepKind::SplitFraction => "split_fraction",
            SweepKind::Sparsify => "sparsify",
            SweepKind::Noise => "noise",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub value: String,
    pub model: ModelName,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub sweep: SweepKind,
    pub cell: SweepCell,
    pub outcome: std::result::Result<RunResult, String>,
}

/// Seed offset separating data-perturbation randomness from training seeds.
const PERTURB_SEED_OFFSET: u64 = 1_000;
const SPLIT_SEED_OFFSET: u64 = 500;

fn prepare(dataset: &Dataset, kind: SweepKind, value: &str, seed: u64) -> Result<Dataset> {
    match kind {
        SweepKind::SplitFraction => {
            let fraction: f64 = value
                .parse()
                .map_err(|_| CliError::Config(format!("bad fraction `{value}`")))?;
            Ok(labeled_fraction_split(
                dataset,
                fraction,
                seed + SPLIT_SEED_OFFSET,
            )?)
        }
        SweepKind::Sparsify => {
            let ratio: f64 = value
                .parse()
                .map_err(|_| CliError::Config(format!("bad ratio `{value}`")))?;
            Ok(apply_perturbation(
                dataset,
                Perturbation::Sparsify,
                ratio,
                seed + PERTURB_SEED_OFFSET,
            )?)
        }
        SweepKind::Noise => {
            let ratio: f64 = value
                .parse()
                .map_err(|_| CliError::Config(format!("bad ratio `{value}`")))?;
            Ok(apply_perturbation(
                dataset,
                Perturbation::AddNoise,
                ratio,
                seed + PERTURB_SEED_OFFSET,
            )?)
        }
        _ => Ok(dataset.clone()),
    }
}

fn settings_for(
    base: &RunSettings,
    kind: SweepKind,
    value: &str,
    model: ModelName,
    seed: u64,
) -> Result<RunSettings> {
    let mut s = base.clone();
    s.model = model;
    s.seed = seed;
    match kind {
        SweepKind::Layers => {
            s.layers = value
                .parse()
                .map_err(|_| CliError::Config(format!("bad layer count `{value}`")))?;
        }
        SweepKind::Hidden => {
            s.hidden = value
                .parse()
                .map_err(|_| CliError::Config(format!("bad hidden size `{value}`")))?;
        }
        SweepKind::Activation => {
            s.activation = crate::formats::parse_activation(value)?;
        }
        SweepKind::Scheme => {
            s.scheme = parse_scheme(value)?;
        }
        _ => {}
    }
    Ok(s)
}

/// Runs the full (value, model, seed) cross-product. A failed cell becomes a
/// FAILED row; the sweep continues. With `parallel > 1` the cells run on a
/// thread pool; row order is deterministic either way.
pub fn run_sweep(
    dataset: &Dataset,
    base: &RunSettings,
    kind: SweepKind,
    values: &[String],
    models: &[ModelName],
    seeds: u64,
    parallel: usize,
) -> Vec<SweepRow> {
    let mut cells = Vec::new();
    for value in values {
        for &model in models {
            for seed in 0..seeds {
                cells.push(SweepCell {
                    value: value.clone(),
                    model,
                    seed,
                });
            }
        }
    }

    let run_cell = |cell: &SweepCell| -> std::result::Result<RunResult, String> {
        let prepared = prepare(dataset, kind, &cell.value, cell.seed).map_err(|e| e.to_string())?;
        let settings = settings_for(base, kind, &cell.value, cell.model, cell.seed)
            .map_err(|e| e.to_string())?;
        execute_run(&prepared, &settings).map_err(|e| e.to_string())
    };

    type Outcome = std::result::Result<RunResult, String>;
    let outcomes: Vec<Outcome> = if parallel <= 1 {
        cells.iter().map(run_cell).collect()
    } else {
        let workers = parallel.min(cells.len().max(1));
        let mut outcomes: Vec<Option<Outcome>> = vec![None; cells.len()];
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots: Vec<std::sync::Mutex<Option<Outcome>>> = (0..cells.len())
            .map(|_| std::sync::Mutex::new(None))
            .collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if idx >= cells.len() {
                        break;
                    }
                    let out = run_cell(&cells[idx]);
                    *slots[idx].lock().unwrap() = Some(out);
                });
            }
        });
        for (slot, out) in slots.into_iter().zip(outcomes.iter_mut()) {
            *out = slot.into_inner().unwrap();
        }
        outcomes.into_iter().map(|o| o.unwrap()).collect()
    };

    cells
        .into_iter()
        .zip(outcomes)
        .map(|(cell, outcome)| SweepRow {
            sweep: kind,
            cell,
            outcome,
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str =
    "sweep,value,model,seed,status,accuracy,train_loss_final,wallclock_train_ms,wallclock_infer_ms";

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        match &row.outcome {
            Ok(res) => {
                let loss = res
                    .train_loss_final
                    .map(|l| l.to_string())
                    .unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},OK,{},{},{},{}",
                    row.sweep.as_str(),
                    row.cell.value,
                    row.cell.model,
                    row.cell.seed,
                    res.accuracy,
                    loss,
                    res.wallclock_train_ms,
                    res.wallclock_infer_ms
                );
            }
            Err(msg) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},FAILED,,,,{}",
                    row.sweep.as_str(),
                    row.cell.value,
                    row.cell.model,
                    row.cell.seed,
                    msg.replace(',', ";")
                );
            }
        }
    }
    out
}

/// One parsed sweep row: sweep kind, value, model, seed, status.
pub type CsvRow = (String, String, String, u64, String);

/// Minimal reader for the sweep CSV, used by round-trip checks.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config("empty csv".into()))?;
    if header != SWEEP_CSV_HEADER {
        return Err(CliError::Config("unexpected csv header".into()));
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 9 {
            return Err(CliError::Config(format!("short csv row `{line}`")));
        }
        rows.push((
            fields[0].to_string(),
            fields[1].to_string(),
            fields[2].to_string(),
            fields[3]
                .parse()
                .map_err(|_| CliError::Config(format!("bad seed in `{line}`")))?,
            fields[4].to_string(),
        ));
    }
    Ok(rows)
}
