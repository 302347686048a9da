use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pmlp_cli::bench::{run_bench, BenchSettings};
use pmlp_cli::error::{CliError, Result};
use pmlp_cli::extrapolate::{parse_wiring, run_extrapolation};
use pmlp_cli::formats::{parse_activation, parse_scheme};
use pmlp_cli::manifest::resolve_dataset;
use pmlp_cli::ntk::{run_ntk, write_ntk_outputs, NtkMode};
use pmlp_cli::run::{execute_run_with_network, RunSettings};
use pmlp_cli::sweep::{rows_to_csv, run_sweep, SweepKind};
use pmlp_core::matrix::Ridge;
use pmlp_core::models::ModelName;

/// Node-level prediction experiments: shared-weight MLP/PMLP/GNN training,
/// kernel regression, extrapolation probes, and timing benches.
#[derive(Parser)]
#[command(name = "pmlp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct HyperArgs {
    /// Number of feed-forward layers.
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Hidden layer width.
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    /// Activation: RELU, TANH, COS, or ELU.
    #[arg(long, default_value = "RELU")]
    activation: String,
    /// Transition scheme: SYM, NO_LOOP, RW, or DIFF.
    #[arg(long, default_value = "SYM")]
    scheme: String,
    /// Residual blend for SGC/APPNP-style models.
    #[arg(long)]
    alpha: Option<f64>,
    /// Message-passing steps for PRE/POST placements.
    #[arg(long, default_value_t = 2)]
    num_mp: usize,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, default_value_t = 5e-4)]
    weight_decay: f64,
    /// Early-stopping patience in epochs; 0 disables early stopping.
    #[arg(long, default_value_t = 50)]
    patience: usize,
}

impl HyperArgs {
    fn settings(&self, model: ModelName, seed: u64) -> Result<RunSettings> {
        Ok(RunSettings {
            model,
            layers: self.layers,
            hidden: self.hidden,
            activation: parse_activation(&self.activation)?,
            scheme: parse_scheme(&self.scheme)?,
            alpha: self.alpha,
            num_mp: self.num_mp,
            seed,
            epochs: self.epochs,
            learning_rate: self.lr,
            dropout: self.dropout,
            weight_decay: self.weight_decay,
            patience: if self.patience == 0 {
                None
            } else {
                Some(self.patience)
            },
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write a result record.
    Train {
        /// Dataset manifest path or a `csbm:` spec.
        #[arg(long)]
        dataset: String,
        /// Model name, e.g. MLP, PMLP_GCN, GCN, SGC, APPNP, SGC_RESINF.
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        hyper: HyperArgs,
        /// Output JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the trained weights as a checkpoint.
        #[arg(long)]
        save_model: Option<PathBuf>,
    },
    /// Run a (value, model, seed) cross-product and write long-format CSV.
    Sweep {
        #[arg(long)]
        dataset: String,
        /// One of layers, hidden, activation, scheme, split_fraction,
        /// sparsify, noise.
        #[arg(long)]
        sweep: String,
        /// Comma-separated sweep values.
        #[arg(long)]
        values: String,
        /// Comma-separated model names.
        #[arg(long)]
        models: String,
        /// Number of seeds (0..seeds).
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Worker threads for independent cells.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[command(flatten)]
        hyper: HyperArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact infinite-width kernels and per-test-node predictions.
    Ntk {
        #[arg(long)]
        dataset: String,
        /// mlp, gntk, or pmlp-cross.
        #[arg(long)]
        mode: String,
        /// Ridge value, or `auto` for 1e-8 * trace / n.
        #[arg(long, default_value = "auto")]
        ridge: String,
        /// Output prefix for kernel, sidecar, and prediction files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Directional slope probes of a wide trained network.
    Extrapolate {
        /// isolated, star:K, or complete:K.
        #[arg(long)]
        wiring: String,
        #[arg(long, default_value_t = 4096)]
        width: usize,
        /// Comma-separated scale grid.
        #[arg(long, default_value = "10,20,50,100")]
        t_grid: String,
        #[arg(long, default_value_t = 8)]
        seeds: u64,
        /// Cosine between neighbor features and the probe direction.
        #[arg(long, default_value_t = 0.6)]
        neighbor_cos: f64,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        #[arg(long, default_value_t = 0.2)]
        lr: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step training time across models on a synthetic graph.
    Bench {
        #[arg(long, default_value_t = 20000)]
        n: usize,
        #[arg(long, default_value_t = 128)]
        d: usize,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long, default_value_t = 150.0)]
        avg_degree: f64,
        #[arg(long, default_value = "MLP,GCN")]
        models: String,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_models(spec: &str) -> Result<Vec<ModelName>> {
    spec.split(',')
        .map(|s| s.trim().parse::<ModelName>().map_err(CliError::from))
        .collect()
}

fn write_or_print(out: Option<&PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
                }
            }
            std::fs::write(path, content).map_err(|e| CliError::io(path, e))
        }
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            dataset,
            model,
            seed,
            hyper,
            out,
            save_model,
        } => {
            let model: ModelName = model.parse()?;
            let dataset = resolve_dataset(&dataset)?;
            let settings = hyper.settings(model, seed)?;
            let (result, net) = execute_run_with_network(&dataset, &settings)?;
            if let Some(path) = save_model {
                pmlp_cli::formats::write_checkpoint(&path, &net)?;
            }
            let text = serde_json::to_string_pretty(&result)
                .map_err(|e| CliError::Config(e.to_string()))?;
            write_or_print(out.as_ref(), &text)
        }
        Command::Sweep {
            dataset,
            sweep,
            values,
            models,
            seeds,
            parallel,
            hyper,
            out,
        } => {
            let kind: SweepKind = sweep.parse()?;
            let models = parse_models(&models)?;
            if models.is_empty() {
                return Err(CliError::Config("no models given".into()));
            }
            let values: Vec<String> = values
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            if values.is_empty() {
                return Err(CliError::Config("no sweep values given".into()));
            }
            let dataset = resolve_dataset(&dataset)?;
            let base = hyper.settings(models[0], 0)?;
            let rows = run_sweep(&dataset, &base, kind, &values, &models, seeds, parallel);
            write_or_print(out.as_ref(), &rows_to_csv(&rows))
        }
        Command::Ntk {
            dataset,
            mode,
            ridge,
            out,
        } => {
            let mode: NtkMode = mode.parse()?;
            let ridge = if ridge.eq_ignore_ascii_case("auto") {
                Ridge::Auto
            } else {
                Ridge::Exact(
                    ridge
                        .parse()
                        .map_err(|_| CliError::Config(format!("bad ridge `{ridge}`")))?,
                )
            };
            let dataset = resolve_dataset(&dataset)?;
            let outcome = run_ntk(&dataset, mode, ridge)?;
            write_ntk_outputs(&out, &outcome)
        }
        Command::Extrapolate {
            wiring,
            width,
            t_grid,
            seeds,
            neighbor_cos,
            steps,
            lr,
            out,
        } => {
            let wiring = parse_wiring(&wiring)?;
            let mut cfg = pmlp_core::extrapolation::FiniteProbeConfig::standard();
            cfg.width = width;
            cfg.gd_steps = steps;
            cfg.gd_lr = lr;
            cfg.t_grid = t_grid
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Config(format!("bad t value `{t}`")))
                })
                .collect::<Result<_>>()?;
            let report = run_extrapolation(&cfg, wiring, neighbor_cos, seeds)?;
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Config(e.to_string()))?;
            write_or_print(out.as_ref(), &text)
        }
        Command::Bench {
            n,
            d,
            hidden,
            avg_degree,
            models,
            steps,
            out,
        } => {
            let models = parse_models(&models)?;
            let settings = BenchSettings {
                n,
                d,
                hidden,
                avg_degree,
                steps,
                warmup: 3,
                seed: 0,
            };
            let report = run_bench(&settings, &models)?;
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Config(e.to_string()))?;
            write_or_print(out.as_ref(), &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let mut line = err.to_string();
            if let CliError::Core(pmlp_core::Error::FactorizationError { .. }) = &err {
                line.push_str("; retry with a larger --ridge");
            }
            eprintln!("pmlp: {line}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
