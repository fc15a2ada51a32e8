//! Command-line front end for `tabsynth`.
//!
//! Exit codes: 0 on success, 1 on a domain or configuration error, 2 on
//! unreadable or malformed input.

pub mod benchmark;
pub mod commands;
pub mod config;
pub mod failure;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tabsynth::metrics::DEFAULT_BINS;
use tabsynth::models::ModelKind;

use config::{RunConfig, TrainSettings};
pub use failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "tabsynth", version, about = "Differentially private tabular data synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write its bundle plus a per-batch log.
    Train(TrainArgs),
    /// Draw synthetic rows from a trained bundle.
    Sample(SampleArgs),
    /// Score a synthetic table against a real one.
    Evaluate(EvaluateArgs),
    /// Run a benchmark plan.
    Benchmark(BenchmarkArgs),
    /// Export PCA projection grids of a real and a synthetic table.
    Project(ProjectArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run configuration; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bundle path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Training log path (default: bundle path with `.log.csv`).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    pub model: Option<ModelKind>,
    /// Privacy budget; omit for an unprivatized run.
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// [default: 1e-5]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Noise multiplier; calibrated from the budget when omitted.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Per-sample clipping bound [default: 1.0]
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Diffusion steps.
    #[arg(long = "steps-T")]
    pub steps_t: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub max_batches: Option<u64>,
    /// Train on a seeded random subset of this many rows.
    #[arg(long)]
    pub subsample: Option<usize>,
}

impl TrainArgs {
    fn into_config(self) -> Result<RunConfig, Failure> {
        let file = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            data: self.data,
            schema: self.schema,
            model: self.model,
            seed: self.seed,
            out: self.out,
            log: self.log,
            subsample: self.subsample,
            training: TrainSettings {
                epsilon: self.epsilon,
                delta: self.delta,
                sigma: self.sigma,
                clip: self.clip,
                batch: self.batch,
                epochs: self.epochs,
                steps_t: self.steps_t,
                lr: self.lr,
                max_batches: self.max_batches,
                ..Default::default()
            },
        };
        Ok(file.overlay(flags))
    }
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: tabsynth::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Trained bundle.
    #[arg(long, visible_alias = "model")]
    pub bundle: PathBuf,
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub synth: PathBuf,
    /// Schema of the real table (inferred when omitted).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Report path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// JSON benchmark plan.
    #[arg(long, visible_alias = "config")]
    pub plan: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the plan's subsampling seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub synth: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Grid CSV path; the eigenbasis goes to the same stem with
    /// `.basis.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train(args) => commands::cmd_train(args.into_config()?),
        Command::Sample(a) => commands::cmd_sample(&a.bundle, a.rows, &a.out, a.seed),
        Command::Evaluate(a) => commands::cmd_evaluate(&a.real, &a.synth, a.schema.as_deref(), &a.out),
        Command::Benchmark(a) => {
            let mut plan = benchmark::BenchmarkPlan::load(&a.plan)?;
            if let Some(seed) = a.seed {
                plan.subsample_seed = seed;
            }
            let outcomes = benchmark::run_benchmark(&plan, &a.out)?;
            let failed = outcomes.iter().filter(|o| o.is_err()).count();
            println!("{} cells, {failed} failed; results in {}", outcomes.len(), a.out.join("results.csv").display());
            Ok(())
        }
        Command::Project(a) => commands::cmd_project(&a.real, &a.synth, a.schema.as_deref(), &a.out, a.bins),
    }
}
