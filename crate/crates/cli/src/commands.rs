use std::path::{Path, PathBuf};

use tabsynth::data::{encode, load_table, write_table, RawTable};
use tabsynth::metrics::{evaluate, pca_projection_histogram, EvalOptions, FidelityReport, RunInfo};
use tabsynth::models::{train_diffusion, train_dpwgan, ModelBundle, ModelKind, Phase, TrainingLog};

use crate::config::{is_recommended_batch, load_dataset, resolve, ModelPlan, RunConfig, TrainSettings};
use crate::failure::{write_file, Failure};

/// Trains `kind` on `table`. Emits a warning on stderr for batch sizes
/// outside the powers of two from 64 to 2048.
pub fn train_table(
    table: &RawTable,
    kind: ModelKind,
    settings: &TrainSettings,
    seed: u64,
) -> Result<(ModelBundle, TrainingLog), Failure> {
    let plan = resolve(kind, settings, table.n_rows())?;
    let batch = match &plan {
        ModelPlan::Diffusion(c) => c.batch_size,
        ModelPlan::Gan(c) => c.batch_size,
    };
    if !is_recommended_batch(batch) {
        eprintln!("warning: batch size {batch} is not a power of two in 64..=2048");
    }
    let data = encode(table)?;
    let out = match &plan {
        ModelPlan::Diffusion(c) => train_diffusion(&data, c, seed)?,
        ModelPlan::Gan(c) => train_dpwgan(&data, c, seed)?,
    };
    Ok(out)
}

/// `model.json` → `model.log.csv`.
pub fn default_log_path(bundle: &Path) -> PathBuf {
    bundle.with_extension("log.csv")
}

pub fn cmd_train(config: RunConfig) -> Result<(), Failure> {
    let data = config.data.as_deref().ok_or_else(|| Failure::input("no dataset given (--data)"))?;
    let kind = config.model.ok_or_else(|| Failure::input("no model kind given (--model)"))?;
    let out = config.out.as_deref().ok_or_else(|| Failure::input("no output path given (--out)"))?;
    let seed = config.seed.unwrap_or(0);
    // Validate the budget before touching the data.
    if let Some(eps) = config.training.epsilon {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Failure::domain(format!("epsilon must be positive and finite, got {eps}")));
        }
    }
    let table = load_dataset(data, config.schema.as_deref(), config.subsample, seed)?;
    let (bundle, log) = train_table(&table, kind, &config.training, seed)?;
    bundle.save(out)?;
    let log_path = config.log.clone().unwrap_or_else(|| default_log_path(out));
    write_file(&log_path, log.to_csv())?;
    let privacy = match bundle.delta {
        Some(delta) => format!("epsilon={:.6} delta={delta:e}", bundle.epsilon_spent),
        None => "unprivatized".to_owned(),
    };
    println!(
        "trained {kind} on {} rows: {} batches, {privacy}, halt={}",
        table.n_rows(),
        log.entries.iter().filter(|e| e.phase != Phase::Generator).count(),
        log.halt.as_str()
    );
    Ok(())
}

pub fn cmd_sample(bundle: &Path, rows: usize, out: &Path, seed: u64) -> Result<(), Failure> {
    if rows < 1 {
        return Err(Failure::domain("rows must be at least 1"));
    }
    let bundle = ModelBundle::load(bundle)?;
    let table = bundle.sample(rows, seed)?;
    write_table(&table, out)?;
    Ok(())
}

/// Loads `real` (schema inferred unless given) and `synth` under the real
/// schema.
pub fn load_pair(real: &Path, synth: &Path, schema: Option<&Path>) -> Result<(RawTable, RawTable), Failure> {
    let real = load_dataset(real, schema, None, 0)?;
    let synth = load_table(synth, Some(real.schema()))?;
    Ok((real, synth))
}

pub fn evaluate_tables(real: &RawTable, synth: &RawTable, run: RunInfo) -> Result<FidelityReport, Failure> {
    let mut report = evaluate(real, synth, &EvalOptions::default())?;
    report.metadata.run = run;
    Ok(report)
}

pub fn write_report(report: &FidelityReport, out: &Path) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Failure::domain(e.to_string()))?;
    write_file(out, json + "\n")
}

pub fn cmd_evaluate(real: &Path, synth: &Path, schema: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let (real, synth) = load_pair(real, synth, schema)?;
    let report = evaluate_tables(&real, &synth, RunInfo::default())?;
    write_report(&report, out)?;
    println!("{}", report.summary_line());
    Ok(())
}

/// `grid.csv` → `grid.basis.json`.
pub fn sidecar_path(grid: &Path) -> PathBuf {
    grid.with_extension("basis.json")
}

pub fn cmd_project(real: &Path, synth: &Path, schema: Option<&Path>, out: &Path, bins: usize) -> Result<(), Failure> {
    let (real, synth) = load_pair(real, synth, schema)?;
    let real_enc = encode(&real)?;
    let synth_enc = encode(&synth)?;
    let projection = pca_projection_histogram(real_enc.values.view(), synth_enc.values.view(), bins)?;
    write_file(out, projection.grid_csv())?;
    write_file(&sidecar_path(out), projection.sidecar_json()? + "\n")?;
    Ok(())
}
