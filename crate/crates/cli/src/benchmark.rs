//! The benchmark sweep: every (dataset, model, ε, seed) cell is trained,
//! sampled at the real table's size and scored against the real table.
//! Cells run in a thread pool; the aggregate is computed from the per-cell
//! reports alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tabsynth::data::RawTable;
use tabsynth::metrics::{FidelityReport, RunInfo};
use tabsynth::models::{ModelKind, TrainingLog};

use crate::commands::{evaluate_tables, train_table, write_report};
use crate::config::{load_dataset, TrainSettings};
use crate::failure::{write_file, Failure};

pub const THREADS_ENV: &str = "TABSYNTH_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    /// Relative paths are resolved against the plan file's directory.
    pub path: PathBuf,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    /// Use a seeded random subset of this many rows for both training and
    /// evaluation.
    #[serde(default)]
    pub subsample: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkPlan {
    pub datasets: Vec<DatasetSpec>,
    pub models: Vec<ModelKind>,
    pub epsilons: Vec<f64>,
    pub repeats: usize,
    /// One seed per repeat, shared by every model and budget.
    pub seeds: Vec<u64>,
    /// Seed of the dataset subsampling.
    #[serde(default)]
    pub subsample_seed: u64,
    /// Settings shared by all models. `epsilon` is set per cell.
    #[serde(default)]
    pub training: TrainSettings,
    /// Per-model settings, keyed by model name, layered over `training`.
    #[serde(default)]
    pub model_training: BTreeMap<String, TrainSettings>,
}

impl BenchmarkPlan {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let mut plan: BenchmarkPlan =
            serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut plan.datasets {
            d.path = base.join(&d.path);
            d.schema = d.schema.as_ref().map(|s| base.join(s));
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::domain(m));
        if self.repeats < 1 {
            return bad("repeats must be at least 1".into());
        }
        if self.seeds.len() != self.repeats {
            return bad(format!("{} seeds given for {} repeats", self.seeds.len(), self.repeats));
        }
        if self.datasets.is_empty() || self.models.is_empty() || self.epsilons.is_empty() {
            return bad("datasets, models and epsilons must be non-empty".into());
        }
        if let Some(&e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return bad(format!("epsilon must be positive and finite, got {e}"));
        }
        for name in self.model_training.keys() {
            name.parse::<ModelKind>()?;
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("dataset names must be unique".into());
        }
        Ok(())
    }

    /// Cells in plan order: dataset, model, ε, seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (d, dataset) in self.datasets.iter().enumerate() {
            for &model in &self.models {
                for &epsilon in &self.epsilons {
                    for &seed in &self.seeds {
                        out.push(Cell {
                            dataset: d,
                            dataset_name: dataset.name.clone(),
                            model,
                            epsilon,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }

    fn settings_for(&self, model: ModelKind, epsilon: f64) -> TrainSettings {
        let mut s = self.training.clone();
        if let Some(m) = self.model_training.get(model.as_str()) {
            s = s.overlay(m);
        }
        s.epsilon = Some(epsilon);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub dataset: usize,
    pub dataset_name: String,
    pub model: ModelKind,
    pub epsilon: f64,
    pub seed: u64,
}

impl Cell {
    /// File stem shared by the cell's artifacts.
    pub fn stem(&self) -> String {
        format!("{}__{}__eps{}__seed{}", self.dataset_name, self.model, self.epsilon, self.seed)
    }
}

pub fn report_path(out_dir: &Path, cell: &Cell) -> PathBuf {
    out_dir.join("reports").join(format!("{}.json", cell.stem()))
}

pub fn error_path(out_dir: &Path, cell: &Cell) -> PathBuf {
    out_dir.join("reports").join(format!("{}.error.txt", cell.stem()))
}

pub fn log_path(out_dir: &Path, cell: &Cell) -> PathBuf {
    out_dir.join("logs").join(format!("{}.csv", cell.stem()))
}

fn run_cell(
    plan: &BenchmarkPlan,
    table: &RawTable,
    cell: &Cell,
) -> Result<(FidelityReport, TrainingLog), Failure> {
    let settings = plan.settings_for(cell.model, cell.epsilon);
    let (bundle, log) = train_table(table, cell.model, &settings, cell.seed)?;
    let synth = bundle.sample(table.n_rows(), cell.seed)?;
    let run = RunInfo {
        dataset: Some(cell.dataset_name.clone()),
        model: Some(cell.model.to_string()),
        seed: Some(cell.seed),
        epsilon_target: Some(cell.epsilon),
        epsilon_spent: bundle.delta.map(|_| bundle.epsilon_spent),
        delta: bundle.delta,
        kl_direction: (cell.model == ModelKind::TableDiffusionDenoiser).then(|| "kl(true||predicted)".to_owned()),
    };
    Ok((evaluate_tables(table, &synth, run)?, log))
}

pub fn thread_count() -> Result<usize, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Failure::domain(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(0),
    }
}

/// Outcome of one cell: its report, or the failure message.
pub type CellOutcome = Result<FidelityReport, String>;

/// Runs every cell, writing per-cell reports (or error files) and logs,
/// then `results.csv`. Returns the outcomes in plan order.
pub fn run_benchmark(plan: &BenchmarkPlan, out_dir: &Path) -> Result<Vec<CellOutcome>, Failure> {
    plan.validate()?;
    let tables = plan
        .datasets
        .iter()
        .map(|d| load_dataset(&d.path, d.schema.as_deref(), d.subsample, plan.subsample_seed))
        .collect::<Result<Vec<_>, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| Failure::domain(e.to_string()))?;
    let cells = plan.cells();
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let outcome = run_cell(plan, &tables[cell.dataset], cell);
                match outcome {
                    Ok((report, log)) => {
                        write_report(&report, &report_path(out_dir, cell))?;
                        write_file(&log_path(out_dir, cell), log.to_csv())?;
                        eprintln!("done   {} {}", cell.stem(), report.summary_line());
                        Ok(Ok(report))
                    }
                    Err(e) => {
                        write_file(&error_path(out_dir, cell), format!("{e}\n"))?;
                        eprintln!("failed {}: {e}", cell.stem());
                        Ok(Err(e.to_string()))
                    }
                }
            })
            .collect::<Result<Vec<_>, Failure>>()
    })?;
    write_file(&out_dir.join("results.csv"), results_csv(plan, &outcomes))?;
    Ok(outcomes)
}

/// Re-reads the per-cell reports of a finished run.
pub fn load_outcomes(plan: &BenchmarkPlan, out_dir: &Path) -> Result<Vec<CellOutcome>, Failure> {
    plan.cells()
        .iter()
        .map(|cell| {
            let path = report_path(out_dir, cell);
            if path.exists() {
                let text =
                    std::fs::read_to_string(&path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                let report = serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                Ok(Ok(report))
            } else {
                let path = error_path(out_dir, cell);
                let text =
                    std::fs::read_to_string(&path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                Ok(Err(text.trim_end().to_owned()))
            }
        })
        .collect()
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub const RESULTS_HEADER: &str = "dataset,model,epsilon,runs,failed,\
pmse_mean,pmse_std,md_mean,md_std,alpha_precision_mean,alpha_precision_std,\
beta_recall_mean,beta_recall_std,auprc_mean,auprc_std";

const METRICS: [fn(&FidelityReport) -> f64; 5] = [
    |r| r.pmse_ratio,
    |r| r.marginal_distance,
    |r| r.alpha_precision_integral,
    |r| r.beta_recall_integral,
    |r| r.auprc,
];

/// One row per (dataset, model, ε), aggregated over seeds. `outcomes`
/// must be in [`BenchmarkPlan::cells`] order.
pub fn results_csv(plan: &BenchmarkPlan, outcomes: &[CellOutcome]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    let cells = plan.cells();
    for (group, chunk) in cells.chunks(plan.seeds.len()).zip(outcomes.chunks(plan.seeds.len())) {
        let head = &group[0];
        let ok: Vec<&FidelityReport> = chunk.iter().filter_map(|o| o.as_ref().ok()).collect();
        let _ = write!(
            out,
            "{},{},{},{},{}",
            head.dataset_name,
            head.model,
            head.epsilon,
            ok.len(),
            chunk.len() - ok.len()
        );
        for metric in METRICS {
            let values: Vec<f64> = ok.iter().map(|r| metric(r)).collect();
            let (m, s) = mean_std(&values);
            let _ = write!(out, ",{m},{s}");
        }
        out.push('\n');
    }
    out
}
