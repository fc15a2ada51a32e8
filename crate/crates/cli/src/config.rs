//! Run configuration: a JSON file with a fixed key set, overridden field by
//! field by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tabsynth::data::{load_table, RawTable, TableSchema};
use tabsynth::models::{DiffusionConfig, DiffusionVariant, GanConfig, ModelKind};
use tabsynth::privacy::{calibrate_noise_multiplier, PrivacyParams};

use crate::failure::Failure;

pub const DEFAULT_DELTA: f64 = 1e-5;
pub const DEFAULT_CLIP: f64 = 1.0;

/// Training hyperparameters. Every field is optional so that a config
/// file, a benchmark plan and command-line flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    /// Target ε. Absent means an unprivatized run.
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    /// Noise multiplier. Calibrated from the budget when absent.
    pub sigma: Option<f64>,
    pub clip: Option<f64>,
    /// Expected batch size; the sampling rate is `batch / rows`.
    pub batch: Option<usize>,
    /// Explicit sampling rate, overriding the one implied by `batch`.
    pub sampling_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub steps_t: Option<usize>,
    pub lr: Option<f64>,
    pub critic_lr: Option<f64>,
    pub critic_steps: Option<usize>,
    pub latent_dim: Option<usize>,
    pub weight_clip: Option<f64>,
    pub max_batches: Option<u64>,
}

macro_rules! layer_fields {
    ($base:expr, $top:expr, $($f:ident),*) => {
        TrainSettings { $($f: $top.$f.or($base.$f)),* }
    };
}

impl TrainSettings {
    /// Fields set in `top` win over those in `self`.
    pub fn overlay(&self, top: &TrainSettings) -> TrainSettings {
        layer_fields!(
            self, top, epsilon, delta, sigma, clip, batch, sampling_rate, epochs, steps_t, lr, critic_lr,
            critic_steps, latent_dim, weight_clip, max_batches
        )
    }
}

/// Contents of a `train --config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub model: Option<ModelKind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Training log path; defaults to the bundle path with a `.log.csv`
    /// extension.
    pub log: Option<PathBuf>,
    /// Train on a seeded random subset of this many rows.
    pub subsample: Option<usize>,
    pub training: TrainSettings,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }

    /// Fields set in `top` win over those in `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        RunConfig {
            data: top.data.or(self.data),
            schema: top.schema.or(self.schema),
            model: top.model.or(self.model),
            seed: top.seed.or(self.seed),
            out: top.out.or(self.out),
            log: top.log.or(self.log),
            subsample: top.subsample.or(self.subsample),
            training: self.training.overlay(&top.training),
        }
    }
}

/// Fully resolved model configuration, ready to train.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelPlan {
    Diffusion(DiffusionConfig),
    Gan(GanConfig),
}

impl ModelPlan {
    pub fn privacy(&self) -> Option<&PrivacyParams> {
        match self {
            ModelPlan::Diffusion(c) => c.privacy.as_ref(),
            ModelPlan::Gan(c) => c.privacy.as_ref(),
        }
    }
}

pub fn is_recommended_batch(batch: usize) -> bool {
    batch.is_power_of_two() && (64..=2048).contains(&batch)
}

/// Resolves settings against model defaults for a table of `rows` rows.
///
/// With a budget and no explicit σ, σ is the smallest multiplier that keeps
/// the whole planned run (`epochs · ⌈1/q⌉` steps, capped by
/// `max_batches`) within the budget.
pub fn resolve(kind: ModelKind, settings: &TrainSettings, rows: usize) -> Result<ModelPlan, Failure> {
    if rows == 0 {
        return Err(Failure::domain("training table is empty"));
    }
    let diffusion = DiffusionConfig::default();
    let gan = GanConfig::default();
    let default_batch = match kind {
        ModelKind::DpWgan => gan.batch_size,
        _ => diffusion.batch_size,
    };
    let batch = settings.batch.unwrap_or(default_batch);
    if batch == 0 {
        return Err(Failure::domain("batch must be at least 1"));
    }
    let epochs = settings.epochs.unwrap_or(match kind {
        ModelKind::DpWgan => gan.epochs,
        _ => diffusion.epochs,
    });
    let privacy = match settings.epsilon {
        None => None,
        Some(eps) => {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Failure::domain(format!("epsilon must be positive and finite, got {eps}")));
            }
            let delta = settings.delta.unwrap_or(DEFAULT_DELTA);
            let clip = settings.clip.unwrap_or(DEFAULT_CLIP);
            let q = settings.sampling_rate.unwrap_or((batch as f64 / rows as f64).min(1.0));
            let sigma = match settings.sigma {
                Some(s) => s,
                None => {
                    if !(q > 0.0 && q <= 1.0) {
                        return Err(Failure::domain(format!("sampling rate must lie in (0, 1], got {q}")));
                    }
                    let per_epoch = (1.0 / q).ceil() as u64;
                    let mut steps = per_epoch.saturating_mul(epochs as u64);
                    if let Some(cap) = settings.max_batches {
                        steps = steps.min(cap);
                    }
                    calibrate_noise_multiplier(q, steps.max(1), delta, eps)?
                }
            };
            Some(PrivacyParams::new(clip, sigma, q, delta, eps)?)
        }
    };
    let plan = match kind {
        ModelKind::TableDiffusion | ModelKind::TableDiffusionDenoiser => ModelPlan::Diffusion(DiffusionConfig {
            diffusion_steps: settings.steps_t.unwrap_or(diffusion.diffusion_steps),
            variant: if kind == ModelKind::TableDiffusion {
                DiffusionVariant::NoisePredictor
            } else {
                DiffusionVariant::Denoiser
            },
            batch_size: batch,
            epochs,
            learning_rate: settings.lr.unwrap_or(diffusion.learning_rate),
            privacy,
            max_batches: settings.max_batches,
        }),
        ModelKind::DpWgan => {
            let lr = settings.lr.unwrap_or(gan.generator_lr);
            ModelPlan::Gan(GanConfig {
                batch_size: batch,
                epochs,
                generator_lr: lr,
                critic_lr: settings.critic_lr.unwrap_or(lr),
                critic_steps: settings.critic_steps.unwrap_or(gan.critic_steps),
                latent_dim: settings.latent_dim.unwrap_or(gan.latent_dim),
                weight_clip: settings.weight_clip.unwrap_or(gan.weight_clip),
                privacy,
                max_batches: settings.max_batches,
            })
        }
    };
    match &plan {
        ModelPlan::Diffusion(c) => c.validate()?,
        ModelPlan::Gan(c) => c.validate()?,
    }
    Ok(plan)
}

/// Loads a table, with an optional schema file, and optionally keeps a
/// seeded subset of `subsample` rows in their original order.
pub fn load_dataset(
    path: &Path,
    schema: Option<&Path>,
    subsample: Option<usize>,
    subsample_seed: u64,
) -> Result<RawTable, Failure> {
    let schema = schema.map(TableSchema::load).transpose()?;
    let table = load_table(path, schema.as_ref())?;
    match subsample {
        Some(n) if n < table.n_rows() => {
            if n == 0 {
                return Err(Failure::domain("subsample must be at least 1"));
            }
            let mut idx: Vec<usize> = (0..table.n_rows()).collect();
            rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut tabsynth::rng::seeded(subsample_seed));
            let mut keep = idx[..n].to_vec();
            keep.sort_unstable();
            Ok(table.select_rows(&keep)?)
        }
        _ => Ok(table),
    }
}
