//! Generative models: tabular diffusion (noise-predicting and denoising
//! variants) and the DP-WGAN baseline, plus their persisted bundles.

mod bundle;
mod diffusion;
mod gan;
mod log;
mod schedule;

pub use bundle::{ModelBundle, ModelConfig, ModelKind, NetworkState, FORMAT_VERSION};
pub use diffusion::{evaluate_batch_loss, sample_diffusion, train_diffusion, DiffusionConfig, DiffusionVariant};
pub use gan::{generator_step, sample_gan, train_dpwgan, GanConfig};
pub use log::{HaltReason, LogEntry, Phase, TrainingLog};
pub use schedule::{cosine_beta, noise_data, NoiseSchedule};
