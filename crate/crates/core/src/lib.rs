//! Differentially private synthesis of mixed-type tabular data.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`]: schema inference, delimited-text IO, and the reversible
//!   one-hot / min-max transform between raw tables and the continuous
//!   training space.
//! * [`privacy`]: per-sample clipping, Gaussian noising, Poisson batch
//!   sampling, and a Rényi-DP ledger that gates training.
//! * [`nn`]: a small deterministic dense-network kernel with per-sample
//!   gradients and Adam.
//! * [`models`]: the noise-predicting and denoising tabular diffusion
//!   models, the DP-WGAN baseline, and model bundles.
//! * [`metrics`]: pMSE ratio, marginal distance, α-precision / β-recall,
//!   and PCA projection histograms.
//!
//! The numeric kernels are generic over [`Real`]; the aliases below fix
//! the scalar type for the common cases.

pub mod data;
pub mod error;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod privacy;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Network64 = nn::Network<f64>;
pub type Network32 = nn::Network<f32>;
pub type Adam64 = nn::AdamState<f64>;
pub type Adam32 = nn::AdamState<f32>;
pub type BatchGradients64 = nn::BatchGradients<f64>;
pub type PerSampleGradients64 = privacy::PerSampleGradients<f64>;
pub type PerSampleGradients32 = privacy::PerSampleGradients<f32>;
