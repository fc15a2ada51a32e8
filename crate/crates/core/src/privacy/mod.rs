//! DP-SGD primitives and Rényi-DP accounting.

mod dpsgd;
mod params;
mod rdp;

pub use dpsgd::{
    clip_factors, clip_per_sample, gaussian_noise, poisson_sample, privatize_batch_gradient,
    privatize_factored, PerSampleGradients,
};
pub use params::PrivacyParams;
pub use rdp::{
    budget_exhausted, calibrate_noise_multiplier, default_orders, gaussian_sigma_single_shot,
    rdp_subsampled_gaussian, to_epsilon_delta, RdpLedger,
};
