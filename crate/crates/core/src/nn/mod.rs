//! A small deterministic dense-network kernel.
//!
//! Forward passes cache what the backward pass needs; the backward pass
//! keeps the batch axis through every layer and returns
//! [`BatchGradients`], a factored form from which per-sample gradients,
//! their norms, and (re)weighted batch sums are all derived exactly.

mod adam;
mod arch;
mod grads;
mod layer;
mod network;

pub use adam::AdamState;
pub use arch::{
    build_discriminator, build_generator, group_count, CriticHead, CRITIC_HIDDEN, GENERATOR_HIDDEN,
};
pub use grads::{BatchGradients, ParamBlock};
pub use layer::{LayerSpec, GROUP_NORM_EPS};
pub use network::{ForwardCache, Mode, Network};
