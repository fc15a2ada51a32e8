use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of one DP-SGD training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    /// Per-sample L2 clipping bound `C`.
    pub clip_norm: f64,
    /// Noise multiplier `σ`; the noise standard deviation is `C·σ`.
    pub noise_multiplier: f64,
    /// Poisson sampling rate `q`.
    pub sampling_rate: f64,
    pub delta: f64,
    pub epsilon_target: f64,
}

impl PrivacyParams {
    pub fn new(
        clip_norm: f64,
        noise_multiplier: f64,
        sampling_rate: f64,
        delta: f64,
        epsilon_target: f64,
    ) -> Result<Self> {
        let p = PrivacyParams {
            clip_norm,
            noise_multiplier,
            sampling_rate,
            delta,
            epsilon_target,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_owned()));
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return bad("clip norm must be positive");
        }
        if !(self.noise_multiplier > 0.0 && self.noise_multiplier.is_finite()) {
            return bad("noise multiplier must be positive");
        }
        if !(self.sampling_rate > 0.0 && self.sampling_rate <= 1.0) {
            return bad("sampling rate must lie in (0, 1]");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.epsilon_target > 0.0 && self.epsilon_target.is_finite()) {
            return bad("epsilon target must be positive");
        }
        Ok(())
    }
}
