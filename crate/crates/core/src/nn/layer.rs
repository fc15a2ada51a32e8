use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stabiliser inside the GroupNorm denominator `√(var + ε)`.
pub const GROUP_NORM_EPS: f64 = 1e-5;

/// One layer of a [`Network`](super::Network).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { in_dim: usize, out_dim: usize },
    Relu { dim: usize },
    LeakyRelu { dim: usize, slope: f64 },
    Sigmoid { dim: usize },
    GroupNorm { channels: usize, groups: usize },
    Dropout { dim: usize, rate: f64 },
    /// `Dense(in → width) → GroupNorm → ReLU`, with the block output
    /// concatenated in front of the block input.
    ResidualConcat { in_dim: usize, width: usize, groups: usize },
}

impl LayerSpec {
    pub fn in_dim(&self) -> usize {
        match *self {
            LayerSpec::Dense { in_dim, .. } | LayerSpec::ResidualConcat { in_dim, .. } => in_dim,
            LayerSpec::Relu { dim }
            | LayerSpec::LeakyRelu { dim, .. }
            | LayerSpec::Sigmoid { dim }
            | LayerSpec::Dropout { dim, .. } => dim,
            LayerSpec::GroupNorm { channels, .. } => channels,
        }
    }

    pub fn out_dim(&self) -> usize {
        match *self {
            LayerSpec::Dense { out_dim, .. } => out_dim,
            LayerSpec::ResidualConcat { in_dim, width, .. } => in_dim + width,
            _ => self.in_dim(),
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { in_dim, out_dim } => out_dim * in_dim + out_dim,
            LayerSpec::GroupNorm { channels, .. } => 2 * channels,
            LayerSpec::ResidualConcat { in_dim, width, .. } => width * in_dim + 3 * width,
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.in_dim() == 0 || self.out_dim() == 0 {
            return fail(format!("{self:?}: dimensions must be positive"));
        }
        match *self {
            LayerSpec::GroupNorm { channels, groups }
            | LayerSpec::ResidualConcat {
                width: channels,
                groups,
                ..
            } => {
                if groups == 0 || channels % groups != 0 {
                    return fail(format!("{groups} groups do not divide {channels} channels"));
                }
            }
            LayerSpec::Dropout { rate, .. } => {
                if !(0.0..1.0).contains(&rate) {
                    return fail(format!("dropout rate {rate} outside [0, 1)"));
                }
            }
            LayerSpec::LeakyRelu { slope, .. } => {
                if !slope.is_finite() {
                    return fail("leaky ReLU slope must be finite".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_counts() {
        let d = LayerSpec::Dense { in_dim: 3, out_dim: 2 };
        assert_eq!((d.in_dim(), d.out_dim(), d.param_count()), (3, 2, 8));
        let r = LayerSpec::ResidualConcat { in_dim: 10, width: 128, groups: 8 };
        assert_eq!(r.out_dim(), 138);
        assert_eq!(r.param_count(), 128 * 10 + 128 + 2 * 128);
        assert_eq!(LayerSpec::GroupNorm { channels: 16, groups: 4 }.param_count(), 32);
    }

    #[test]
    fn group_count_must_divide_channels() {
        assert!(LayerSpec::GroupNorm { channels: 12, groups: 8 }.validate().is_err());
        assert!(LayerSpec::GroupNorm { channels: 16, groups: 8 }.validate().is_ok());
        assert!(LayerSpec::Dropout { dim: 4, rate: 1.0 }.validate().is_err());
    }
}
