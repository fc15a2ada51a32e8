use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::layer::LayerSpec;
use super::network::Network;

pub const GENERATOR_HIDDEN: usize = 128;
pub const CRITIC_HIDDEN: usize = 256;

/// GroupNorm group count for a layer of the given width.
pub fn group_count(width: usize) -> usize {
    if width % 8 == 0 {
        8
    } else {
        1
    }
}

/// Output head of the discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticHead {
    /// Unbounded score, for the Wasserstein loss.
    Wasserstein,
    /// Terminal sigmoid, for the vanilla GAN loss.
    Probability,
}

/// Two 128-wide residual-concat blocks and a final linear layer.
pub fn build_generator<T: Real, R: Rng + ?Sized>(
    input_dim: usize,
    output_dim: usize,
    rng: &mut R,
) -> Result<Network<T>> {
    if input_dim == 0 || output_dim == 0 {
        return Err(Error::InvalidArgument("generator dimensions must be positive".into()));
    }
    let w = GENERATOR_HIDDEN;
    let layers = vec![
        LayerSpec::ResidualConcat {
            in_dim: input_dim,
            width: w,
            groups: group_count(w),
        },
        LayerSpec::ResidualConcat {
            in_dim: input_dim + w,
            width: w,
            groups: group_count(w),
        },
        LayerSpec::Dense {
            in_dim: input_dim + 2 * w,
            out_dim: output_dim,
        },
    ];
    let mut net = Network::new(layers)?;
    net.initialize(rng);
    Ok(net)
}

/// Three dense layers with 0.2-LeakyReLU and p = 0.5 dropout between them,
/// ending in one score per row.
pub fn build_discriminator<T: Real, R: Rng + ?Sized>(
    input_dim: usize,
    head: CriticHead,
    rng: &mut R,
) -> Result<Network<T>> {
    if input_dim == 0 {
        return Err(Error::InvalidArgument("discriminator input must be positive".into()));
    }
    let h = CRITIC_HIDDEN;
    let mut layers = vec![
        LayerSpec::Dense {
            in_dim: input_dim,
            out_dim: h,
        },
        LayerSpec::LeakyRelu { dim: h, slope: 0.2 },
        LayerSpec::Dropout { dim: h, rate: 0.5 },
        LayerSpec::Dense { in_dim: h, out_dim: h },
        LayerSpec::LeakyRelu { dim: h, slope: 0.2 },
        LayerSpec::Dropout { dim: h, rate: 0.5 },
        LayerSpec::Dense { in_dim: h, out_dim: 1 },
    ];
    if head == CriticHead::Probability {
        layers.push(LayerSpec::Sigmoid { dim: 1 });
    }
    let mut net = Network::new(layers)?;
    net.initialize(rng);
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mode;
    use crate::rng::seeded;
    use ndarray::Array2;

    #[test]
    fn generator_shape_and_parameter_count() {
        let net = build_generator::<f64, _>(10, 10, &mut seeded(3)).unwrap();
        let y = net.predict(Array2::zeros((4, 10)).view(), &mut seeded(0)).unwrap();
        assert_eq!(y.dim(), (4, 10));
        // block 1: 128·10 + 128 (dense) + 2·128 (norm); block 2: 128·138 + 128 + 256;
        // head: 10·266 + 10
        let expected = (1280 + 128 + 256) + (128 * 138 + 128 + 256) + (10 * 266 + 10);
        assert_eq!(net.param_count(), expected);
    }

    #[test]
    fn same_seed_same_initialization() {
        let a = build_generator::<f64, _>(5, 7, &mut seeded(11)).unwrap();
        let b = build_generator::<f64, _>(5, 7, &mut seeded(11)).unwrap();
        let c = build_generator::<f64, _>(5, 7, &mut seeded(12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn discriminator_scores_one_per_row() {
        let mut net = build_discriminator::<f64, _>(6, CriticHead::Wasserstein, &mut seeded(1)).unwrap();
        let x = Array2::from_elem((4, 6), 0.3);
        assert_eq!(net.predict(x.view(), &mut seeded(2)).unwrap().dim(), (4, 1));
        net.set_mode(Mode::Eval);
        let a = net.predict(x.view(), &mut seeded(2)).unwrap();
        let b = net.predict(x.view(), &mut seeded(99)).unwrap();
        assert_eq!(a, b);
        assert!(!net.layers().iter().any(|l| matches!(l, LayerSpec::Sigmoid { .. })));
        let p = build_discriminator::<f64, _>(6, CriticHead::Probability, &mut seeded(1)).unwrap();
        assert!(matches!(p.layers().last(), Some(LayerSpec::Sigmoid { .. })));
    }

    #[test]
    fn dropout_zeroes_about_half_in_train_mode() {
        let net = Network::<f64>::new(vec![LayerSpec::Dropout { dim: 1000, rate: 0.5 }]).unwrap();
        let x = Array2::from_elem((100, 1000), 1.0);
        let y = net.predict(x.view(), &mut seeded(5)).unwrap();
        let zeros = y.iter().filter(|&&v| v == 0.0).count() as f64 / 1e5;
        // binomial sd is 0.0016; ±1% is > 6 sd
        assert!((zeros - 0.5).abs() < 0.01, "{zeros}");
        assert!(y.iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn odd_widths_use_a_single_group() {
        assert_eq!(group_count(128), 8);
        assert_eq!(group_count(12), 1);
    }
}
