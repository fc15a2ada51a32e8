use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::normal_matrix;

/// `β_t = (1 − cos(πt/T)) / 2` for `1 ≤ t ≤ T`.
pub fn cosine_beta(t: usize, total: usize) -> Result<f64> {
    if total == 0 || t == 0 || t > total {
        return Err(Error::InvalidArgument(format!(
            "diffusion step {t} outside 1..={total}"
        )));
    }
    Ok((1.0 - (std::f64::consts::PI * t as f64 / total as f64).cos()) / 2.0)
}

/// Cosine noise levels for steps `1..=T`, stored at index `t − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub betas: Vec<f64>,
}

impl NoiseSchedule {
    pub fn cosine(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("need at least one diffusion step".into()));
        }
        let betas = (1..=steps)
            .map(|t| cosine_beta(t, steps))
            .collect::<Result<_>>()?;
        Ok(NoiseSchedule { betas })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    /// `β_t` for `1 ≤ t ≤ T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }
}

/// Returns `(x + z, z)` with `z = √β · ξ`, `ξ ~ N(0, I)` drawn row-major.
pub fn noise_data<R: Rng + ?Sized>(
    x: ArrayView2<'_, f64>,
    beta: f64,
    rng: &mut R,
) -> (Array2<f64>, Array2<f64>) {
    let (rows, cols) = x.dim();
    let z = normal_matrix::<f64, _>(rows, cols, rng) * beta.sqrt();
    (&x + &z, z)
}
