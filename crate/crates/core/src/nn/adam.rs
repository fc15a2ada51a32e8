use ndarray::{Array1, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::network::Network;

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct AdamState<T: Real> {
    pub first_moment: Array1<T>,
    pub second_moment: Array1<T>,
    pub timestep: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl<T: Real> AdamState<T> {
    /// Zeroed moments with β₁ = 0.9, β₂ = 0.999, ε̂ = 1e-8.
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        AdamState {
            first_moment: Array1::zeros(num_params),
            second_moment: Array1::zeros(num_params),
            timestep: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate,
        }
    }

    pub fn step(&mut self, net: &mut Network<T>, grad: ArrayView1<'_, T>) -> Result<()> {
        if grad.len() != net.param_count() || grad.len() != self.first_moment.len() {
            return Err(Error::Shape(format!(
                "gradient length {} does not match {} parameters",
                grad.len(),
                net.param_count()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient passed to Adam".into()));
        }
        self.timestep += 1;
        let t = self.timestep as i32;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::one() - T::lit(self.beta1.powi(t));
        let c2 = T::one() - T::lit(self.beta2.powi(t));
        let (lr, eps) = (T::lit(self.learning_rate), T::lit(self.epsilon));
        Zip::from(net.params_mut())
            .and(&mut self.first_moment)
            .and(&mut self.second_moment)
            .and(grad)
            .for_each(|p, m, v, &g| {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
            });
        Ok(())
    }
}
