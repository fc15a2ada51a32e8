//! Rényi-DP accounting for the Poisson-subsampled Gaussian mechanism.
//!
//! Per-step cost at order α is `log A_α / (α − 1)` with
//! `A_α = E_{z∼N(0,σ²)}[(μ(z)/μ₀(z))^α]`, where `μ` is the mixture
//! `(1−q)·N(0,σ²) + q·N(1,σ²)`. Integer orders use the finite binomial
//! expansion; fractional orders use the convergent two-sided series with
//! erfc tail weights. Both are evaluated in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::params::PrivacyParams;

/// α ∈ {1.25, 1.5, 1.75, 2, 3, …, 64, 128, 256, 512}.
pub fn default_orders() -> Vec<f64> {
    let mut orders = vec![1.25, 1.5, 1.75];
    orders.extend((2..=64).map(f64::from));
    orders.extend([128.0, 256.0, 512.0]);
    orders
}

/// RDP ε(α) of one step of the subsampled Gaussian mechanism with
/// sensitivity 1, noise multiplier `sigma`, and sampling rate `q`.
pub fn rdp_subsampled_gaussian(q: f64, sigma: f64, alpha: f64) -> f64 {
    debug_assert!(sigma > 0.0 && alpha > 1.0);
    if q <= 0.0 {
        return 0.0;
    }
    let full = alpha / (2.0 * sigma * sigma);
    if q >= 1.0 {
        return full;
    }
    let log_a = if alpha.fract() == 0.0 {
        log_a_integer(q, sigma, alpha as u64)
    } else {
        log_a_fractional(q, sigma, alpha)
    };
    // subsampling never costs more than the unsampled mechanism
    (log_a / (alpha - 1.0)).clamp(0.0, full)
}

fn log_a_integer(q: f64, sigma: f64, alpha: u64) -> f64 {
    let (log_q, log_1mq) = (q.ln(), (-q).ln_1p());
    let two_var = 2.0 * sigma * sigma;
    let mut acc = f64::NEG_INFINITY;
    let mut log_binom = 0.0f64;
    for i in 0..=alpha {
        if i > 0 {
            log_binom += ((alpha - i + 1) as f64).ln() - (i as f64).ln();
        }
        let fi = i as f64;
        let term = log_binom + fi * log_q + (alpha - i) as f64 * log_1mq + (fi * fi - fi) / two_var;
        acc = log_add(acc, term);
    }
    acc
}

fn log_a_fractional(q: f64, sigma: f64, alpha: f64) -> f64 {
    let (log_q, log_1mq) = (q.ln(), (-q).ln_1p());
    let two_var = 2.0 * sigma * sigma;
    let z0 = sigma * sigma * (1.0 / q - 1.0).ln() + 0.5;
    let scale = std::f64::consts::SQRT_2 * sigma;

    let (mut pos0, mut neg0) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut pos1, mut neg1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut coef = 1.0f64; // generalized binomial C(alpha, i)
    let mut i = 0u32;
    loop {
        if i > 0 {
            coef *= (alpha - f64::from(i - 1)) / f64::from(i);
        }
        let fi = f64::from(i);
        let j = alpha - fi;
        let log_coef = coef.abs().ln();
        let log_t0 = log_coef + fi * log_q + j * log_1mq;
        let log_t1 = log_coef + j * log_q + fi * log_1mq;
        let log_e0 = 0.5f64.ln() + log_erfc((fi - z0) / scale);
        let log_e1 = 0.5f64.ln() + log_erfc((z0 - j) / scale);
        let log_s0 = log_t0 + (fi * fi - fi) / two_var + log_e0;
        let log_s1 = log_t1 + (j * j - j) / two_var + log_e1;
        if coef > 0.0 {
            pos0 = log_add(pos0, log_s0);
            pos1 = log_add(pos1, log_s1);
        } else {
            neg0 = log_add(neg0, log_s0);
            neg1 = log_add(neg1, log_s1);
        }
        i += 1;
        if log_s0.max(log_s1) < -30.0 || i > 100_000 {
            break;
        }
    }
    log_add(log_sub(pos0, neg0), log_sub(pos1, neg1))
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn log_sub(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

fn log_erfc(x: f64) -> f64 {
    if x < 25.0 {
        libm::erfc(x).ln()
    } else {
        // asymptotic expansion, relative error far below f64 eps for x ≥ 25
        let x2 = x * x;
        let series = 1.0 - 1.0 / (2.0 * x2) + 3.0 / (4.0 * x2 * x2) - 15.0 / (8.0 * x2 * x2 * x2);
        -x2 - (x * std::f64::consts::PI.sqrt()).ln() + series.ln()
    }
}

/// Running per-order RDP totals for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpLedger {
    pub orders: Vec<f64>,
    pub accumulated: Vec<f64>,
    pub steps: u64,
}

impl Default for RdpLedger {
    fn default() -> Self {
        Self::new(default_orders())
    }
}

impl RdpLedger {
    pub fn new(orders: Vec<f64>) -> Self {
        let accumulated = vec![0.0; orders.len()];
        RdpLedger {
            orders,
            accumulated,
            steps: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    /// Charges one subsampled-Gaussian step.
    pub fn accumulate_step(&mut self, q: f64, sigma: f64) {
        for (acc, &alpha) in self.accumulated.iter_mut().zip(&self.orders) {
            *acc += rdp_subsampled_gaussian(q, sigma, alpha);
        }
        self.steps += 1;
    }

    /// The ledger after one more step, leaving `self` untouched.
    pub fn with_step(&self, q: f64, sigma: f64) -> Self {
        let mut next = self.clone();
        next.accumulate_step(q, sigma);
        next
    }

    pub fn epsilon(&self, delta: f64) -> Result<f64> {
        to_epsilon_delta(self, delta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.orders.len() != self.accumulated.len() {
            return Err(Error::Bundle("ledger orders and totals differ in length".into()));
        }
        if self.orders.iter().any(|&a| !(a > 1.0)) {
            return Err(Error::Bundle("ledger orders must exceed 1".into()));
        }
        if self.accumulated.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Bundle("ledger totals must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// ε = min over orders of `accumulated(α) + ln(1/δ)/(α − 1)`; `+∞` for an
/// empty order grid.
pub fn to_epsilon_delta(ledger: &RdpLedger, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta {delta} outside (0, 1)")));
    }
    let log_inv_delta = -delta.ln();
    Ok(ledger
        .orders
        .iter()
        .zip(&ledger.accumulated)
        .map(|(&alpha, &rdp)| rdp + log_inv_delta / (alpha - 1.0))
        .fold(f64::INFINITY, f64::min))
}

/// True when taking one more step would push ε past the target, so a loop
/// that checks before every step never reports ε above the target.
pub fn budget_exhausted(ledger: &RdpLedger, params: &PrivacyParams) -> bool {
    let next = ledger.with_step(params.sampling_rate, params.noise_multiplier);
    match to_epsilon_delta(&next, params.delta) {
        Ok(eps) => eps > params.epsilon_target,
        Err(_) => true,
    }
}

/// Single-release Gaussian-mechanism calibration `σ = √(2 ln(1.25/δ)) / ε`.
/// Informational only; training is governed by the ledger.
pub fn gaussian_sigma_single_shot(epsilon: f64, delta: f64) -> f64 {
    (2.0 * (1.25 / delta).ln()).sqrt() / epsilon
}

/// Smallest noise multiplier (to a relative precision of 1e-4) for which
/// `steps` subsampled-Gaussian steps at rate `q` stay within
/// `(epsilon_target, delta)`.
pub fn calibrate_noise_multiplier(
    q: f64,
    steps: u64,
    delta: f64,
    epsilon_target: f64,
) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) || steps == 0 || !(epsilon_target > 0.0) {
        return Err(Error::InvalidArgument(
            "calibration needs q in (0, 1], steps ≥ 1 and a positive target".into(),
        ));
    }
    let orders = default_orders();
    let eps_for = |sigma: f64| -> Result<f64> {
        let ledger = RdpLedger {
            accumulated: orders
                .iter()
                .map(|&a| steps as f64 * rdp_subsampled_gaussian(q, sigma, a))
                .collect(),
            orders: orders.clone(),
            steps,
        };
        to_epsilon_delta(&ledger, delta)
    };
    let mut hi = 1.0;
    while eps_for(hi)? > epsilon_target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidArgument(format!(
                "epsilon target {epsilon_target} unreachable with delta {delta}"
            )));
        }
    }
    let mut lo = hi / 2.0;
    if eps_for(lo)? <= epsilon_target {
        while lo > 1e-3 && eps_for(lo / 2.0)? <= epsilon_target {
            lo /= 2.0;
        }
        hi = lo;
        lo /= 2.0;
    }
    while (hi - lo) / hi > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if eps_for(mid)? <= epsilon_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
