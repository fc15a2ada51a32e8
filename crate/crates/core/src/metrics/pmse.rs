use ndarray::{concatenate, Axis};
use serde::{Deserialize, Serialize};

use crate::data::EncodedMatrix;
use crate::error::{Error, Result};

use super::logistic::fit_logistic;

/// Observed and null-expected propensity mean squared error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmseScore {
    pub observed: f64,
    pub expected: f64,
    pub ratio: f64,
    /// Parameter count used in the expectation (encoded width + intercept).
    pub d: usize,
}

/// `p(1 − p)·d / N` with `p = n_real / N`.
pub fn expected_pmse(n_real: usize, n_synth: usize, d: usize) -> Result<f64> {
    let n = (n_real + n_synth) as f64;
    let p = n_real as f64 / n;
    let e = p * (1.0 - p) * d as f64 / n;
    if !(e > 0.0) {
        return Err(Error::Degenerate("expected pMSE is zero".into()));
    }
    Ok(e)
}

/// Scores the propensities `scores` (real rows first, then synthetic)
/// against the constant `n_synth / N`.
pub fn pmse_from_scores(scores: &[f64], n_real: usize, n_synth: usize, d: usize) -> Result<PmseScore> {
    if scores.len() != n_real + n_synth {
        return Err(Error::Shape(format!(
            "{} scores for {} rows",
            scores.len(),
            n_real + n_synth
        )));
    }
    let n = scores.len() as f64;
    let c = n_synth as f64 / n;
    let observed = scores.iter().map(|s| (s - c) * (s - c)).sum::<f64>() / n;
    let expected = expected_pmse(n_real, n_synth, d)?;
    Ok(PmseScore {
        observed,
        expected,
        ratio: observed / expected,
        d,
    })
}

/// Fits a ridge logistic discriminator (synthetic = 1) on the stacked
/// encodings and returns the pMSE ratio.
pub fn pmse_ratio(real: &EncodedMatrix, synth: &EncodedMatrix, ridge: f64) -> Result<PmseScore> {
    if real.spans != synth.spans || real.schema != synth.schema {
        return Err(Error::Schema("real and synthetic encodings differ".into()));
    }
    let (n1, n2) = (real.n_rows(), synth.n_rows());
    if n1 == 0 || n2 == 0 {
        return Err(Error::Empty("pMSE needs rows on both sides".into()));
    }
    let x = concatenate(Axis(0), &[real.values.view(), synth.values.view()])
        .map_err(|e| Error::Shape(e.to_string()))?;
    let labels: Vec<f64> = (0..n1 + n2).map(|i| if i < n1 { 0.0 } else { 1.0 }).collect();
    let fit = fit_logistic(x.view(), &labels, ridge)?;
    pmse_from_scores(fit.probabilities.as_slice().expect("contiguous"), n1, n2, real.width() + 1)
}
