use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID_STEP: f64 = 0.02;

/// α-precision and β-recall sampled on a uniform grid in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecallCurves {
    pub alphas: Vec<f64>,
    pub precision: Vec<f64>,
    pub betas: Vec<f64>,
    pub recall: Vec<f64>,
}

/// Value at index `⌈q·n⌉ − 1` of the sorted sample, with the rank clamped
/// to `1..=n`.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

fn grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument("grid step must lie in (0, 1]".into()));
    }
    let k = (1.0 / step).round().max(1.0) as usize;
    Ok((1..=k).map(|i| i as f64 / k as f64).collect())
}

/// Sorted Euclidean distances of `rows` to `center`.
fn sorted_distances(rows: ArrayView2<'_, f64>, center: &Array1<f64>) -> Vec<f64> {
    let mut d: Vec<f64> = rows
        .rows()
        .into_iter()
        .map(|r| (&r - center).mapv(|v| v * v).sum().sqrt())
        .collect();
    d.sort_by(f64::total_cmp);
    d
}

/// Fraction of `probe` distances within `radius` (inclusive).
fn coverage(sorted_probe: &[f64], radius: f64) -> f64 {
    sorted_probe.partition_point(|&d| d <= radius) as f64 / sorted_probe.len() as f64
}

/// For each α: the share of synthetic rows inside the real α-ball (a
/// sphere around the real mean whose radius is the nearest-rank α-quantile
/// of real distances). Recall swaps the roles.
pub fn precision_recall_curves(
    real: ArrayView2<'_, f64>,
    synth: ArrayView2<'_, f64>,
    grid_step: f64,
) -> Result<PrecisionRecallCurves> {
    if real.ncols() != synth.ncols() {
        return Err(Error::Shape(format!(
            "real width {} vs synthetic width {}",
            real.ncols(),
            synth.ncols()
        )));
    }
    if real.nrows() == 0 || synth.nrows() == 0 {
        return Err(Error::Empty("precision/recall needs rows on both sides".into()));
    }
    let alphas = grid(grid_step)?;
    let real_center = real.mean_axis(Axis(0)).expect("non-empty");
    let synth_center = synth.mean_axis(Axis(0)).expect("non-empty");

    let real_to_real = sorted_distances(real, &real_center);
    let synth_to_real = sorted_distances(synth, &real_center);
    let synth_to_synth = sorted_distances(synth, &synth_center);
    let real_to_synth = sorted_distances(real, &synth_center);

    let precision = alphas
        .iter()
        .map(|&a| coverage(&synth_to_real, nearest_rank(&real_to_real, a)))
        .collect();
    let recall = alphas
        .iter()
        .map(|&b| coverage(&real_to_synth, nearest_rank(&synth_to_synth, b)))
        .collect();
    Ok(PrecisionRecallCurves {
        betas: alphas.clone(),
        alphas,
        precision,
        recall,
    })
}

/// Trapezoid integral over `[0, 1]` with the curve anchored at `(0, 0)`.
pub fn curve_integral(xs: &[f64], ys: &[f64]) -> f64 {
    let mut prev = (0.0, 0.0);
    let mut total = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        total += (x - prev.0) * (y + prev.1) / 2.0;
        prev = (x, y);
    }
    total
}

/// `(∫P_α dα, ∫R_β dβ, product)`.
pub fn auprc(curves: &PrecisionRecallCurves) -> (f64, f64, f64) {
    let a = curve_integral(&curves.alphas, &curves.precision);
    let b = curve_integral(&curves.betas, &curves.recall);
    (a, b, a * b)
}
