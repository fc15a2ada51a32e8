use serde::{Deserialize, Serialize};

use crate::data::{Cell, ColumnKind, ColumnType, RawTable};
use crate::error::{Error, Result};

use super::special::chi2_survival;

/// Two-sample Kolmogorov–Smirnov statistic: the largest gap between the
/// empirical CDFs, found by one sweep over the merged order.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("KS distance needs non-empty columns".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("KS input contains NaN".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        // both CDFs jump at every copy of x
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    // once one side is exhausted the gap can only shrink
    Ok(best)
}

/// Goodness of fit of the synthetic counts against the real profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chi2Outcome {
    /// `1 − p` with `p` the χ² upper tail probability.
    pub distance: f64,
    pub statistic: f64,
    pub dof: usize,
    /// Categories skipped because the real table never uses them.
    pub dropped_categories: usize,
}

/// Expected counts are the real frequencies rescaled to the synthetic total.
/// Categories with zero expected count are dropped and the degrees of
/// freedom reduced; with no freedom left the distance is 0 for a perfect
/// match and 1 otherwise.
pub fn chi2_distance(real_counts: &[f64], synth_counts: &[f64]) -> Result<Chi2Outcome> {
    if real_counts.len() != synth_counts.len() {
        return Err(Error::Shape("category count vectors differ in length".into()));
    }
    let real_total: f64 = real_counts.iter().sum();
    let synth_total: f64 = synth_counts.iter().sum();
    if !(real_total > 0.0) || !(synth_total > 0.0) {
        return Err(Error::Degenerate("all expected counts are zero".into()));
    }
    let mut statistic = 0.0;
    let mut kept = 0usize;
    for (&r, &s) in real_counts.iter().zip(synth_counts) {
        let expected = r / real_total * synth_total;
        if expected > 0.0 {
            statistic += (s - expected) * (s - expected) / expected;
            kept += 1;
        }
    }
    let dropped = real_counts.len() - kept;
    let dof = kept.saturating_sub(1);
    let distance = if dof == 0 {
        if statistic > 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - chi2_survival(statistic, dof)).clamp(0.0, 1.0)
    };
    Ok(Chi2Outcome {
        distance,
        statistic,
        dof,
        dropped_categories: dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDistance {
    pub name: String,
    pub kind: ColumnKind,
    pub distance: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub dropped_categories: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub mean: f64,
    pub per_feature: Vec<FeatureDistance>,
}

/// Per-column χ² (categorical) or KS (continuous) distance and their
/// unweighted mean. Both tables must share one schema.
pub fn marginal_distance(real: &RawTable, synth: &RawTable) -> Result<MarginalReport> {
    if real.schema() != synth.schema() {
        return Err(Error::Schema("real and synthetic tables have different schemas".into()));
    }
    if real.schema().is_empty() {
        return Err(Error::Empty("no columns to compare".into()));
    }
    let mut per_feature = Vec::with_capacity(real.schema().len());
    for (i, spec) in real.schema().columns.iter().enumerate() {
        let feature = match &spec.ty {
            ColumnType::Categorical { vocabulary } => {
                let outcome = chi2_distance(&counts(real, i, vocabulary), &counts(synth, i, vocabulary))?;
                FeatureDistance {
                    name: spec.name.clone(),
                    kind: ColumnKind::Categorical,
                    distance: outcome.distance,
                    dropped_categories: outcome.dropped_categories,
                }
            }
            ColumnType::Continuous { .. } => FeatureDistance {
                name: spec.name.clone(),
                kind: ColumnKind::Continuous,
                distance: ks_distance(&numbers(real, i), &numbers(synth, i))?,
                dropped_categories: 0,
            },
        };
        per_feature.push(feature);
    }
    let mean = per_feature.iter().map(|f| f.distance).sum::<f64>() / per_feature.len() as f64;
    Ok(MarginalReport { mean, per_feature })
}

fn counts(table: &RawTable, column: usize, vocabulary: &[String]) -> Vec<f64> {
    let mut out = vec![0.0; vocabulary.len()];
    for cell in table.column(column) {
        if let Some(k) = cell.as_category().and_then(|c| vocabulary.iter().position(|v| v == c)) {
            out[k] += 1.0;
        }
    }
    out
}

fn numbers(table: &RawTable, column: usize) -> Vec<f64> {
    table.column(column).filter_map(Cell::as_number).collect()
}
