use serde::{Deserialize, Serialize};

use crate::data::{encode, RawTable};
use crate::error::Result;

use super::logistic::DEFAULT_RIDGE;
use super::marginal::{marginal_distance, FeatureDistance};
use super::pmse::pmse_ratio;
use super::precision_recall::{auprc, precision_recall_curves, PrecisionRecallCurves, DEFAULT_GRID_STEP};

pub const SUPPORT_LABEL: &str = "mean-centered-hypersphere";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub ridge: f64,
    pub grid_step: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            ridge: DEFAULT_RIDGE,
            grid_step: DEFAULT_GRID_STEP,
        }
    }
}

/// Provenance of the synthetic table, filled in by callers that know it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub dataset: Option<String>,
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub epsilon_target: Option<f64>,
    pub epsilon_spent: Option<f64>,
    pub delta: Option<f64>,
    /// Direction of the categorical KL term, for the denoising variant.
    pub kl_direction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub real_rows: usize,
    pub synth_rows: usize,
    pub encoded_width: usize,
    /// Parameter count in the pMSE expectation (encoded width + intercept).
    pub pmse_d: usize,
    pub pmse_observed: f64,
    pub pmse_expected: f64,
    pub ridge: f64,
    pub grid_step: f64,
    pub support: String,
    /// True when some categorical feature had real-unused categories
    /// dropped from its χ² sum.
    pub categories_dropped: bool,
    #[serde(default)]
    pub run: RunInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub pmse_ratio: f64,
    pub marginal_distance: f64,
    pub alpha_precision_integral: f64,
    pub beta_recall_integral: f64,
    pub auprc: f64,
    pub per_feature: Vec<FeatureDistance>,
    pub curves: PrecisionRecallCurves,
    pub metadata: ReportMetadata,
}

impl FidelityReport {
    pub fn summary_line(&self) -> String {
        format!(
            "pMSE={:.6} MD={:.6} P={:.6} R={:.6} AUPRC={:.6}",
            self.pmse_ratio,
            self.marginal_distance,
            self.alpha_precision_integral,
            self.beta_recall_integral,
            self.auprc
        )
    }
}

/// Scores `synth` against `real`. The synthetic table is re-expressed under
/// the real schema first, so both are encoded by the real transform.
pub fn evaluate(real: &RawTable, synth: &RawTable, options: &EvalOptions) -> Result<FidelityReport> {
    let synth = synth.conform_to(real.schema())?;
    let real_enc = encode(real)?;
    let synth_enc = encode(&synth)?;
    let pmse = pmse_ratio(&real_enc, &synth_enc, options.ridge)?;
    let marginal = marginal_distance(real, &synth)?;
    let curves = precision_recall_curves(real_enc.values.view(), synth_enc.values.view(), options.grid_step)?;
    let (alpha_integral, beta_integral, product) = auprc(&curves);
    Ok(FidelityReport {
        pmse_ratio: pmse.ratio,
        marginal_distance: marginal.mean,
        alpha_precision_integral: alpha_integral,
        beta_recall_integral: beta_integral,
        auprc: product,
        metadata: ReportMetadata {
            real_rows: real.n_rows(),
            synth_rows: synth.n_rows(),
            encoded_width: real_enc.width(),
            pmse_d: pmse.d,
            pmse_observed: pmse.observed,
            pmse_expected: pmse.expected,
            ridge: options.ridge,
            grid_step: options.grid_step,
            support: SUPPORT_LABEL.to_owned(),
            categories_dropped: marginal.per_feature.iter().any(|f| f.dropped_categories > 0),
            run: RunInfo::default(),
        },
        per_feature: marginal.per_feature,
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Cell, ColumnSpec, TableSchema};
    use crate::rng::seeded;
    use rand::Rng;

    fn random_table(rows: usize, seed: u64) -> RawTable {
        let schema = TableSchema::new(vec![
            ColumnSpec::continuous("a", -3.0, 3.0, false),
            ColumnSpec::categorical("b", vec!["x".into(), "y".into(), "z".into()]),
        ])
        .unwrap();
        let mut rng = seeded(seed);
        let rows = (0..rows)
            .map(|_| {
                vec![
                    Cell::Number(rng.random::<f64>() * 6.0 - 3.0),
                    Cell::Category(["x", "y", "z"][rng.random_range(0..3)].into()),
                ]
            })
            .collect();
        RawTable::new(schema, rows).unwrap()
    }

    #[test]
    fn self_evaluation_has_zero_marginal_distance() {
        let t = random_table(300, 1);
        let r = evaluate(&t, &t, &EvalOptions::default()).unwrap();
        assert_eq!(r.marginal_distance, 0.0);
        assert_eq!(r.auprc, r.alpha_precision_integral * r.beta_recall_integral);
        assert_eq!(r.metadata.pmse_d, r.metadata.encoded_width + 1);
        assert_eq!(r.metadata.support, SUPPORT_LABEL);
        for v in [r.marginal_distance, r.alpha_precision_integral, r.beta_recall_integral, r.auprc] {
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(r.pmse_ratio >= 0.0);
    }

    #[test]
    fn report_serializes_documented_keys() {
        let a = random_table(100, 2);
        let b = random_table(80, 3);
        let json = serde_json::to_value(evaluate(&a, &b, &EvalOptions::default()).unwrap()).unwrap();
        for key in [
            "pmse_ratio",
            "marginal_distance",
            "alpha_precision_integral",
            "beta_recall_integral",
            "auprc",
            "per_feature",
            "metadata",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["metadata"]["synth_rows"], 80);
    }
}
