//! Fidelity metrics: pMSE ratio, marginal distance, α-precision /
//! β-recall with AUPRC, and PCA projection histograms.
//!
//! All metrics compare tables in the real table's encoding.

mod logistic;
mod marginal;
mod pca;
mod pmse;
mod precision_recall;
mod report;
mod special;

pub use logistic::{fit_logistic, LogisticFit, DEFAULT_RIDGE};
pub use marginal::{chi2_distance, ks_distance, marginal_distance, Chi2Outcome, FeatureDistance, MarginalReport};
pub use pca::{jacobi_eigen, pca_projection_histogram, PcaProjection, DEFAULT_BINS};
pub use pmse::{expected_pmse, pmse_from_scores, pmse_ratio, PmseScore};
pub use precision_recall::{
    auprc, curve_integral, nearest_rank, precision_recall_curves, PrecisionRecallCurves, DEFAULT_GRID_STEP,
};
pub use report::{evaluate, EvalOptions, FidelityReport, ReportMetadata, RunInfo, SUPPORT_LABEL};
pub use special::{chi2_survival, gamma_p, gamma_q, ln_gamma};
