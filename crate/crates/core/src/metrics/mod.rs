//! Reference Gaussians and (relative) Mahalanobis scoring.

mod gaussian;
mod relative;
mod summary;

pub use gaussian::{
    fit_gaussian, mahalanobis_distance, GaussianLabel, GaussianModel, DEFAULT_RIDGE_LAMBDA,
    MAX_RIDGE_LAMBDA,
};
pub use relative::{relative_mahalanobis, score_batch, DistanceScore};
pub use summary::{
    baseline_distance_summary, best_method_ratios, distance_ratio, BaselineRatio,
    ConditionDistanceSummary,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("fit error: {0}")]
    Fit(String),
    #[error("conditioning error: {0}")]
    Conditioning(String),
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("statistics error: {0}")]
    Stat(String),
}
