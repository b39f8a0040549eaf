//! Inter-rater agreement and bootstrap confidence intervals.

mod bootstrap;
mod kappa;

pub use bootstrap::{bootstrap_ci, bootstrap_cluster_ci, BootstrapSettings, ConfidenceInterval};
pub use kappa::{cohen_kappa, fleiss_kappa, FleissKappa, Kappa, RatingTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("statistics error: {0}")]
pub struct StatError(pub String);
