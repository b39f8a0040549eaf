//! Second-stage analysis of rejections: an LLM jury labels each rejection
//! explanation as a semantic failure, a realism failure, both or neither.

mod agreement;
mod buckets;
mod classify;

pub use agreement::{classification_agreement, CategoryAgreement, ClassificationAgreement, ClassifierRates};
pub use buckets::{bucket_distribution, Bucket, BucketBreakdown, BucketDistribution, BucketRow};
pub use classify::{
    classify_failure_reason, parse_flags, run_classification, ClassificationCache,
    FailureClassification,
};

pub(crate) use classify::classification_key;

use crate::jury::JuryError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FailureError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Jury(#[from] JuryError),
    #[error("statistics error: {0}")]
    Stat(String),
}
