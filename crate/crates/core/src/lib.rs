//! Realism evaluation for synthetic adverse-condition driving imagery.
//!
//! Two independent signals are combined: distributional proximity of an
//! augmented image's embedding to real adverse-condition imagery (relative
//! Mahalanobis distance), and a jury of vision-language judges that accept or
//! reject each augmentation. The [`pipeline`] module ties both together with
//! the statistics in [`agreement`], [`analysis`] and [`failure`].

pub mod agreement;
pub mod analysis;
pub mod failure;
pub mod fixture;
pub mod jury;
pub mod metrics;
pub mod pipeline;
pub mod store;
pub mod types;
mod util;

pub use types::{Condition, Method, ModelId, Role, Scope};
