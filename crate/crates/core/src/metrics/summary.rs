use std::collections::BTreeMap;

use serde::Serialize;

use super::{DistanceScore, MetricsError};
use crate::agreement::{bootstrap_ci, BootstrapSettings, ConfidenceInterval};
use crate::types::{Condition, Method};

/// Mean relative distance of one condition group, with a bootstrap CI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionDistanceSummary {
    pub condition: Condition,
    pub n: usize,
    pub mean_d_rel: f64,
    pub ci: ConfidenceInterval,
}

/// Per-condition mean `d_rel` of (typically held-out real) images.
pub fn baseline_distance_summary(
    scores: &[DistanceScore],
    conditions: &[Condition],
    bootstrap: &BootstrapSettings,
) -> Result<Vec<ConditionDistanceSummary>, MetricsError> {
    conditions
        .iter()
        .map(|&condition| {
            let values: Vec<f64> = scores
                .iter()
                .filter(|s| s.condition == condition)
                .map(|s| s.d_rel)
                .collect();
            if values.is_empty() {
                return Err(MetricsError::Stat(format!("no scores for {condition}")));
            }
            let ci = bootstrap_ci(
                &values,
                &bootstrap.derive(&format!("distance-baseline/{condition}")),
            )
            .map_err(|e| MetricsError::Stat(e.to_string()))?;
            Ok(ConditionDistanceSummary {
                condition,
                n: values.len(),
                mean_d_rel: ci.point,
                ci,
            })
        })
        .collect()
}

/// How many times further than the real baseline an augmentation sits.
pub fn distance_ratio(method_mean_d_rel: f64, baseline_mean_d_rel: f64) -> Option<f64> {
    (baseline_mean_d_rel != 0.0).then(|| method_mean_d_rel / baseline_mean_d_rel)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRatio {
    pub condition: Condition,
    pub best_method: Method,
    pub method_mean_d_rel: f64,
    pub baseline_mean_d_rel: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

/// For each baseline condition, the method with the smallest mean `d_rel`
/// and its ratio to the baseline mean.
pub fn best_method_ratios(
    method_means: &BTreeMap<(Method, Condition), f64>,
    baselines: &[ConditionDistanceSummary],
) -> Vec<BaselineRatio> {
    baselines
        .iter()
        .filter_map(|b| {
            let (best_method, mean) = method_means
                .iter()
                .filter(|((_, c), _)| *c == b.condition)
                .map(|((m, _), &v)| (*m, v))
                .min_by(|x, y| x.1.total_cmp(&y.1))?;
            Some(BaselineRatio {
                condition: b.condition,
                best_method,
                method_mean_d_rel: mean,
                baseline_mean_d_rel: b.mean_d_rel,
                ratio: distance_ratio(mean, b.mean_d_rel),
            })
        })
        .collect()
}
