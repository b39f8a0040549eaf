use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mahalanobis_distance, GaussianModel, MetricsError};
use crate::store::EmbeddingMatrix;
use crate::types::Condition;

/// Standard and relative Mahalanobis distances for one image.
///
/// `reported` is the negated relative distance, so larger means closer to
/// the target condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceScore {
    pub image_id: String,
    pub condition: Condition,
    pub d_target: f64,
    pub d_background: f64,
    pub d_rel: f64,
    pub reported: f64,
}

pub fn relative_mahalanobis(
    image_id: &str,
    condition: Condition,
    x: &[f64],
    target: &GaussianModel,
    background: &GaussianModel,
) -> Result<DistanceScore, MetricsError> {
    if target.dim() != background.dim() {
        return Err(MetricsError::Dim(format!(
            "target has dim {}, background has dim {}",
            target.dim(),
            background.dim()
        )));
    }
    let d_target = mahalanobis_distance(x, target)?;
    let d_background = mahalanobis_distance(x, background)?;
    let d_rel = d_target - d_background;
    Ok(DistanceScore {
        image_id: image_id.to_string(),
        condition,
        d_target,
        d_background,
        d_rel,
        reported: -d_rel,
    })
}

/// Scores every row of `matrix` against the model of its assigned condition.
///
/// Rows are scored independently (in parallel); output order follows the
/// matrix.
pub fn score_batch(
    matrix: &EmbeddingMatrix,
    assignments: &HashMap<String, Condition>,
    models: &BTreeMap<Condition, GaussianModel>,
    background: &GaussianModel,
) -> Result<Vec<DistanceScore>, MetricsError> {
    let mut jobs = Vec::with_capacity(matrix.len());
    for (i, id) in matrix.row_ids().iter().enumerate() {
        let condition = *assignments
            .get(id)
            .ok_or_else(|| MetricsError::Config(format!("no condition assigned to `{id}`")))?;
        let model = models
            .get(&condition)
            .ok_or_else(|| MetricsError::Config(format!("no fitted model for {condition}")))?;
        jobs.push((i, condition, model));
    }
    jobs.into_par_iter()
        .map(|(i, condition, model)| {
            relative_mahalanobis(
                &matrix.row_ids()[i],
                condition,
                &matrix.row_f64(i),
                model,
                background,
            )
        })
        .collect()
}
