use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{FailureClassification, FailureError};
use crate::agreement::{fleiss_kappa, FleissKappa, RatingTable};

/// Agreement among classifiers on one failure category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CategoryAgreement {
    pub fleiss: FleissKappa,
    /// Share of fully classified failures where every classifier agreed.
    pub unanimous_fraction: f64,
    /// Share where the classifiers split (a majority decided).
    pub majority_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierRates {
    pub llm_judge_id: String,
    pub n: usize,
    pub semantic_rate: f64,
    pub realism_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationAgreement {
    pub semantic: CategoryAgreement,
    pub realism: CategoryAgreement,
    pub per_classifier: Vec<ClassifierRates>,
    /// Max minus min positive rate across classifiers.
    pub semantic_spread: f64,
    pub realism_spread: f64,
    /// Failures not classified by every classifier.
    pub incomplete: usize,
}

/// Items × classifiers tables for both categories. A failure is identified
/// by (item, VLM judge).
fn tables(
    classifications: &[FailureClassification],
) -> Result<(RatingTable, RatingTable), FailureError> {
    let raters: Vec<String> = classifications
        .iter()
        .map(|c| c.llm_judge_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    type Flags = Vec<Option<(bool, bool)>>;
    let mut rows: BTreeMap<(String, String), Flags> = BTreeMap::new();
    for c in classifications {
        let r = raters.binary_search(&c.llm_judge_id).expect("rater collected above");
        let row = rows
            .entry((c.item_id.clone(), c.vlm_judge_id.clone()))
            .or_insert_with(|| vec![None; raters.len()]);
        row[r] = c.flags();
    }
    let items: Vec<String> = rows.keys().map(|(i, v)| format!("{i}/{v}")).collect();
    let column = |pick: fn((bool, bool)) -> bool| -> Vec<Vec<Option<bool>>> {
        rows.values().map(|row| row.iter().map(|f| f.map(pick)).collect()).collect()
    };
    let stat = |e: crate::agreement::StatError| FailureError::Stat(e.to_string());
    Ok((
        RatingTable::new(items.clone(), raters.clone(), column(|f| f.0)).map_err(stat)?,
        RatingTable::new(items, raters, column(|f| f.1)).map_err(stat)?,
    ))
}

fn category(table: &RatingTable) -> Result<CategoryAgreement, FailureError> {
    let fleiss = fleiss_kappa(table).map_err(|e| FailureError::Stat(e.to_string()))?;
    let complete: Vec<&Vec<Option<bool>>> = table
        .labels()
        .iter()
        .filter(|row| row.iter().all(Option::is_some))
        .collect();
    let unanimous = complete
        .iter()
        .filter(|row| row.iter().all(|l| *l == row[0]))
        .count();
    let n = complete.len() as f64;
    Ok(CategoryAgreement {
        fleiss,
        unanimous_fraction: unanimous as f64 / n,
        majority_fraction: (complete.len() - unanimous) as f64 / n,
    })
}

/// Fleiss' κ per category, unanimity shares and per-classifier rates.
pub fn classification_agreement(
    classifications: &[FailureClassification],
) -> Result<ClassificationAgreement, FailureError> {
    let (semantic_table, realism_table) = tables(classifications)?;
    let semantic = category(&semantic_table)?;
    let realism = category(&realism_table)?;
    let per_classifier: Vec<ClassifierRates> = semantic_table
        .raters()
        .iter()
        .enumerate()
        .map(|(r, id)| {
            let s: Vec<bool> = semantic_table.column(r).into_iter().flatten().collect();
            let re: Vec<bool> = realism_table.column(r).into_iter().flatten().collect();
            let rate = |xs: &[bool]| {
                if xs.is_empty() {
                    0.0
                } else {
                    xs.iter().filter(|&&x| x).count() as f64 / xs.len() as f64
                }
            };
            ClassifierRates {
                llm_judge_id: id.clone(),
                n: s.len(),
                semantic_rate: rate(&s),
                realism_rate: rate(&re),
            }
        })
        .collect();
    let spread = |f: fn(&ClassifierRates) -> f64| {
        let vals = per_classifier.iter().map(f);
        vals.clone().fold(f64::NEG_INFINITY, f64::max) - vals.fold(f64::INFINITY, f64::min)
    };
    Ok(ClassificationAgreement {
        semantic_spread: spread(|c| c.semantic_rate),
        realism_spread: spread(|c| c.realism_rate),
        incomplete: semantic.fleiss.items_dropped,
        semantic,
        realism,
        per_classifier,
    })
}
