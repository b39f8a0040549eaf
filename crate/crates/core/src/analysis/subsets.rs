use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{method_summaries, rank_methods, AnalysisError, MethodSummary, Ranking, RankingKey,
    SummarySettings};
use crate::jury::Verdict;
use crate::types::{Method, Scope};

/// A named jury composition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JurySubset {
    pub name: String,
    pub judges: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetRanking {
    pub name: String,
    pub judges: Vec<String>,
    pub summaries: Vec<MethodSummary>,
    pub ranking: Ranking,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetRankings {
    pub subsets: Vec<SubsetRanking>,
    pub top_k: usize,
    /// Whether the first `top_k` methods appear in the same order under
    /// every subset.
    pub stable: bool,
}

/// The full jury, each judge alone and, with three or more judges, each
/// leave-one-out jury.
pub fn default_subsets(judges: &[String]) -> Vec<JurySubset> {
    let mut out = vec![JurySubset {
        name: "full".into(),
        judges: judges.to_vec(),
    }];
    if judges.len() < 2 {
        return out;
    }
    for j in judges {
        out.push(JurySubset {
            name: format!("only:{j}"),
            judges: vec![j.clone()],
        });
    }
    if judges.len() >= 3 {
        for j in judges {
            out.push(JurySubset {
                name: format!("without:{j}"),
                judges: judges.iter().filter(|k| *k != j).cloned().collect(),
            });
        }
    }
    out
}

/// Recomputes overall method acceptance under each jury composition and
/// checks whether the leading order survives.
pub fn jury_subset_rankings(
    verdicts: &[Verdict],
    subsets: &[JurySubset],
    top_k: usize,
    settings: &SummarySettings,
) -> Result<SubsetRankings, AnalysisError> {
    let present: BTreeSet<&str> = verdicts.iter().map(|v| v.judge_id.as_str()).collect();
    let mut out = Vec::with_capacity(subsets.len());
    for subset in subsets {
        if subset.judges.is_empty() {
            return Err(AnalysisError::Config(format!("jury subset `{}` is empty", subset.name)));
        }
        if let Some(j) = subset.judges.iter().find(|j| !present.contains(j.as_str())) {
            return Err(AnalysisError::Config(format!(
                "jury subset `{}` names judge `{j}` with no verdicts",
                subset.name
            )));
        }
        let judges: BTreeSet<String> = subset.judges.iter().cloned().collect();
        let summaries: Vec<MethodSummary> = method_summaries(
            verdicts,
            Some(&judges),
            &BTreeMap::new(),
            &HashMap::new(),
            &[Scope::Overall],
            settings,
        )?
        .into_iter()
        .filter(|s| s.acceptance.is_some())
        .collect();
        let ranking = rank_methods(&summaries, RankingKey::Acceptance)?;
        out.push(SubsetRanking {
            name: subset.name.clone(),
            judges: subset.judges.clone(),
            summaries,
            ranking,
        });
    }
    let head = |r: &SubsetRanking| -> Vec<Method> {
        r.ranking.order().into_iter().take(top_k).collect()
    };
    let stable = out.windows(2).all(|w| head(&w[0]) == head(&w[1]));
    Ok(SubsetRankings {
        subsets: out,
        top_k,
        stable,
    })
}
