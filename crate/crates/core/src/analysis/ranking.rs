use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{AnalysisError, MethodSummary};
use crate::types::{Method, ModelId, Scope};

/// What methods are ranked by. Both keys rank higher values first: the
/// acceptance rate, or the mean reported distance (i.e. ascending `d_rel`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RankingKey {
    Acceptance,
    Distance(ModelId),
}

impl fmt::Display for RankingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankingKey::Acceptance => f.write_str("acceptance"),
            RankingKey::Distance(m) => write!(f, "distance:{m}"),
        }
    }
}

impl Serialize for RankingKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl RankingKey {
    fn value(self, s: &MethodSummary) -> Option<f64> {
        match self {
            RankingKey::Acceptance => s.acceptance.map(|a| a.ci.point),
            RankingKey::Distance(m) => s.mean_reported_distance(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankedMethod {
    pub method: Method,
    pub value: f64,
    /// Competition rank: equal values share a rank and the next is skipped.
    pub rank: usize,
    pub tied: bool,
}

/// Best generative method against the best rule-based one.
///
/// For acceptance the ratio is generative over rule-based; for distance it
/// is rule-based `d_rel` over generative `d_rel` (how many times further
/// the rule-based output sits), defined only when both are positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestVsBest {
    pub generative: Method,
    pub generative_value: f64,
    pub rule_based: Method,
    pub rule_based_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub key: RankingKey,
    pub scope: Scope,
    pub entries: Vec<RankedMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_vs_best: Option<BestVsBest>,
}

impl Ranking {
    pub fn order(&self) -> Vec<Method> {
        self.entries.iter().map(|e| e.method).collect()
    }

    pub fn rank_of(&self, method: Method) -> Option<usize> {
        self.entries.iter().find(|e| e.method == method).map(|e| e.rank)
    }
}

/// Orders one scope's summaries by `key`. Ties keep the fixed method order.
pub fn rank_methods(
    summaries: &[MethodSummary],
    key: RankingKey,
) -> Result<Ranking, AnalysisError> {
    let first = summaries
        .first()
        .ok_or_else(|| AnalysisError::Config("nothing to rank".into()))?;
    let scope = first.scope;
    let mut seen = BTreeSet::new();
    let mut rows = Vec::with_capacity(summaries.len());
    for s in summaries {
        if s.scope != scope {
            return Err(AnalysisError::Config(format!(
                "summaries mix scopes {scope} and {}",
                s.scope
            )));
        }
        if !seen.insert(s.method) {
            return Err(AnalysisError::Config(format!("duplicate entry for {}", s.method)));
        }
        let value = key.value(s).ok_or_else(|| {
            AnalysisError::Config(format!("{} has no {key} value for {scope}", s.method))
        })?;
        rows.push((s.method, value));
    }
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut entries: Vec<RankedMethod> = Vec::with_capacity(rows.len());
    for (i, &(method, value)) in rows.iter().enumerate() {
        let rank = match entries.last() {
            Some(prev) if prev.value == value => prev.rank,
            _ => i + 1,
        };
        entries.push(RankedMethod {
            method,
            value,
            rank,
            tied: false,
        });
    }
    for i in 0..entries.len() {
        let r = entries[i].rank;
        entries[i].tied = entries.iter().filter(|e| e.rank == r).count() > 1;
    }
    let best = |generative: bool| entries.iter().find(|e| e.method.is_generative() == generative);
    let best_vs_best = match (best(true), best(false)) {
        (Some(g), Some(r)) => Some(BestVsBest {
            generative: g.method,
            generative_value: g.value,
            rule_based: r.method,
            rule_based_value: r.value,
            ratio: match key {
                RankingKey::Acceptance => (r.value != 0.0).then(|| g.value / r.value),
                // reported values are −d_rel
                RankingKey::Distance(_) => {
                    (g.value < 0.0 && r.value < 0.0).then(|| r.value / g.value)
                }
            },
        }),
        _ => None,
    };
    Ok(Ranking {
        key,
        scope,
        entries,
        best_vs_best,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::agreement::ConfidenceInterval;
    use crate::analysis::{AcceptanceSummary, DistanceMean};
    use crate::jury::AcceptanceRate;

    pub(crate) fn acc(method: Method, rate: f64) -> MethodSummary {
        MethodSummary {
            method,
            scope: Scope::Overall,
            acceptance: Some(AcceptanceSummary {
                rate: AcceptanceRate {
                    accepted: 0,
                    evaluated: 1,
                    dropped: 0,
                    rate,
                },
                ci: ConfidenceInterval::exact(rate),
            }),
            distances: BTreeMap::new(),
        }
    }

    #[test]
    fn singleton_and_ties() {
        let r = rank_methods(&[acc(Method::Flux, 0.4)], RankingKey::Acceptance).unwrap();
        assert_eq!(r.entries[0].rank, 1);
        assert!(r.best_vs_best.is_none());

        let r = rank_methods(
            &[acc(Method::Qwen, 0.5), acc(Method::Flux, 0.5), acc(Method::Imgaug, 0.1)],
            RankingKey::Acceptance,
        )
        .unwrap();
        let ranks: Vec<usize> = r.entries.iter().map(|e| e.rank).collect();
        assert_eq!(ranks, [1, 1, 3]);
        assert!(r.entries[0].tied && !r.entries[2].tied);
    }

    #[test]
    fn rejects_duplicates_and_missing_keys() {
        let dup = [acc(Method::Qwen, 0.5), acc(Method::Qwen, 0.4)];
        assert!(matches!(rank_methods(&dup, RankingKey::Acceptance), Err(AnalysisError::Config(_))));
        assert!(rank_methods(&[], RankingKey::Acceptance).is_err());
        assert!(rank_methods(&[acc(Method::Qwen, 0.5)], RankingKey::Distance(ModelId::ClipVitl14))
            .is_err());
    }

    #[test]
    fn distance_ranking_uses_reported_sign() {
        let dist = |method, d_rel: f64| MethodSummary {
            method,
            scope: Scope::Overall,
            acceptance: None,
            distances: BTreeMap::from([(
                ModelId::ClipVitl14,
                DistanceMean {
                    n: 1,
                    mean_d_rel: d_rel,
                    mean_reported: -d_rel,
                },
            )]),
        };
        let r = rank_methods(
            &[dist(Method::Imgaug, 201.5), dist(Method::Openai, 46.5), dist(Method::Qwen, 53.7)],
            RankingKey::Distance(ModelId::ClipVitl14),
        )
        .unwrap();
        assert_eq!(r.order(), [Method::Openai, Method::Qwen, Method::Imgaug]);
        let b = r.best_vs_best.unwrap();
        assert_eq!((b.generative, b.rule_based), (Method::Openai, Method::Imgaug));
        assert!((b.ratio.unwrap() - 201.5 / 46.5).abs() < 1e-12);
    }
}
