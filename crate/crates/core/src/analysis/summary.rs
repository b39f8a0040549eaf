use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::agreement::{bootstrap_ci, bootstrap_cluster_ci, BootstrapSettings, ConfidenceInterval};
use crate::jury::{acceptance_rate, AcceptanceRate, ItemKind, Verdict};
use crate::metrics::DistanceScore;
use crate::types::{Method, ModelId, Scope};

/// What one bootstrap draw resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleUnit {
    /// Individual judge decisions, pooled across judges.
    #[default]
    Judgments,
    /// Whole images, keeping all judges' decisions on an image together.
    Images,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummarySettings {
    pub bootstrap: BootstrapSettings,
    pub resample: ResampleUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptanceSummary {
    #[serde(flatten)]
    pub rate: AcceptanceRate,
    pub ci: ConfidenceInterval,
}

/// Pooled acceptance rate of `verdicts` with a bootstrap CI. `tag` names the
/// cell so each one gets its own resampling stream.
pub fn acceptance_summary(
    verdicts: &[&Verdict],
    settings: &SummarySettings,
    tag: &str,
) -> Result<AcceptanceSummary, AnalysisError> {
    let rate = acceptance_rate(verdicts.iter().copied(), |_| true)
        .map_err(|e| AnalysisError::Stat(e.to_string()))?;
    let bootstrap = settings.bootstrap.derive(tag);
    let decided = verdicts
        .iter()
        .filter_map(|v| v.is_ok().then_some(v.decision).flatten().map(|d| (v, d)));
    let ci = match settings.resample {
        ResampleUnit::Judgments => {
            let xs: Vec<f64> = decided.map(|(_, d)| f64::from(u8::from(d))).collect();
            bootstrap_ci(&xs, &bootstrap)
        }
        ResampleUnit::Images => {
            let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for (v, d) in decided {
                groups
                    .entry(v.item_id.as_str())
                    .or_default()
                    .push(f64::from(u8::from(d)));
            }
            let clusters: Vec<Vec<f64>> = groups.into_values().collect();
            bootstrap_cluster_ci(&clusters, &bootstrap)
        }
    }
    .map_err(|e| AnalysisError::Stat(e.to_string()))?;
    Ok(AcceptanceSummary { rate, ci })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceMean {
    pub n: usize,
    pub mean_d_rel: f64,
    /// Negated `mean_d_rel`; higher is closer to the target condition.
    pub mean_reported: f64,
}

/// Acceptance and distance summary of one method within one scope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub scope: Scope,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<AcceptanceSummary>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub distances: BTreeMap<ModelId, DistanceMean>,
}

impl MethodSummary {
    pub fn mean_reported_distance(&self, model: ModelId) -> Option<f64> {
        self.distances.get(&model).map(|d| d.mean_reported)
    }
}

/// Summaries for every method and requested scope that has any pair
/// verdicts or distance scores. `judges` restricts the verdict pool;
/// `method_of` maps scored image ids to their augmentation method.
pub fn method_summaries(
    verdicts: &[Verdict],
    judges: Option<&BTreeSet<String>>,
    scores: &BTreeMap<ModelId, Vec<DistanceScore>>,
    method_of: &HashMap<String, Method>,
    scopes: &[Scope],
    settings: &SummarySettings,
) -> Result<Vec<MethodSummary>, AnalysisError> {
    let mut out = Vec::new();
    for method in Method::ALL {
        for &scope in scopes {
            let pool: Vec<&Verdict> = verdicts
                .iter()
                .filter(|v| {
                    v.kind == ItemKind::Pair
                        && v.method == Some(method)
                        && scope.includes(v.condition)
                        && judges.is_none_or(|j| j.contains(&v.judge_id))
                })
                .collect();
            let acceptance = if pool.iter().any(|v| v.is_ok()) {
                Some(acceptance_summary(
                    &pool,
                    settings,
                    &format!("acceptance/{method}/{scope}"),
                )?)
            } else {
                None
            };
            let mut distances = BTreeMap::new();
            for (&model, list) in scores {
                let values: Vec<f64> = list
                    .iter()
                    .filter(|s| {
                        scope.includes(s.condition) && method_of.get(&s.image_id) == Some(&method)
                    })
                    .map(|s| s.d_rel)
                    .collect();
                if !values.is_empty() {
                    let mean = values.iter().sum::<f64>() / values.len() as f64;
                    distances.insert(
                        model,
                        DistanceMean {
                            n: values.len(),
                            mean_d_rel: mean,
                            mean_reported: -mean,
                        },
                    );
                }
            }
            if acceptance.is_some() || !distances.is_empty() {
                out.push(MethodSummary {
                    method,
                    scope,
                    acceptance,
                    distances,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jury::CallStatus;
    use crate::types::Condition;

    pub(crate) fn pair(item: &str, judge: &str, m: Method, c: Condition, d: Option<bool>) -> Verdict {
        Verdict {
            item_id: item.into(),
            judge_id: judge.into(),
            kind: ItemKind::Pair,
            condition: c,
            method: Some(m),
            decision: d,
            explanation: "e".into(),
            status: if d.is_some() { CallStatus::Ok } else { CallStatus::ParseError },
            attempts: 1,
            prompt_hash: "h".into(),
            timestamp_ms: 0,
        }
    }

    fn settings(resample: ResampleUnit) -> SummarySettings {
        SummarySettings {
            bootstrap: BootstrapSettings {
                replicates: 500,
                ..BootstrapSettings::new(4)
            },
            resample,
        }
    }

    #[test]
    fn pooled_rate_and_drop_counts() {
        // 3 judges x 2 images, decisions T,T,F,T,F,T plus one parse failure
        let ds = [true, true, false, true, false, true];
        let mut vs: Vec<Verdict> = ds
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                pair(&format!("i{}", k / 3), &format!("j{}", k % 3), Method::Qwen, Condition::Fog, Some(d))
            })
            .collect();
        vs.push(pair("i2", "j0", Method::Qwen, Condition::Fog, None));
        let s = method_summaries(
            &vs,
            None,
            &BTreeMap::new(),
            &HashMap::new(),
            &[Scope::Overall],
            &settings(ResampleUnit::Judgments),
        )
        .unwrap();
        assert_eq!(s.len(), 1);
        let a = s[0].acceptance.unwrap();
        assert_eq!((a.rate.accepted, a.rate.evaluated, a.rate.dropped), (4, 6, 1));
        assert_eq!(a.ci.point, 4.0 / 6.0);
        let by_image = method_summaries(
            &vs,
            None,
            &BTreeMap::new(),
            &HashMap::new(),
            &[Scope::Overall],
            &settings(ResampleUnit::Images),
        )
        .unwrap();
        assert_eq!(by_image[0].acceptance.unwrap().ci.point, a.ci.point);
    }

    #[test]
    fn distances_are_grouped_by_method_and_scope() {
        let score = |id: &str, c: Condition, d: f64| DistanceScore {
            image_id: id.into(),
            condition: c,
            d_target: d + 1.0,
            d_background: 1.0,
            d_rel: d,
            reported: -d,
        };
        let scores = BTreeMap::from([(
            ModelId::ClipVitl14,
            vec![score("a", Condition::Fog, 2.0), score("b", Condition::Rain, 4.0)],
        )]);
        let method_of = HashMap::from([
            ("a".to_string(), Method::Flux),
            ("b".to_string(), Method::Flux),
        ]);
        let s = method_summaries(
            &[],
            None,
            &scores,
            &method_of,
            &Scope::ALL,
            &settings(ResampleUnit::Judgments),
        )
        .unwrap();
        let overall = s.iter().find(|s| s.scope == Scope::Overall).unwrap();
        assert_eq!(overall.mean_reported_distance(ModelId::ClipVitl14), Some(-3.0));
        assert!(overall.acceptance.is_none());
        assert_eq!(s.len(), 3);
    }
}
