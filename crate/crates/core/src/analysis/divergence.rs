use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::AnalysisError;
use crate::jury::{ItemKind, Verdict};
use crate::metrics::DistanceScore;
use crate::types::{Condition, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Unanimity {
    AllAccept,
    AllReject,
}

/// An image the jury agreed on unanimously whose embedding distance points
/// the other way.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceCase {
    pub image_id: String,
    pub method: Option<Method>,
    pub condition: Condition,
    pub unanimity: Unanimity,
    pub d_rel: f64,
    /// 1-based position within its (condition, unanimity) category.
    pub rank_within_category: usize,
}

/// How the jury split over augmented images. Images lacking a successful
/// verdict from some judge are counted as `incomplete`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnanimityCensus {
    pub total: usize,
    pub all_accept: usize,
    pub all_reject: usize,
    pub mixed: usize,
    pub incomplete: usize,
    pub all_accept_fraction: f64,
    pub all_reject_fraction: f64,
    pub mixed_fraction: f64,
    pub incomplete_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub census: UnanimityCensus,
    pub cases: Vec<DivergenceCase>,
}

struct ImageVotes<'a> {
    condition: Condition,
    method: Option<Method>,
    votes: BTreeMap<&'a str, bool>,
}

/// Per condition, the `top_k` unanimously accepted images with the largest
/// `d_rel` and the `top_k` unanimously rejected images with the smallest.
/// Ties are broken by image id. The jury is every judge with a pair
/// verdict in `verdicts`.
pub fn select_divergent_cases(
    verdicts: &[Verdict],
    scores: &[DistanceScore],
    top_k: usize,
) -> Result<Divergence, AnalysisError> {
    let pairs: Vec<&Verdict> = verdicts.iter().filter(|v| v.kind == ItemKind::Pair).collect();
    let jury: BTreeSet<&str> = pairs.iter().map(|v| v.judge_id.as_str()).collect();
    let mut images: BTreeMap<&str, ImageVotes> = BTreeMap::new();
    for v in &pairs {
        let entry = images.entry(v.item_id.as_str()).or_insert_with(|| ImageVotes {
            condition: v.condition,
            method: v.method,
            votes: BTreeMap::new(),
        });
        if let (true, Some(d)) = (v.is_ok(), v.decision) {
            entry.votes.insert(v.judge_id.as_str(), d);
        }
    }
    let (mut all_accept, mut all_reject, mut mixed, mut incomplete) = (0, 0, 0, 0);
    let mut unanimous: Vec<(&str, &ImageVotes, Unanimity)> = Vec::new();
    for (&id, img) in &images {
        if img.votes.len() < jury.len() {
            incomplete += 1;
        } else if img.votes.values().all(|&d| d) {
            all_accept += 1;
            unanimous.push((id, img, Unanimity::AllAccept));
        } else if img.votes.values().all(|&d| !d) {
            all_reject += 1;
            unanimous.push((id, img, Unanimity::AllReject));
        } else {
            mixed += 1;
        }
    }
    let total = images.len();
    let frac = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    let census = UnanimityCensus {
        total,
        all_accept,
        all_reject,
        mixed,
        incomplete,
        all_accept_fraction: frac(all_accept),
        all_reject_fraction: frac(all_reject),
        mixed_fraction: frac(mixed),
        incomplete_fraction: frac(incomplete),
    };

    let d_rel: HashMap<&str, f64> = scores.iter().map(|s| (s.image_id.as_str(), s.d_rel)).collect();
    type Group<'v> = Vec<(&'v str, &'v ImageVotes<'v>, f64)>;
    let mut groups: BTreeMap<(Condition, Unanimity), Group> = BTreeMap::new();
    for (id, img, u) in unanimous {
        let d = *d_rel.get(id).ok_or_else(|| {
            AnalysisError::Config(format!("no distance score for unanimous image `{id}`"))
        })?;
        groups.entry((img.condition, u)).or_default().push((id, img, d));
    }
    let mut cases = Vec::new();
    for ((condition, unanimity), mut list) in groups {
        list.sort_by(|a, b| {
            let by_d = match unanimity {
                Unanimity::AllAccept => b.2.total_cmp(&a.2),
                Unanimity::AllReject => a.2.total_cmp(&b.2),
            };
            by_d.then(a.0.cmp(b.0))
        });
        for (r, (id, img, d)) in list.into_iter().take(top_k).enumerate() {
            cases.push(DivergenceCase {
                image_id: id.to_string(),
                method: img.method,
                condition,
                unanimity,
                d_rel: d,
                rank_within_category: r + 1,
            });
        }
    }
    Ok(Divergence { census, cases })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jury::CallStatus;

    fn v(item: &str, judge: &str, d: bool) -> Verdict {
        Verdict {
            item_id: item.into(),
            judge_id: judge.into(),
            kind: ItemKind::Pair,
            condition: Condition::Snow,
            method: Some(Method::Flux),
            decision: Some(d),
            explanation: String::new(),
            status: CallStatus::Ok,
            attempts: 1,
            prompt_hash: String::new(),
            timestamp_ms: 0,
        }
    }

    fn s(id: &str, d_rel: f64) -> DistanceScore {
        DistanceScore {
            image_id: id.into(),
            condition: Condition::Snow,
            d_target: d_rel.abs() + 1.0,
            d_background: d_rel.abs() + 1.0 - d_rel,
            d_rel,
            reported: -d_rel,
        }
    }

    #[test]
    fn no_unanimous_items() {
        let vs = [v("a", "j1", true), v("a", "j2", false)];
        let d = select_divergent_cases(&vs, &[], 3).unwrap();
        assert!(d.cases.is_empty());
        assert_eq!(d.census.mixed_fraction, 1.0);
    }

    #[test]
    fn selection_order_and_missing_scores() {
        let mut vs = Vec::new();
        for (id, dec) in [("a", true), ("b", true), ("c", true), ("d", false), ("e", false)] {
            vs.push(v(id, "j1", dec));
            vs.push(v(id, "j2", dec));
        }
        vs.push(v("f", "j1", true));
        let scores = [s("a", 5.0), s("b", 9.0), s("c", 5.0), s("d", 1.0), s("e", -2.0)];
        let d = select_divergent_cases(&vs, &scores, 2).unwrap();
        let got: Vec<(&str, usize)> =
            d.cases.iter().map(|c| (c.image_id.as_str(), c.rank_within_category)).collect();
        assert_eq!(got, [("b", 1), ("a", 2), ("e", 1), ("d", 2)]);
        assert_eq!(d.census.incomplete, 1);
        assert!(select_divergent_cases(&vs, &scores[..4], 2).is_err());
    }
}
