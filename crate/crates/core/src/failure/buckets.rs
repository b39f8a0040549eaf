use std::collections::BTreeMap;

use serde::Serialize;

use super::{FailureClassification, FailureError};
use crate::types::{Condition, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    Both,
    SemanticOnly,
    RealismOnly,
    Neither,
}

impl Bucket {
    pub const ALL: [Bucket; 4] = [
        Bucket::Both,
        Bucket::SemanticOnly,
        Bucket::RealismOnly,
        Bucket::Neither,
    ];

    pub fn of(semantic: bool, realism: bool) -> Self {
        match (semantic, realism) {
            (true, true) => Bucket::Both,
            (true, false) => Bucket::SemanticOnly,
            (false, true) => Bucket::RealismOnly,
            (false, false) => Bucket::Neither,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::Both => "both",
            Bucket::SemanticOnly => "semantic_only",
            Bucket::RealismOnly => "realism_only",
            Bucket::Neither => "neither",
        }
    }
}

/// Counts per bucket. The unit is one classifier judgment of one failure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BucketDistribution {
    pub total: usize,
    pub both: usize,
    pub semantic_only: usize,
    pub realism_only: usize,
    pub neither: usize,
}

impl BucketDistribution {
    pub fn from_counts(both: usize, semantic_only: usize, realism_only: usize, neither: usize) -> Self {
        BucketDistribution {
            total: both + semantic_only + realism_only + neither,
            both,
            semantic_only,
            realism_only,
            neither,
        }
    }

    fn add(&mut self, b: Bucket) {
        self.total += 1;
        match b {
            Bucket::Both => self.both += 1,
            Bucket::SemanticOnly => self.semantic_only += 1,
            Bucket::RealismOnly => self.realism_only += 1,
            Bucket::Neither => self.neither += 1,
        }
    }

    pub fn count(&self, b: Bucket) -> usize {
        match b {
            Bucket::Both => self.both,
            Bucket::SemanticOnly => self.semantic_only,
            Bucket::RealismOnly => self.realism_only,
            Bucket::Neither => self.neither,
        }
    }

    /// Share of `total` in percent (0 when empty).
    pub fn percent(&self, b: Bucket) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.count(b) as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    #[serde(flatten)]
    pub distribution: BucketDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketBreakdown {
    pub overall: BucketDistribution,
    pub by_method: Vec<BucketRow>,
    pub by_condition: Vec<BucketRow>,
    pub by_method_condition: Vec<BucketRow>,
    /// Classifications without usable flags.
    pub dropped: usize,
}

/// Places every answered classification in exactly one bucket, overall and
/// per method, condition and method × condition.
pub fn bucket_distribution(
    classifications: &[FailureClassification],
) -> Result<BucketBreakdown, FailureError> {
    let mut overall = BucketDistribution::default();
    let mut by_method: BTreeMap<Option<Method>, BucketDistribution> = BTreeMap::new();
    let mut by_condition: BTreeMap<Condition, BucketDistribution> = BTreeMap::new();
    let mut by_both: BTreeMap<(Option<Method>, Condition), BucketDistribution> = BTreeMap::new();
    let mut dropped = 0;
    for c in classifications {
        let Some((s, r)) = c.flags() else {
            dropped += 1;
            continue;
        };
        let b = Bucket::of(s, r);
        overall.add(b);
        by_method.entry(c.method).or_default().add(b);
        by_condition.entry(c.condition).or_default().add(b);
        by_both.entry((c.method, c.condition)).or_default().add(b);
    }
    if overall.total == 0 {
        return Err(FailureError::Stat(format!(
            "no usable classifications ({dropped} dropped)"
        )));
    }
    let row = |method, condition, distribution| BucketRow {
        method,
        condition,
        distribution,
    };
    Ok(BucketBreakdown {
        overall,
        by_method: by_method.into_iter().map(|(m, d)| row(m, None, d)).collect(),
        by_condition: by_condition.into_iter().map(|(c, d)| row(None, Some(c), d)).collect(),
        by_method_condition: by_both.into_iter().map(|((m, c), d)| row(m, Some(c), d)).collect(),
        dropped,
    })
}
