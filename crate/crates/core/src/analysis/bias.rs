use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{method_summaries, rank_methods, AnalysisError, Ranking, RankingKey, SummarySettings};
use crate::jury::{acceptance_rate, AcceptanceRate, ItemKind, Verdict};
use crate::types::{Method, Scope};

/// Which organisation is behind each judge and each augmentation method.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CompanyMap {
    pub judges: BTreeMap<String, String>,
    pub methods: BTreeMap<Method, String>,
}

impl CompanyMap {
    /// Providers of the built-in methods. The rule-based libraries have no
    /// corporate owner and map to themselves, so they never pair with a
    /// judge.
    pub fn default_methods() -> BTreeMap<Method, String> {
        [
            (Method::Imgaug, "imgaug"),
            (Method::Albumentations, "albumentations"),
            (Method::Openai, "openai"),
            (Method::Gemini, "google"),
            (Method::Qwen, "alibaba"),
            (Method::Flux, "black-forest-labs"),
        ]
        .into_iter()
        .map(|(m, c)| (m, c.to_string()))
        .collect()
    }

    /// Parses `judge.<id> = <company>` and `method.<name> = <company>`
    /// lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, AnalysisError> {
        let mut map = CompanyMap::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| AnalysisError::Config(format!("company map line {}: {msg}", n + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(err("empty company"));
            }
            let fresh = if let Some(judge) = key.strip_prefix("judge.") {
                map.judges.insert(judge.to_string(), value.to_string()).is_none()
            } else if let Some(method) = key.strip_prefix("method.") {
                let m: Method = method.parse().map_err(|_| err(&format!("unknown method `{method}`")))?;
                map.methods.insert(m, value.to_string()).is_none()
            } else {
                return Err(err("key must start with `judge.` or `method.`"));
            };
            if !fresh {
                return Err(err(&format!("duplicate key `{key}`")));
            }
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let text = fs::read_to_string(path)
            .map_err(|e| AnalysisError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn judge(&self, id: &str) -> Result<&str, AnalysisError> {
        self.judges
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| AnalysisError::Config(format!("judge `{id}` has no company")))
    }

    fn method(&self, m: Method) -> Result<&str, AnalysisError> {
        self.methods
            .get(&m)
            .map(String::as_str)
            .ok_or_else(|| AnalysisError::Config(format!("method `{m}` has no company")))
    }

    fn check_covers(&self, verdicts: &[&Verdict]) -> Result<(), AnalysisError> {
        for v in verdicts {
            self.judge(&v.judge_id)?;
            if let Some(m) = v.method {
                self.method(m)?;
            }
        }
        Ok(())
    }
}

/// A judge scoring augmentations from its own company, against all judges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasRow {
    pub judge_id: String,
    pub method: Method,
    pub company: String,
    pub scope: Scope,
    pub judge: AcceptanceRate,
    pub overall: AcceptanceRate,
    /// `judge.rate - overall.rate`.
    pub delta: f64,
}

fn augmented(verdicts: &[Verdict]) -> Vec<&Verdict> {
    verdicts.iter().filter(|v| v.kind == ItemKind::Pair && v.method.is_some()).collect()
}

/// Same-company (judge, method) rows for every condition and overall.
/// Empty when no judge shares a company with a method.
pub fn bias_report(verdicts: &[Verdict], companies: &CompanyMap) -> Result<Vec<BiasRow>, AnalysisError> {
    let pool = augmented(verdicts);
    companies.check_covers(&pool)?;
    let judges: BTreeSet<&str> = pool.iter().map(|v| v.judge_id.as_str()).collect();
    let methods: BTreeSet<Method> = pool.iter().filter_map(|v| v.method).collect();
    let mut rows = Vec::new();
    for &judge in &judges {
        let company = companies.judge(judge)?;
        for &method in &methods {
            if companies.method(method)? != company {
                continue;
            }
            for scope in Scope::ALL {
                let cell = |v: &Verdict| v.method == Some(method) && scope.includes(v.condition);
                let (Ok(own), Ok(overall)) = (
                    acceptance_rate(pool.iter().copied(), |v| cell(v) && v.judge_id == judge),
                    acceptance_rate(pool.iter().copied(), cell),
                ) else {
                    continue;
                };
                rows.push(BiasRow {
                    judge_id: judge.to_string(),
                    method,
                    company: company.to_string(),
                    scope,
                    judge: own,
                    overall,
                    delta: own.rate - overall.rate,
                });
            }
        }
    }
    Ok(rows)
}

/// Overall acceptance ranking with every same-company judgment removed.
pub fn rank_excluding_same_company(
    verdicts: &[Verdict],
    companies: &CompanyMap,
    settings: &SummarySettings,
) -> Result<Ranking, AnalysisError> {
    let pool = augmented(verdicts);
    companies.check_covers(&pool)?;
    let mut kept = Vec::with_capacity(pool.len());
    for v in pool {
        let m = v.method.expect("augmented verdicts carry a method");
        if companies.judge(&v.judge_id)? != companies.method(m)? {
            kept.push(v.clone());
        }
    }
    let summaries: Vec<_> = method_summaries(
        &kept,
        None,
        &BTreeMap::new(),
        &HashMap::new(),
        &[Scope::Overall],
        settings,
    )?
    .into_iter()
    .filter(|s| s.acceptance.is_some())
    .collect();
    rank_methods(&summaries, RankingKey::Acceptance)
}
