use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use super::stages::{
    baseline_specs, cached_classifications, cached_verdicts, classifiable, classification_cache,
    load_dataset, output_dir, pair_specs, prompts, read_fit, read_scores, require_pair_verdicts,
    verdict_cache, ScoreRow, SCORES_FILE,
};
use super::{PipelineConfig, PipelineError, Stage};
use crate::agreement::{cohen_kappa, ConfidenceInterval, Kappa};
use crate::analysis::{
    acceptance_summary, bias_report, default_subsets, jury_subset_rankings, method_summaries,
    rank_excluding_same_company, rank_methods, select_divergent_cases, AcceptanceSummary,
    CompanyMap, MethodSummary, Ranking, RankingKey, SummarySettings,
};
use crate::failure::{
    bucket_distribution, classification_agreement, Bucket, BucketDistribution, BucketRow,
    CategoryAgreement, FailureClassification,
};
use crate::jury::{AcceptanceRate, CallStatus, Verdict};
use crate::metrics::{baseline_distance_summary, best_method_ratios, DistanceScore};
use crate::types::{Condition, Method, ModelId, Scope};

/// A number printed with a fixed count of decimals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num {
    pub value: f64,
    pub decimals: usize,
}

impl Num {
    pub fn new(value: f64, decimals: usize) -> Self {
        Num { value, decimals }
    }

    /// Rates, fractions and κ: three decimals.
    pub fn rate(value: f64) -> Self {
        Num::new(value, 3)
    }

    /// Distances and percentages: one decimal.
    pub fn one(value: f64) -> Self {
        Num::new(value, 1)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.value.is_finite() {
            return f.write_str("nan");
        }
        let s = format!("{:.*}", self.decimals, self.value);
        // no "-0.0" for values that round to zero
        match s.strip_prefix('-') {
            Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => f.write_str(rest),
            _ => f.write_str(&s),
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.value.is_finite() {
            return s.serialize_none();
        }
        RawValue::from_string(self.to_string())
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

// ---- view types ----

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateView {
    pub accepted: usize,
    pub evaluated: usize,
    pub dropped: usize,
    pub rate: Num,
    pub ci_lo: Num,
    pub ci_hi: Num,
}

impl RateView {
    fn new(rate: &AcceptanceRate, ci: &ConfidenceInterval) -> Self {
        RateView {
            accepted: rate.accepted,
            evaluated: rate.evaluated,
            dropped: rate.dropped,
            rate: Num::rate(rate.rate),
            ci_lo: Num::rate(ci.lo),
            ci_hi: Num::rate(ci.hi),
        }
    }

    fn of(s: &AcceptanceSummary) -> Self {
        RateView::new(&s.rate, &s.ci)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RidgeView {
    pub model: ModelId,
    pub label: String,
    pub n: usize,
    pub ridge_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropView {
    pub judge_id: String,
    /// `augmented` or `real`.
    pub images: &'static str,
    pub evaluated: usize,
    pub parse_errors: usize,
    pub transport_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub split_seed: u64,
    pub bootstrap_seed: u64,
    pub replicates: usize,
    pub level: f64,
    pub resample: crate::analysis::ResampleUnit,
    pub heldout_per_condition: usize,
    pub augmented_images: usize,
    pub heldout_images: usize,
    pub baseline_images: usize,
    pub judges: Vec<String>,
    pub classifiers: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ridge: Vec<RidgeView>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub drops: Vec<DropView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceView {
    pub method: Method,
    pub scope: Scope,
    #[serde(flatten)]
    pub rate: RateView,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JudgeView {
    pub judge_id: String,
    pub augmented: RateView,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub real: Option<RateView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineView {
    pub scope: Scope,
    #[serde(flatten)]
    pub rate: RateView,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaView {
    pub judge_a: String,
    pub judge_b: String,
    pub images: &'static str,
    pub scope: Scope,
    /// Items both judges decided.
    pub n: usize,
    /// Absent when chance agreement is 1 and κ is undefined.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Num>,
    pub degenerate: bool,
    pub observed_agreement: Num,
    pub interpretation: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceView {
    pub method: Method,
    pub scope: Scope,
    pub model: ModelId,
    pub n: usize,
    pub mean_d_rel: Num,
    pub mean_reported: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceBaselineView {
    pub model: ModelId,
    pub condition: Condition,
    pub n: usize,
    pub mean_d_rel: Num,
    pub ci_lo: Num,
    pub ci_hi: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRatioView {
    pub model: ModelId,
    pub condition: Condition,
    pub best_method: Method,
    pub method_mean_d_rel: Num,
    pub baseline_mean_d_rel: Num,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedView {
    pub method: Method,
    pub value: Num,
    pub rank: usize,
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestVsBestView {
    pub generative: Method,
    pub generative_value: Num,
    pub rule_based: Method,
    pub rule_based_value: Num,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingView {
    pub key: RankingKey,
    pub scope: Scope,
    pub entries: Vec<RankedView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_vs_best: Option<BestVsBestView>,
}

impl RankingView {
    fn of(r: &Ranking) -> Self {
        // acceptance values to 3 places with ratios to 2; distances and
        // their ratios to 1
        let (value, ratio) = match r.key {
            RankingKey::Acceptance => (3, 2),
            RankingKey::Distance(_) => (1, 1),
        };
        RankingView {
            key: r.key,
            scope: r.scope,
            entries: r
                .entries
                .iter()
                .map(|e| RankedView {
                    method: e.method,
                    value: Num::new(e.value, value),
                    rank: e.rank,
                    tied: e.tied,
                })
                .collect(),
            best_vs_best: r.best_vs_best.map(|b| BestVsBestView {
                generative: b.generative,
                generative_value: Num::new(b.generative_value, value),
                rule_based: b.rule_based,
                rule_based_value: Num::new(b.rule_based_value, value),
                ratio: b.ratio.map(|x| Num::new(x, ratio)),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasRowView {
    pub judge_id: String,
    pub method: Method,
    pub company: String,
    pub scope: Scope,
    pub judge_accepted: usize,
    pub judge_evaluated: usize,
    pub judge_rate: Num,
    pub overall_accepted: usize,
    pub overall_evaluated: usize,
    pub overall_rate: Num,
    pub delta: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasView {
    pub rows: Vec<BiasRowView>,
    pub excluding_same_company: RankingView,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetView {
    pub name: String,
    pub judges: Vec<String>,
    pub ranking: RankingView,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionView {
    pub top_k: usize,
    pub stable: bool,
    pub subsets: Vec<SubsetView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketView {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    pub total: usize,
    pub both: usize,
    pub semantic_only: usize,
    pub realism_only: usize,
    pub neither: usize,
    pub both_pct: Num,
    pub semantic_only_pct: Num,
    pub realism_only_pct: Num,
    pub neither_pct: Num,
}

impl BucketView {
    fn new(method: Option<Method>, condition: Option<Condition>, d: &BucketDistribution) -> Self {
        let pct = |b| Num::one(d.percent(b));
        BucketView {
            method,
            condition,
            total: d.total,
            both: d.both,
            semantic_only: d.semantic_only,
            realism_only: d.realism_only,
            neither: d.neither,
            both_pct: pct(Bucket::Both),
            semantic_only_pct: pct(Bucket::SemanticOnly),
            realism_only_pct: pct(Bucket::RealismOnly),
            neither_pct: pct(Bucket::Neither),
        }
    }

    fn row(r: &BucketRow) -> Self {
        BucketView::new(r.method, r.condition, &r.distribution)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryView {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fleiss_kappa: Option<Num>,
    pub degenerate: bool,
    pub items_used: usize,
    pub items_dropped: usize,
    pub unanimous_fraction: Num,
    pub majority_fraction: Num,
}

impl CategoryView {
    fn of(c: &CategoryAgreement) -> Self {
        CategoryView {
            fleiss_kappa: c.fleiss.kappa.value().map(Num::rate),
            degenerate: c.fleiss.kappa.value().is_none(),
            items_used: c.fleiss.items_used,
            items_dropped: c.fleiss.items_dropped,
            unanimous_fraction: Num::rate(c.unanimous_fraction),
            majority_fraction: Num::rate(c.majority_fraction),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierView {
    pub llm_judge_id: String,
    pub n: usize,
    pub semantic_rate: Num,
    pub realism_rate: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierAgreementView {
    pub semantic: CategoryView,
    pub realism: CategoryView,
    pub per_classifier: Vec<ClassifierView>,
    pub semantic_spread: Num,
    pub realism_spread: Num,
    pub incomplete: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureView {
    pub rejections: usize,
    pub classifications: usize,
    pub dropped: usize,
    pub overall: BucketView,
    pub by_method: Vec<BucketView>,
    pub by_condition: Vec<BucketView>,
    pub by_method_condition: Vec<BucketView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<ClassifierAgreementView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusView {
    pub total: usize,
    pub all_accept: usize,
    pub all_reject: usize,
    pub mixed: usize,
    pub incomplete: usize,
    pub all_accept_fraction: Num,
    pub all_reject_fraction: Num,
    pub mixed_fraction: Num,
    pub incomplete_fraction: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseView {
    pub image_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    pub condition: Condition,
    pub unanimity: crate::analysis::Unanimity,
    pub d_rel: Num,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceView {
    pub model: ModelId,
    pub top_k: usize,
    pub census: CensusView,
    pub cases: Vec<CaseView>,
}

/// Everything the pipeline reports. Sections whose inputs were not
/// produced are omitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub meta: Meta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<Vec<AcceptanceView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judges: Option<Vec<JudgeView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vlm_baseline: Option<Vec<BaselineView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Vec<KappaView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<DistanceView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_baseline: Option<Vec<DistanceBaselineView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_ratios: Option<Vec<BaselineRatioView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rankings: Option<Vec<RankingView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jury_composition: Option<CompositionView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failures: Option<FailureView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceView>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report views always serialize");
        s.push('\n');
        s
    }
}

// ---- assembly ----

/// Builds the report from the artifacts and caches on disk.
pub fn build_report(config: &PipelineConfig) -> Result<EvaluationReport, PipelineError> {
    assemble(config, Stage::Report)
}

pub(crate) fn assemble(config: &PipelineConfig, stage: Stage) -> Result<EvaluationReport, PipelineError> {
    let fail = PipelineError::stage(stage);
    let analysis = |e: crate::analysis::AnalysisError| fail(&e);
    let ds = load_dataset(config, stage)?;
    let prompts = prompts(config)?;
    let settings = config.summary_settings();
    let method_of = ds.method_of();

    let scores = read_score_rows(config, stage)?;
    let mut augmented_scores: BTreeMap<ModelId, Vec<DistanceScore>> = BTreeMap::new();
    let mut heldout_scores: BTreeMap<ModelId, Vec<DistanceScore>> = BTreeMap::new();
    for row in scores.iter().flatten() {
        let target = if row.method.is_some() { &mut augmented_scores } else { &mut heldout_scores };
        target.entry(row.model_id).or_default().push(row.score.clone());
    }

    let pair = require_pair_verdicts(config, &ds, &prompts, stage)?;
    let baseline_specs = baseline_specs(config, &ds);
    let cache = verdict_cache(config, stage)?;
    let real = cached_verdicts(&cache, &baseline_specs, &config.judges, &prompts)?.require(
        stage,
        Stage::Baseline,
        "verdicts for every sampled real image and judge",
    )?;

    let classifications = match &pair {
        Some(v) if !config.classifiers.is_empty() => {
            let cache = classification_cache(config, stage)?;
            let rejections = classifiable(v);
            cached_classifications(&cache, &rejections, &config.classifiers, &prompts)?
                .require(stage, Stage::Classify, "classifications for every rejection")?
                .map(|c| (rejections.len(), c))
        }
        _ => None,
    };

    let summaries = method_summaries(
        pair.as_deref().unwrap_or(&[]),
        None,
        &augmented_scores,
        &method_of,
        &Scope::ALL,
        &settings,
    )
    .map_err(analysis)?;

    let mut report = EvaluationReport {
        meta: meta(config, &ds, &baseline_specs, pair.as_deref(), real.as_deref(), stage)?,
        acceptance: None,
        judges: None,
        vlm_baseline: None,
        agreement: None,
        distances: None,
        distance_baseline: None,
        baseline_ratios: None,
        rankings: None,
        bias: None,
        jury_composition: None,
        failures: None,
        divergence: None,
    };
    let mut rankings = Vec::new();

    if let Some(verdicts) = &pair {
        report.acceptance = Some(
            summaries
                .iter()
                .filter_map(|s| {
                    s.acceptance.as_ref().map(|a| AcceptanceView {
                        method: s.method,
                        scope: s.scope,
                        rate: RateView::of(a),
                    })
                })
                .collect(),
        );
        report.judges = Some(judge_views(config, verdicts, real.as_deref(), &settings)?);
        let mut kappas = kappa_views(config, verdicts, "augmented");
        if let Some(real) = &real {
            kappas.extend(kappa_views(config, real, "real"));
        }
        report.agreement = Some(kappas);
        let overall = overall_of(&summaries);
        let with_rate: Vec<MethodSummary> =
            overall.iter().filter(|s| s.acceptance.is_some()).cloned().collect();
        if !with_rate.is_empty() {
            rankings.push(RankingView::of(
                &rank_methods(&with_rate, RankingKey::Acceptance).map_err(analysis)?,
            ));
        }
        report.bias = bias_view(config, verdicts, &settings)?;
        report.jury_composition = composition_view(config, verdicts, &settings)?;
        if let Some((rejections, list)) = &classifications {
            report.failures = Some(failure_view(*rejections, list, stage)?);
        }
        let model = config.analysis.divergence_model;
        if let Some(list) = augmented_scores.get(&model) {
            let d = select_divergent_cases(verdicts, list, config.analysis.top_k).map_err(analysis)?;
            let c = d.census;
            report.divergence = Some(DivergenceView {
                model,
                top_k: config.analysis.top_k,
                census: CensusView {
                    total: c.total,
                    all_accept: c.all_accept,
                    all_reject: c.all_reject,
                    mixed: c.mixed,
                    incomplete: c.incomplete,
                    all_accept_fraction: Num::rate(c.all_accept_fraction),
                    all_reject_fraction: Num::rate(c.all_reject_fraction),
                    mixed_fraction: Num::rate(c.mixed_fraction),
                    incomplete_fraction: Num::rate(c.incomplete_fraction),
                },
                cases: d
                    .cases
                    .iter()
                    .map(|k| CaseView {
                        image_id: k.image_id.clone(),
                        method: k.method,
                        condition: k.condition,
                        unanimity: k.unanimity,
                        d_rel: Num::one(k.d_rel),
                        rank: k.rank_within_category,
                    })
                    .collect(),
            });
        }
    }
    if let Some(real) = &real {
        report.vlm_baseline = Some(baseline_views(real, &settings)?);
    }

    if !augmented_scores.is_empty() {
        let mut views = Vec::new();
        for s in &summaries {
            for (&model, d) in &s.distances {
                views.push(DistanceView {
                    method: s.method,
                    scope: s.scope,
                    model,
                    n: d.n,
                    mean_d_rel: Num::one(d.mean_d_rel),
                    mean_reported: Num::one(d.mean_reported),
                });
            }
        }
        report.distances = Some(views);
        let overall = overall_of(&summaries);
        for &model in augmented_scores.keys() {
            let with_distance: Vec<MethodSummary> = overall
                .iter()
                .filter(|s| s.distances.contains_key(&model))
                .cloned()
                .collect();
            if !with_distance.is_empty() {
                rankings.push(RankingView::of(
                    &rank_methods(&with_distance, RankingKey::Distance(model)).map_err(analysis)?,
                ));
            }
        }
    }
    if !heldout_scores.is_empty() {
        let mut base_views = Vec::new();
        let mut ratio_views = Vec::new();
        for (&model, list) in &heldout_scores {
            let conditions: Vec<Condition> =
                list.iter().map(|s| s.condition).collect::<BTreeSet<_>>().into_iter().collect();
            let base = baseline_distance_summary(list, &conditions, &settings.bootstrap.derive(model.as_str()))
                .map_err(|e| fail(&e))?;
            base_views.extend(base.iter().map(|b| DistanceBaselineView {
                model,
                condition: b.condition,
                n: b.n,
                mean_d_rel: Num::one(b.mean_d_rel),
                ci_lo: Num::one(b.ci.lo),
                ci_hi: Num::one(b.ci.hi),
            }));
            let means: BTreeMap<(Method, Condition), f64> = summaries
                .iter()
                .filter_map(|s| match (s.scope, s.distances.get(&model)) {
                    (Scope::Condition(c), Some(d)) => Some(((s.method, c), d.mean_d_rel)),
                    _ => None,
                })
                .collect();
            ratio_views.extend(best_method_ratios(&means, &base).iter().map(|r| BaselineRatioView {
                model,
                condition: r.condition,
                best_method: r.best_method,
                method_mean_d_rel: Num::one(r.method_mean_d_rel),
                baseline_mean_d_rel: Num::one(r.baseline_mean_d_rel),
                ratio: r.ratio.map(Num::one),
            }));
        }
        report.distance_baseline = Some(base_views);
        if !ratio_views.is_empty() {
            report.baseline_ratios = Some(ratio_views);
        }
    }
    if !rankings.is_empty() {
        report.rankings = Some(rankings);
    }
    Ok(report)
}

fn overall_of(summaries: &[MethodSummary]) -> Vec<MethodSummary> {
    summaries.iter().filter(|s| s.scope == Scope::Overall).cloned().collect()
}

fn read_score_rows(config: &PipelineConfig, stage: Stage) -> Result<Option<Vec<ScoreRow>>, PipelineError> {
    let path = output_dir(config).join(SCORES_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let rows = read_scores(&path).map_err(|e| PipelineError::stage(stage)(&e))?;
    let mut expected: BTreeSet<ModelId> = config.embeddings.keys().copied().collect();
    if expected.contains(&ModelId::ClipVitl14) && expected.contains(&ModelId::Dinov3Vitl) {
        expected.insert(ModelId::Concat);
    }
    let present: BTreeSet<ModelId> = rows.iter().map(|r| r.model_id).collect();
    if present != expected {
        return Err(PipelineError::Missing {
            stage,
            needs: Stage::Score,
            what: format!("{SCORES_FILE} for the configured embedding models"),
        });
    }
    Ok(Some(rows))
}

fn meta(
    config: &PipelineConfig,
    ds: &super::Dataset,
    baseline: &[super::stages::ItemSpec],
    pair: Option<&[Verdict]>,
    real: Option<&[Verdict]>,
    stage: Stage,
) -> Result<Meta, PipelineError> {
    let mut ridge = Vec::new();
    if let Some(fit) = read_fit(config, stage)? {
        for (&model, records) in &fit.models {
            ridge.extend(records.iter().map(|r| RidgeView {
                model,
                label: r.label.to_string(),
                n: r.n,
                ridge_lambda: r.ridge_lambda,
            }));
        }
    }
    let mut drops = Vec::new();
    for (images, list) in [("augmented", pair), ("real", real)] {
        let Some(list) = list else { continue };
        for j in &config.judges {
            let mine = || list.iter().filter(|v| v.judge_id == j.judge_id);
            drops.push(DropView {
                judge_id: j.judge_id.clone(),
                images,
                evaluated: mine().filter(|v| v.is_ok()).count(),
                parse_errors: mine().filter(|v| v.status == CallStatus::ParseError).count(),
                transport_errors: mine().filter(|v| v.status == CallStatus::TransportError).count(),
            });
        }
    }
    Ok(Meta {
        split_seed: config.split.seed,
        bootstrap_seed: config.bootstrap.seed,
        replicates: config.bootstrap.replicates,
        level: config.bootstrap.level,
        resample: config.bootstrap.resample,
        heldout_per_condition: config.split.heldout_per_condition,
        augmented_images: pair_specs(ds).len(),
        heldout_images: ds.split.heldout_ids().len(),
        baseline_images: baseline.len(),
        judges: config.judges.iter().map(|j| j.judge_id.clone()).collect(),
        classifiers: config.classifiers.iter().map(|j| j.judge_id.clone()).collect(),
        ridge,
        drops,
    })
}

fn judge_views(
    config: &PipelineConfig,
    pair: &[Verdict],
    real: Option<&[Verdict]>,
    settings: &SummarySettings,
) -> Result<Vec<JudgeView>, PipelineError> {
    let fail = PipelineError::stage(Stage::Report);
    let summary = |list: &[Verdict], judge: &str, images: &str| {
        let mine: Vec<&Verdict> = list.iter().filter(|v| v.judge_id == judge).collect();
        if !mine.iter().any(|v| v.is_ok()) {
            return Ok(None);
        }
        acceptance_summary(&mine, settings, &format!("judge/{judge}/{images}"))
            .map(|s| Some(RateView::of(&s)))
            .map_err(|e| fail(&e))
    };
    let mut out = Vec::new();
    for j in &config.judges {
        let Some(augmented) = summary(pair, &j.judge_id, "augmented")? else { continue };
        let real = match real {
            Some(list) => summary(list, &j.judge_id, "real")?,
            None => None,
        };
        out.push(JudgeView {
            judge_id: j.judge_id.clone(),
            augmented,
            real,
        });
    }
    Ok(out)
}

fn baseline_views(real: &[Verdict], settings: &SummarySettings) -> Result<Vec<BaselineView>, PipelineError> {
    let mut out = Vec::new();
    for scope in Scope::ALL {
        let pool: Vec<&Verdict> = real.iter().filter(|v| scope.includes(v.condition)).collect();
        if !pool.iter().any(|v| v.is_ok()) {
            continue;
        }
        let s = acceptance_summary(&pool, settings, &format!("baseline/{scope}"))
            .map_err(|e| PipelineError::stage(Stage::Report)(&e))?;
        out.push(BaselineView {
            scope,
            rate: RateView::of(&s),
        });
    }
    Ok(out)
}

/// Cohen's κ for every judge pair, per condition and overall.
fn kappa_views(config: &PipelineConfig, verdicts: &[Verdict], images: &'static str) -> Vec<KappaView> {
    let mut items: Vec<(&str, Condition)> = Vec::new();
    let mut decisions: HashMap<(&str, &str), bool> = HashMap::new();
    let mut seen = BTreeSet::new();
    for v in verdicts {
        if seen.insert(v.item_id.as_str()) {
            items.push((v.item_id.as_str(), v.condition));
        }
        if let (true, Some(d)) = (v.is_ok(), v.decision) {
            decisions.insert((v.item_id.as_str(), v.judge_id.as_str()), d);
        }
    }
    let judges: Vec<&str> = config.judges.iter().map(|j| j.judge_id.as_str()).collect();
    let mut out = Vec::new();
    for (i, a) in judges.iter().enumerate() {
        for b in &judges[i + 1..] {
            for scope in Scope::ALL {
                let in_scope: Vec<&str> = items
                    .iter()
                    .filter(|(_, c)| scope.includes(*c))
                    .map(|(id, _)| *id)
                    .collect();
                let col = |j: &str| -> Vec<Option<bool>> {
                    in_scope.iter().map(|id| decisions.get(&(*id, j)).copied()).collect()
                };
                let (xa, xb) = (col(a), col(b));
                let n = xa.iter().zip(&xb).filter(|(x, y)| x.is_some() && y.is_some()).count();
                let Ok(kappa) = cohen_kappa(&xa, &xb) else { continue };
                let observed = match kappa {
                    Kappa::Degenerate { observed_agreement } => observed_agreement,
                    Kappa::Value(_) => {
                        let agree = xa
                            .iter()
                            .zip(&xb)
                            .filter(|(x, y)| x.is_some() && x == y)
                            .count();
                        agree as f64 / n as f64
                    }
                };
                out.push(KappaView {
                    judge_a: a.to_string(),
                    judge_b: b.to_string(),
                    images,
                    scope,
                    n,
                    kappa: kappa.value().map(Num::rate),
                    degenerate: kappa.value().is_none(),
                    observed_agreement: Num::rate(observed),
                    interpretation: kappa.interpretation(),
                });
            }
        }
    }
    out
}

fn company_map(config: &PipelineConfig) -> Result<CompanyMap, PipelineError> {
    let mut map = CompanyMap {
        judges: config
            .judges
            .iter()
            .map(|j| (j.judge_id.clone(), j.company.clone()))
            .collect(),
        methods: CompanyMap::default_methods(),
    };
    if let Some(path) = &config.company_map {
        let file = CompanyMap::load(&config.path(path))
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
        map.judges.extend(file.judges);
        map.methods.extend(file.methods);
    }
    Ok(map)
}

fn bias_view(
    config: &PipelineConfig,
    verdicts: &[Verdict],
    settings: &SummarySettings,
) -> Result<Option<BiasView>, PipelineError> {
    let fail = PipelineError::stage(Stage::Report);
    let companies = company_map(config)?;
    let rows = bias_report(verdicts, &companies).map_err(|e| fail(&e))?;
    let ranking = rank_excluding_same_company(verdicts, &companies, settings).map_err(|e| fail(&e))?;
    Ok(Some(BiasView {
        rows: rows
            .iter()
            .map(|r| BiasRowView {
                judge_id: r.judge_id.clone(),
                method: r.method,
                company: r.company.clone(),
                scope: r.scope,
                judge_accepted: r.judge.accepted,
                judge_evaluated: r.judge.evaluated,
                judge_rate: Num::rate(r.judge.rate),
                overall_accepted: r.overall.accepted,
                overall_evaluated: r.overall.evaluated,
                overall_rate: Num::rate(r.overall.rate),
                delta: Num::rate(r.delta),
            })
            .collect(),
        excluding_same_company: RankingView::of(&ranking),
    }))
}

fn composition_view(
    config: &PipelineConfig,
    verdicts: &[Verdict],
    settings: &SummarySettings,
) -> Result<Option<CompositionView>, PipelineError> {
    let present: BTreeSet<&str> = verdicts
        .iter()
        .filter(|v| v.is_ok())
        .map(|v| v.judge_id.as_str())
        .collect();
    let judges: Vec<String> = config
        .judges
        .iter()
        .filter(|j| present.contains(j.judge_id.as_str()))
        .map(|j| j.judge_id.clone())
        .collect();
    let subsets = if config.analysis.jury_subsets.is_empty() {
        if judges.len() < 2 {
            return Ok(None);
        }
        default_subsets(&judges)
    } else {
        config.analysis.jury_subsets.clone()
    };
    let r = jury_subset_rankings(verdicts, &subsets, config.analysis.stability_k, settings)
        .map_err(|e| PipelineError::stage(Stage::Report)(&e))?;
    Ok(Some(CompositionView {
        top_k: r.top_k,
        stable: r.stable,
        subsets: r
            .subsets
            .iter()
            .map(|s| SubsetView {
                name: s.name.clone(),
                judges: s.judges.clone(),
                ranking: RankingView::of(&s.ranking),
            })
            .collect(),
    }))
}

fn failure_view(
    rejections: usize,
    list: &[FailureClassification],
    stage: Stage,
) -> Result<FailureView, PipelineError> {
    let fail = PipelineError::stage(stage);
    let b = bucket_distribution(list).map_err(|e| fail(&e))?;
    let classifiers: BTreeSet<&str> = list.iter().map(|c| c.llm_judge_id.as_str()).collect();
    let agreement = if classifiers.len() >= 2 {
        let a = classification_agreement(list).map_err(|e| fail(&e))?;
        Some(ClassifierAgreementView {
            semantic: CategoryView::of(&a.semantic),
            realism: CategoryView::of(&a.realism),
            per_classifier: a
                .per_classifier
                .iter()
                .map(|c| ClassifierView {
                    llm_judge_id: c.llm_judge_id.clone(),
                    n: c.n,
                    semantic_rate: Num::rate(c.semantic_rate),
                    realism_rate: Num::rate(c.realism_rate),
                })
                .collect(),
            semantic_spread: Num::rate(a.semantic_spread),
            realism_spread: Num::rate(a.realism_spread),
            incomplete: a.incomplete,
        })
    } else {
        None
    };
    Ok(FailureView {
        rejections,
        classifications: list.len(),
        dropped: b.dropped,
        overall: BucketView::new(None, None, &b.overall),
        by_method: b.by_method.iter().map(BucketView::row).collect(),
        by_condition: b.by_condition.iter().map(BucketView::row).collect(),
        by_method_condition: b.by_method_condition.iter().map(BucketView::row).collect(),
        agreement,
    })
}

// ---- emission ----

fn rate_cell(r: &RateView) -> String {
    format!("{} [{}, {}] ({}/{}, {} dropped)", r.rate, r.ci_lo, r.ci_hi, r.accepted, r.evaluated, r.dropped)
}

fn ranking_lines(out: &mut String, r: &RankingView) {
    let _ = writeln!(out, "  {} ({})", r.key, r.scope);
    for e in &r.entries {
        let tie = if e.tied { " (tied)" } else { "" };
        let _ = writeln!(out, "    {}. {:<15} {}{tie}", e.rank, e.method.as_str(), e.value);
    }
    if let Some(b) = &r.best_vs_best {
        let ratio = b.ratio.map_or("n/a".to_string(), |x| format!("{x}x"));
        let _ = writeln!(
            out,
            "    best generative {} ({}) vs best rule-based {} ({}): {ratio}",
            b.generative, b.generative_value, b.rule_based, b.rule_based_value
        );
    }
}

/// Plain-text summary of the same numbers as the JSON report.
pub fn render_text(r: &EvaluationReport) -> String {
    let mut out = String::new();
    let m = &r.meta;
    let _ = writeln!(out, "Realism evaluation report");
    let _ = writeln!(
        out,
        "split seed {}, bootstrap seed {} ({} replicates, level {}, resampling {:?})",
        m.split_seed, m.bootstrap_seed, m.replicates, m.level, m.resample
    );
    let _ = writeln!(
        out,
        "{} augmented images, {} held-out real images ({} shown to judges)",
        m.augmented_images, m.heldout_images, m.baseline_images
    );
    if !m.judges.is_empty() {
        let _ = writeln!(out, "judges: {}", m.judges.join(", "));
    }
    if !m.classifiers.is_empty() {
        let _ = writeln!(out, "classifiers: {}", m.classifiers.join(", "));
    }
    for d in &m.drops {
        let _ = writeln!(
            out,
            "  {} on {} images: {} decided, {} parse errors, {} transport errors",
            d.judge_id, d.images, d.evaluated, d.parse_errors, d.transport_errors
        );
    }
    for x in &m.ridge {
        let _ = writeln!(out, "  ridge {}/{}: n={} lambda={}", x.model, x.label, x.n, x.ridge_lambda);
    }
    if let Some(rows) = &r.acceptance {
        let _ = writeln!(out, "\nAcceptance by method");
        for a in rows {
            let _ = writeln!(out, "  {:<15} {:<8} {}", a.method.as_str(), a.scope.to_string(), rate_cell(&a.rate));
        }
    }
    if let Some(rows) = &r.judges {
        let _ = writeln!(out, "\nAcceptance by judge");
        for j in rows {
            let real = j.real.as_ref().map_or("n/a".to_string(), rate_cell);
            let _ = writeln!(out, "  {:<15} augmented {}; real {real}", j.judge_id, rate_cell(&j.augmented));
        }
    }
    if let Some(rows) = &r.vlm_baseline {
        let _ = writeln!(out, "\nReal-image baseline");
        for b in rows {
            let _ = writeln!(out, "  {:<8} {}", b.scope.to_string(), rate_cell(&b.rate));
        }
    }
    if let Some(rows) = &r.agreement {
        let _ = writeln!(out, "\nInter-judge agreement (Cohen's kappa)");
        for k in rows {
            let kappa = k.kappa.map_or("undefined".to_string(), |x| x.to_string());
            let _ = writeln!(
                out,
                "  {}-{} {:<9} {:<8} kappa {kappa} ({}), observed {} over {}",
                k.judge_a, k.judge_b, k.images, k.scope.to_string(), k.interpretation, k.observed_agreement, k.n
            );
        }
    }
    if let Some(rows) = &r.distances {
        let _ = writeln!(out, "\nRelative Mahalanobis distance (d_rel; lower is closer)");
        for d in rows {
            let _ = writeln!(
                out,
                "  {:<15} {:<8} {:<12} {} (reported {}, n={})",
                d.method.as_str(), d.scope.to_string(), d.model.as_str(), d.mean_d_rel, d.mean_reported, d.n
            );
        }
    }
    if let Some(rows) = &r.distance_baseline {
        let _ = writeln!(out, "\nHeld-out real distance baseline");
        for b in rows {
            let _ = writeln!(
                out,
                "  {:<12} {:<6} {} [{}, {}] (n={})",
                b.model.as_str(), b.condition.as_str(), b.mean_d_rel, b.ci_lo, b.ci_hi, b.n
            );
        }
    }
    if let Some(rows) = &r.baseline_ratios {
        let _ = writeln!(out, "\nBest method against baseline");
        for b in rows {
            let ratio = b.ratio.map_or("n/a".to_string(), |x| format!("{x}x"));
            let _ = writeln!(
                out,
                "  {:<12} {:<6} {} {} vs {}: {ratio}",
                b.model.as_str(), b.condition.as_str(), b.best_method, b.method_mean_d_rel, b.baseline_mean_d_rel
            );
        }
    }
    if let Some(rows) = &r.rankings {
        let _ = writeln!(out, "\nRankings");
        for k in rows {
            ranking_lines(&mut out, k);
        }
    }
    if let Some(b) = &r.bias {
        let _ = writeln!(out, "\nSame-company judging");
        if b.rows.is_empty() {
            let _ = writeln!(out, "  no judge shares a company with a method");
        }
        for x in &b.rows {
            let _ = writeln!(
                out,
                "  {} on {} ({}) {:<8} judge {} vs all {} (delta {})",
                x.judge_id, x.method, x.company, x.scope.to_string(), x.judge_rate, x.overall_rate, x.delta
            );
        }
        let _ = writeln!(out, "  ranking without same-company judgments:");
        ranking_lines(&mut out, &b.excluding_same_company);
    }
    if let Some(c) = &r.jury_composition {
        let _ = writeln!(
            out,
            "\nJury composition (top {} order {})",
            c.top_k,
            if c.stable { "stable" } else { "changes" }
        );
        for s in &c.subsets {
            let order: Vec<String> = s
                .ranking
                .entries
                .iter()
                .map(|e| format!("{} {}", e.method, e.value))
                .collect();
            let _ = writeln!(out, "  {:<20} [{}] {}", s.name, s.judges.join(","), order.join(" > "));
        }
    }
    if let Some(f) = &r.failures {
        let _ = writeln!(
            out,
            "\nFailure reasons ({} rejections, {} classifications, {} dropped)",
            f.rejections, f.classifications, f.dropped
        );
        let line = |out: &mut String, label: &str, b: &BucketView| {
            let _ = writeln!(
                out,
                "  {label:<24} both {}% semantic {}% realism {}% neither {}% (n={})",
                b.both_pct, b.semantic_only_pct, b.realism_only_pct, b.neither_pct, b.total
            );
        };
        line(&mut out, "overall", &f.overall);
        for b in f.by_method.iter().chain(&f.by_condition).chain(&f.by_method_condition) {
            let label = match (b.method, b.condition) {
                (Some(m), Some(c)) => format!("{m}/{c}"),
                (Some(m), None) => m.to_string(),
                (None, Some(c)) => c.to_string(),
                (None, None) => "unknown".to_string(),
            };
            line(&mut out, &label, b);
        }
        if let Some(a) = &f.agreement {
            for (name, c) in [("semantic", &a.semantic), ("realism", &a.realism)] {
                let kappa = c.fleiss_kappa.map_or("undefined".to_string(), |x| x.to_string());
                let _ = writeln!(
                    out,
                    "  {name} Fleiss kappa {kappa}, unanimous {}, majority {} (n={})",
                    c.unanimous_fraction, c.majority_fraction, c.items_used
                );
            }
            for c in &a.per_classifier {
                let _ = writeln!(
                    out,
                    "  {} semantic {} realism {} (n={})",
                    c.llm_judge_id, c.semantic_rate, c.realism_rate, c.n
                );
            }
        }
    }
    if let Some(d) = &r.divergence {
        let c = &d.census;
        let _ = writeln!(
            out,
            "\nJury unanimity over {} images: {} all accept ({}), {} all reject ({}), {} mixed ({}), {} incomplete",
            c.total, c.all_accept, c.all_accept_fraction, c.all_reject, c.all_reject_fraction, c.mixed,
            c.mixed_fraction, c.incomplete
        );
        let _ = writeln!(out, "Divergent cases ({}, top {} per category)", d.model, d.top_k);
        for k in &d.cases {
            let method = k.method.map_or("none", Method::as_str);
            let _ = writeln!(
                out,
                "  {:<6} {:?} #{} {} ({method}) d_rel {}",
                k.condition.as_str(), k.unanimity, k.rank, k.image_id, k.d_rel
            );
        }
    }
    out
}

/// Writes the report in `format` to `path`, creating parent directories.
pub fn emit_report(report: &EvaluationReport, format: Format, path: &Path) -> Result<(), PipelineError> {
    let fail = PipelineError::stage(Stage::Report);
    let text = match format {
        Format::Json => report.to_json(),
        Format::Text => render_text(report),
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| fail(&format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| fail(&format!("{}: {e}", path.display())))
}
