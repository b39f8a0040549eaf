use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PipelineConfig, PipelineError, Stage};
use crate::failure::{classification_key, run_classification, ClassificationCache, FailureClassification};
use crate::jury::{
    run_jury, verdict_key, CallStatus, EvaluationItem, HttpTransport, ItemKind, JudgeConfig,
    MockTransport, PromptSet, RoutingTransport, Transport, Verdict, VerdictCache,
};
use crate::metrics::{fit_gaussian, score_batch, DistanceScore, GaussianLabel, GaussianModel};
use crate::store::{
    concat_embeddings, load_embeddings, split_holdout, EmbeddingMatrix, ImageRecord, Manifest, Split,
};
use crate::types::{Condition, Method, ModelId, Role};
use crate::util::{derive_seed, sha256_hex};

pub const FIT_FILE: &str = "fit.json";
pub const SCORES_FILE: &str = "scores.tsv";

const SCORES_HEADER: &str =
    "image_id\tcondition\tmethod\tmodel_id\td_target\td_background\td_rel\treported";

fn fail(stage: Stage) -> impl Fn(&dyn std::fmt::Display) -> PipelineError {
    PipelineError::stage(stage)
}

/// Manifest plus the held-out split derived from it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub split: Split,
}

impl Dataset {
    pub fn method_of(&self) -> HashMap<String, Method> {
        self.manifest
            .records
            .iter()
            .filter_map(|r| r.method.map(|m| (r.image_id.clone(), m)))
            .collect()
    }

    fn augmented(&self) -> impl Iterator<Item = &ImageRecord> {
        self.manifest.with_role(Role::Augmented)
    }
}

pub fn load_dataset(config: &PipelineConfig, stage: Stage) -> Result<Dataset, PipelineError> {
    let manifest = Manifest::load(&config.path(&config.manifest)).map_err(|e| fail(stage)(&e))?;
    let split = split_holdout(&manifest.records, &config.split_spec()).map_err(|e| fail(stage)(&e))?;
    Ok(Dataset { manifest, split })
}

/// What a judge is asked about, without the image bytes.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ItemSpec {
    pub item_id: String,
    pub kind: ItemKind,
    pub condition: Condition,
    pub method: Option<Method>,
    pub source_id: Option<String>,
}

impl ItemSpec {
    fn prompt_hash(&self, prompts: &PromptSet) -> Result<String, PipelineError> {
        let prompt = match self.kind {
            ItemKind::Pair => prompts.render_pair(self.condition.as_str()),
            ItemKind::Single => prompts.render_single(self.condition.as_str()),
        }
        .map_err(|e| PipelineError::Validation(format!("{}: {e}", self.item_id)))?;
        Ok(sha256_hex(prompt.as_bytes()))
    }
}

/// Every augmented image, in manifest order.
pub(crate) fn pair_specs(ds: &Dataset) -> Vec<ItemSpec> {
    ds.augmented()
        .map(|r| ItemSpec {
            item_id: r.image_id.clone(),
            kind: ItemKind::Pair,
            condition: r.condition,
            method: r.method,
            source_id: r.source_id.clone(),
        })
        .collect()
}

/// `baseline_per_condition` held-out real images per condition, drawn with
/// a seed derived from the split seed and kept in split order.
pub(crate) fn baseline_specs(config: &PipelineConfig, ds: &Dataset) -> Vec<ItemSpec> {
    let mut out = Vec::new();
    for (&condition, ids) in &ds.split.heldout {
        let quota = config.jury.baseline_per_condition.min(ids.len());
        let mut order: Vec<usize> = (0..ids.len()).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(config.split.seed, &format!("vlm-baseline/{condition}")));
        order.shuffle(&mut rng);
        let mut chosen = order[..quota].to_vec();
        chosen.sort_unstable();
        out.extend(chosen.into_iter().map(|i| ItemSpec {
            item_id: ids[i].clone(),
            kind: ItemKind::Single,
            condition,
            method: None,
            source_id: None,
        }));
    }
    out
}

fn image_bytes(
    config: &PipelineConfig,
    ds: &Dataset,
    image_id: &str,
    stage: Stage,
) -> Result<Vec<u8>, PipelineError> {
    let record = ds
        .manifest
        .get(image_id)
        .ok_or_else(|| fail(stage)(&format!("image `{image_id}` is not in the manifest")))?;
    let file = record
        .file_path
        .as_deref()
        .ok_or_else(|| fail(stage)(&format!("image `{image_id}` has no file in the manifest")))?;
    let root = config.path(config.image_root.as_deref().unwrap_or(Path::new("")));
    let path = root.join(file);
    fs::read(&path).map_err(|e| fail(stage)(&format!("{}: {e}", path.display())))
}

fn load_items(
    config: &PipelineConfig,
    ds: &Dataset,
    specs: &[ItemSpec],
    stage: Stage,
) -> Result<Vec<EvaluationItem>, PipelineError> {
    specs
        .iter()
        .map(|s| {
            let evaluated = image_bytes(config, ds, &s.item_id, stage)?;
            match s.kind {
                ItemKind::Single => Ok(EvaluationItem::single(&s.item_id, evaluated, s.condition)),
                ItemKind::Pair => {
                    let source = s.source_id.as_deref().ok_or_else(|| {
                        fail(stage)(&format!("augmented image `{}` has no source", s.item_id))
                    })?;
                    let original = image_bytes(config, ds, source, stage)?;
                    let method = s.method.expect("augmented records carry a method");
                    Ok(EvaluationItem::pair(&s.item_id, original, evaluated, s.condition, method))
                }
            }
        })
        .collect()
}

/// Pair items for every augmented image.
pub fn pair_items(config: &PipelineConfig, ds: &Dataset) -> Result<Vec<EvaluationItem>, PipelineError> {
    load_items(config, ds, &pair_specs(ds), Stage::Judge)
}

/// Single items for the sampled held-out real images.
pub fn baseline_items(
    config: &PipelineConfig,
    ds: &Dataset,
) -> Result<Vec<EvaluationItem>, PipelineError> {
    load_items(config, ds, &baseline_specs(config, ds), Stage::Baseline)
}

/// Mock judges read the configured script; anything else goes over HTTP.
pub fn build_transport(config: &PipelineConfig) -> Result<RoutingTransport, PipelineError> {
    let mut mock = MockTransport::new();
    if let Some(script) = &config.jury.mock_script {
        mock.load(&config.path(script))
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
    }
    let needs_http = config.judges.iter().chain(&config.classifiers).any(|j| !j.is_mock());
    let http = if needs_http {
        Some(
            HttpTransport::new(Duration::from_secs(config.jury.timeout_secs))
                .map_err(|e| PipelineError::Validation(e.to_string()))?,
        )
    } else {
        None
    };
    Ok(RoutingTransport { mock, http })
}

/// Checks run before any stage: referenced inputs exist, so a bad config
/// fails before any network call.
pub(crate) fn preflight(config: &PipelineConfig, stages: &[Stage]) -> Result<(), PipelineError> {
    let first = stages.first().copied().unwrap_or(Stage::Analyze);
    let manifest = config.path(&config.manifest);
    if !manifest.is_file() {
        return Err(fail(first)(&format!("manifest {} not found", manifest.display())));
    }
    if let Some(stage) = stages.iter().copied().find(|s| matches!(s, Stage::Fit | Stage::Score)) {
        for (model, path) in &config.embeddings {
            let p = config.path(path);
            if !p.is_file() {
                return Err(fail(stage)(&format!("{model} embeddings {} not found", p.display())));
            }
        }
    }
    let calls = |s: &Stage| matches!(s, Stage::Judge | Stage::Baseline);
    if stages.iter().any(calls) && config.judges.is_empty() {
        return Err(PipelineError::Validation("no judges configured".into()));
    }
    if stages.contains(&Stage::Classify) && config.classifiers.is_empty() {
        return Err(PipelineError::Validation("no classifiers configured".into()));
    }
    if let Some(dir) = &config.prompt_dir {
        let p = config.path(dir);
        if !p.is_dir() {
            return Err(PipelineError::Validation(format!(
                "prompt_dir {} is not a directory",
                p.display()
            )));
        }
    }
    Ok(())
}

pub(crate) fn prompts(config: &PipelineConfig) -> Result<PromptSet, PipelineError> {
    let dir = config.prompt_dir.as_ref().map(|d| config.path(d));
    PromptSet::load(dir.as_deref()).map_err(|e| PipelineError::Validation(e.to_string()))
}

pub(crate) fn verdict_cache(config: &PipelineConfig, stage: Stage) -> Result<VerdictCache, PipelineError> {
    VerdictCache::open(&config.path(&config.jury.cache)).map_err(|e| fail(stage)(&e))
}

pub(crate) fn classification_cache(
    config: &PipelineConfig,
    stage: Stage,
) -> Result<ClassificationCache, PipelineError> {
    ClassificationCache::open(&config.path(&config.classification.cache)).map_err(|e| fail(stage)(&e))
}

// ---- fit ----

/// One fitted Gaussian as recorded in `fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub label: GaussianLabel,
    pub n: usize,
    pub dim: usize,
    /// Relative ridge actually used, after any escalation.
    pub ridge_lambda: f64,
    /// Absolute ridge added to the diagonal.
    pub ridge: f64,
}

/// Output of the fit stage: the split and the ridge chosen for every
/// Gaussian. Distances are recomputed from the embeddings in the score
/// stage, which checks that it arrives at the same ridges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub split_seed: u64,
    pub heldout_per_condition: usize,
    pub ridge_lambda: f64,
    pub split: Split,
    pub models: BTreeMap<ModelId, Vec<FitRecord>>,
}

pub(crate) struct FittedSpace {
    pub matrix: EmbeddingMatrix,
    pub conditions: BTreeMap<Condition, GaussianModel>,
    pub background: GaussianModel,
}

impl FittedSpace {
    fn records(&self) -> Vec<FitRecord> {
        self.conditions
            .values()
            .chain(std::iter::once(&self.background))
            .map(|g| FitRecord {
                label: g.label(),
                n: g.n_samples(),
                dim: g.dim(),
                ridge_lambda: g.ridge_lambda(),
                ridge: g.ridge(),
            })
            .collect()
    }
}

/// Configured embedding matrices, plus the concatenation when both
/// encoders are present.
fn load_matrices(
    config: &PipelineConfig,
    ds: &Dataset,
    stage: Stage,
) -> Result<BTreeMap<ModelId, EmbeddingMatrix>, PipelineError> {
    let mut out = BTreeMap::new();
    for (&model, path) in &config.embeddings {
        let m = load_embeddings(&config.path(path), &ds.manifest).map_err(|e| fail(stage)(&e))?;
        if m.model_id() != model {
            return Err(fail(stage)(&format!(
                "{} holds {} embeddings, configured as {model}",
                path.display(),
                m.model_id()
            )));
        }
        out.insert(model, m);
    }
    if let (Some(clip), Some(dino)) = (out.get(&ModelId::ClipVitl14), out.get(&ModelId::Dinov3Vitl)) {
        let dino = dino.select(clip.row_ids()).map_err(|e| fail(stage)(&e))?;
        let concat = concat_embeddings(clip, &dino).map_err(|e| fail(stage)(&e))?;
        out.insert(ModelId::Concat, concat);
    }
    Ok(out)
}

fn rows_f64(
    matrix: &EmbeddingMatrix,
    ids: &[String],
    stage: Stage,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    ids.iter()
        .map(|id| {
            matrix
                .row_by_id(id)
                .map(|r| r.iter().map(|&v| f64::from(v)).collect())
                .ok_or_else(|| {
                    fail(stage)(&format!("image `{id}` has no {} embedding", matrix.model_id()))
                })
        })
        .collect()
}

pub(crate) fn fit_spaces(
    config: &PipelineConfig,
    ds: &Dataset,
    stage: Stage,
) -> Result<BTreeMap<ModelId, FittedSpace>, PipelineError> {
    let matrices = load_matrices(config, ds, stage)?;
    let lambda = Some(config.fit.ridge_lambda);
    let mut jobs: Vec<(ModelId, GaussianLabel, Vec<String>)> = Vec::new();
    for &model in matrices.keys() {
        for (&c, ids) in &ds.split.fit {
            jobs.push((model, GaussianLabel::Condition(c), ids.clone()));
        }
        jobs.push((model, GaussianLabel::Background, ds.split.fit_ids()));
    }
    let fitted: Vec<(ModelId, GaussianModel)> = jobs
        .into_par_iter()
        .map(|(model, label, ids)| {
            let rows = rows_f64(&matrices[&model], &ids, stage)?;
            let g = fit_gaussian(&rows, label, lambda)
                .map_err(|e| fail(stage)(&format!("{model}: {e}")))?;
            Ok((model, g))
        })
        .collect::<Result<_, PipelineError>>()?;
    let mut out = BTreeMap::new();
    for (model, matrix) in matrices {
        let mut conditions = BTreeMap::new();
        let mut background = None;
        for (_, g) in fitted.iter().filter(|(m, _)| *m == model) {
            match g.label() {
                GaussianLabel::Condition(c) => {
                    conditions.insert(c, g.clone());
                }
                GaussianLabel::Background => background = Some(g.clone()),
            }
        }
        let background = background.expect("background fitted for every model");
        out.insert(model, FittedSpace { matrix, conditions, background });
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &str, stage: Stage) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| fail(stage)(&format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| fail(stage)(&format!("{}: {e}", path.display())))
}

fn fit_artifact(config: &PipelineConfig, ds: &Dataset, spaces: &BTreeMap<ModelId, FittedSpace>) -> FitArtifact {
    FitArtifact {
        split_seed: config.split.seed,
        heldout_per_condition: config.split.heldout_per_condition,
        ridge_lambda: config.fit.ridge_lambda,
        split: ds.split.clone(),
        models: spaces.iter().map(|(&m, s)| (m, s.records())).collect(),
    }
}

/// Splits the real images, fits every Gaussian and writes `fit.json`.
pub fn run_fit(config: &PipelineConfig) -> Result<FitArtifact, PipelineError> {
    let ds = load_dataset(config, Stage::Fit)?;
    if config.embeddings.is_empty() {
        return Err(PipelineError::Validation("no embeddings configured".into()));
    }
    let spaces = fit_spaces(config, &ds, Stage::Fit)?;
    let artifact = fit_artifact(config, &ds, &spaces);
    for (model, records) in &artifact.models {
        for r in records {
            log::info!("{model}/{}: n={} λ={}", r.label, r.n, r.ridge_lambda);
        }
    }
    let json = serde_json::to_string_pretty(&artifact).map_err(|e| fail(Stage::Fit)(&e))?;
    write_file(&config.output(FIT_FILE), &(json + "\n"), Stage::Fit)?;
    Ok(artifact)
}

pub(crate) fn read_fit(config: &PipelineConfig, stage: Stage) -> Result<Option<FitArtifact>, PipelineError> {
    let path = config.output(FIT_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| fail(stage)(&format!("{}: {e}", path.display())))?;
    let artifact = serde_json::from_str(&text)
        .map_err(|e| fail(stage)(&format!("{}: {e}", path.display())))?;
    Ok(Some(artifact))
}

// ---- score ----

/// One line of `scores.tsv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub model_id: ModelId,
    /// `None` for held-out real images.
    pub method: Option<Method>,
    pub score: DistanceScore,
}

/// Scores augmented images against their target condition and held-out
/// real images against their own, writing `scores.tsv`.
pub fn run_score(config: &PipelineConfig) -> Result<Vec<ScoreRow>, PipelineError> {
    let stage = Stage::Score;
    let ds = load_dataset(config, stage)?;
    let missing_fit = |what: &str| PipelineError::Missing {
        stage,
        needs: Stage::Fit,
        what: what.to_string(),
    };
    let artifact = read_fit(config, stage)?.ok_or_else(|| missing_fit(FIT_FILE))?;
    let spaces = fit_spaces(config, &ds, stage)?;
    if artifact != fit_artifact(config, &ds, &spaces) {
        return Err(missing_fit("a fit.json matching the current configuration"));
    }
    let method_of = ds.method_of();
    let mut assignments: HashMap<String, Condition> = HashMap::new();
    let mut ids: Vec<String> = Vec::new();
    for r in ds.augmented() {
        assignments.insert(r.image_id.clone(), r.condition);
        ids.push(r.image_id.clone());
    }
    for (&c, held) in &ds.split.heldout {
        for id in held {
            assignments.insert(id.clone(), c);
            ids.push(id.clone());
        }
    }
    let mut rows = Vec::new();
    for (&model, space) in &spaces {
        let selected = space.matrix.select(&ids).map_err(|e| fail(stage)(&format!("{model}: {e}")))?;
        let scores = score_batch(&selected, &assignments, &space.conditions, &space.background)
            .map_err(|e| fail(stage)(&format!("{model}: {e}")))?;
        rows.extend(scores.into_iter().map(|score| ScoreRow {
            model_id: model,
            method: method_of.get(&score.image_id).copied(),
            score,
        }));
    }
    write_file(&config.output(SCORES_FILE), &scores_to_text(&rows), stage)?;
    Ok(rows)
}

fn scores_to_text(rows: &[ScoreRow]) -> String {
    let mut out = String::from(SCORES_HEADER);
    out.push('\n');
    for r in rows {
        let s = &r.score;
        let method = r.method.map_or("none", Method::as_str);
        // `{}` prints the shortest representation that parses back exactly
        let _ = writeln!(
            out,
            "{}\t{}\t{method}\t{}\t{}\t{}\t{}\t{}",
            s.image_id, s.condition, r.model_id, s.d_target, s.d_background, s.d_rel, s.reported
        );
    }
    out
}

/// Parses `scores.tsv` as written by the score stage.
pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some(SCORES_HEADER) {
        return Err(format!("{}: unexpected header", path.display()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, line)| {
            let err = |m: String| format!("{}:{}: {m}", path.display(), n + 2);
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 8 {
                return Err(err(format!("expected 8 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
            let method = match f[2] {
                "none" => None,
                m => Some(m.parse().map_err(|e| err(format!("{e}")))?),
            };
            Ok(ScoreRow {
                model_id: f[3].parse().map_err(|e| err(format!("{e}")))?,
                method,
                score: DistanceScore {
                    image_id: f[0].to_string(),
                    condition: f[1].parse().map_err(|e| err(format!("{e}")))?,
                    d_target: num(f[4])?,
                    d_background: num(f[5])?,
                    d_rel: num(f[6])?,
                    reported: num(f[7])?,
                },
            })
        })
        .collect()
}

// ---- judge, baseline, classify ----

fn exhausted<'a, I>(stage: Stage, statuses: I) -> Result<(), PipelineError>
where
    I: IntoIterator<Item = &'a CallStatus>,
{
    let failures = statuses
        .into_iter()
        .filter(|s| **s == CallStatus::TransportError)
        .count();
    if failures > 0 {
        return Err(PipelineError::TransportExhausted { stage, failures });
    }
    Ok(())
}

fn judge_items(
    config: &PipelineConfig,
    transport: &dyn Transport,
    items: &[EvaluationItem],
    stage: Stage,
) -> Result<Vec<Verdict>, PipelineError> {
    let cache = verdict_cache(config, stage)?;
    let verdicts = run_jury(
        items,
        &config.effective_judges(),
        transport,
        &prompts(config)?,
        &cache,
        &config.jury_options(),
    )
    .map_err(|e| fail(stage)(&e))?;
    let dropped = verdicts.iter().filter(|v| !v.is_ok()).count();
    log::info!("{stage}: {} verdicts, {dropped} without a decision", verdicts.len());
    exhausted(stage, verdicts.iter().map(|v| &v.status))?;
    Ok(verdicts)
}

/// Every judge rates every augmented image against its source.
pub fn run_judge(config: &PipelineConfig, transport: &dyn Transport) -> Result<Vec<Verdict>, PipelineError> {
    let ds = load_dataset(config, Stage::Judge)?;
    let items = pair_items(config, &ds)?;
    judge_items(config, transport, &items, Stage::Judge)
}

/// Every judge rates the sampled held-out real images on their own.
pub fn run_baseline(
    config: &PipelineConfig,
    transport: &dyn Transport,
) -> Result<Vec<Verdict>, PipelineError> {
    let ds = load_dataset(config, Stage::Baseline)?;
    let items = baseline_items(config, &ds)?;
    judge_items(config, transport, &items, Stage::Baseline)
}

/// Cached records for an expected key set.
pub(crate) enum Coverage<T> {
    Absent,
    Partial { missing: usize, total: usize },
    Complete(Vec<T>),
}

impl<T> Coverage<T> {
    /// `None` when nothing is cached, an error naming `needs` when only
    /// part is.
    pub fn require(self, stage: Stage, needs: Stage, what: &str) -> Result<Option<Vec<T>>, PipelineError> {
        match self {
            Coverage::Absent => Ok(None),
            Coverage::Partial { missing, total } => Err(PipelineError::Missing {
                stage,
                needs,
                what: format!("{what} ({missing} of {total} missing)"),
            }),
            Coverage::Complete(v) => Ok(Some(v)),
        }
    }
}

fn coverage<T>(keys: Vec<String>, get: impl Fn(&str) -> Option<T>) -> Coverage<T> {
    let total = keys.len();
    let found: Vec<T> = keys.iter().filter_map(|k| get(k)).collect();
    match found.len() {
        0 => Coverage::Absent,
        n if n < total => Coverage::Partial { missing: total - n, total },
        _ => Coverage::Complete(found),
    }
}

/// Cached verdicts for every spec × judge under the current prompts,
/// item-major.
pub(crate) fn cached_verdicts(
    cache: &VerdictCache,
    specs: &[ItemSpec],
    judges: &[JudgeConfig],
    prompts: &PromptSet,
) -> Result<Coverage<Verdict>, PipelineError> {
    if specs.is_empty() || judges.is_empty() {
        return Ok(Coverage::Absent);
    }
    let mut keys = Vec::with_capacity(specs.len() * judges.len());
    for s in specs {
        let hash = s.prompt_hash(prompts)?;
        for j in judges {
            keys.push(verdict_key(&s.item_id, &j.judge_id, &hash));
        }
    }
    Ok(coverage(keys, |k| cache.get(k)))
}

/// Successful rejections with an explanation to classify.
pub(crate) fn classifiable(verdicts: &[Verdict]) -> Vec<Verdict> {
    verdicts
        .iter()
        .filter(|v| {
            v.kind == ItemKind::Pair
                && v.is_ok()
                && v.decision == Some(false)
                && !v.explanation.trim().is_empty()
        })
        .cloned()
        .collect()
}

/// Cached classifications for every rejection × classifier, rejection-major.
pub(crate) fn cached_classifications(
    cache: &ClassificationCache,
    rejections: &[Verdict],
    classifiers: &[JudgeConfig],
    prompts: &PromptSet,
) -> Result<Coverage<FailureClassification>, PipelineError> {
    if rejections.is_empty() || classifiers.is_empty() {
        return Ok(Coverage::Absent);
    }
    let mut keys = Vec::with_capacity(rejections.len() * classifiers.len());
    for v in rejections {
        let prompt = prompts
            .render_classify(v.condition.as_str(), &v.explanation)
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
        let hash = sha256_hex(prompt.as_bytes());
        for c in classifiers {
            keys.push(classification_key(&v.item_id, &v.judge_id, &c.judge_id, &hash));
        }
    }
    Ok(coverage(keys, |k| cache.get(k)))
}

/// Pair verdicts of the configured jury, required complete.
pub(crate) fn require_pair_verdicts(
    config: &PipelineConfig,
    ds: &Dataset,
    prompts: &PromptSet,
    stage: Stage,
) -> Result<Option<Vec<Verdict>>, PipelineError> {
    let cache = verdict_cache(config, stage)?;
    cached_verdicts(&cache, &pair_specs(ds), &config.judges, prompts)?.require(
        stage,
        Stage::Judge,
        "verdicts for every augmented image and judge",
    )
}

/// Classifies every successful rejection explanation.
pub fn run_classify(
    config: &PipelineConfig,
    transport: &dyn Transport,
) -> Result<Vec<FailureClassification>, PipelineError> {
    let stage = Stage::Classify;
    let ds = load_dataset(config, stage)?;
    let prompts = prompts(config)?;
    let verdicts = require_pair_verdicts(config, &ds, &prompts, stage)?.ok_or_else(|| {
        PipelineError::Missing {
            stage,
            needs: Stage::Judge,
            what: "cached verdicts".into(),
        }
    })?;
    let rejections = classifiable(&verdicts);
    let cache = classification_cache(config, stage)?;
    let out = run_classification(
        &rejections,
        &config.effective_classifiers(),
        transport,
        &prompts,
        &cache,
        &config.jury_options(),
    )
    .map_err(|e| fail(stage)(&e))?;
    log::info!("{stage}: {} classifications of {} rejections", out.len(), rejections.len());
    exhausted(stage, out.iter().map(|c| &c.status))?;
    Ok(out)
}

/// Calls a stage would make that the caches cannot answer.
pub(crate) fn pending_calls(
    config: &PipelineConfig,
    stage: Stage,
) -> Result<(usize, usize), PipelineError> {
    let ds = load_dataset(config, stage)?;
    let prompts = prompts(config)?;
    let pending = |hit: Option<CallStatus>| !matches!(hit, Some(s) if s != CallStatus::TransportError);
    match stage {
        Stage::Judge | Stage::Baseline => {
            let specs = if stage == Stage::Judge { pair_specs(&ds) } else { baseline_specs(config, &ds) };
            let cache = verdict_cache(config, stage)?;
            let mut n = 0;
            for s in &specs {
                let hash = s.prompt_hash(&prompts)?;
                for j in &config.judges {
                    n += usize::from(pending(
                        cache.get(&verdict_key(&s.item_id, &j.judge_id, &hash)).map(|v| v.status),
                    ));
                }
            }
            Ok((n, specs.len() * config.judges.len()))
        }
        Stage::Classify => {
            let Some(verdicts) = require_pair_verdicts(config, &ds, &prompts, stage)? else {
                return Ok((0, 0));
            };
            let rejections = classifiable(&verdicts);
            let cache = classification_cache(config, stage)?;
            let mut n = 0;
            for v in &rejections {
                let prompt = prompts
                    .render_classify(v.condition.as_str(), &v.explanation)
                    .map_err(|e| PipelineError::Validation(e.to_string()))?;
                let hash = sha256_hex(prompt.as_bytes());
                for c in &config.classifiers {
                    let key = classification_key(&v.item_id, &v.judge_id, &c.judge_id, &hash);
                    n += usize::from(pending(cache.get(&key).map(|c| c.status)));
                }
            }
            Ok((n, rejections.len() * config.classifiers.len()))
        }
        _ => Ok((0, 0)),
    }
}

pub(crate) fn output_dir(config: &PipelineConfig) -> PathBuf {
    config.path(&config.output_dir)
}
