use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::agreement::BootstrapSettings;
use crate::analysis::{JurySubset, ResampleUnit, SummarySettings};
use crate::jury::{Backoff, JudgeConfig, JuryOptions};
use crate::metrics::DEFAULT_RIDGE_LAMBDA;
use crate::store::SplitSpec;
use crate::types::ModelId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub seed: u64,
    #[serde(default = "default_heldout")]
    pub heldout_per_condition: usize,
}

fn default_heldout() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Starting ridge multiplier; escalated automatically if needed.
    #[serde(default = "default_lambda")]
    pub ridge_lambda: f64,
}

fn default_lambda() -> f64 {
    DEFAULT_RIDGE_LAMBDA
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            ridge_lambda: DEFAULT_RIDGE_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSection {
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub resample: ResampleUnit,
}

fn default_replicates() -> usize {
    10_000
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JurySection {
    #[serde(default = "default_verdict_cache")]
    pub cache: PathBuf,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// Overrides every judge's `max_retries` when set.
    #[serde(default)]
    pub max_retries: Option<u32>,
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    /// Held-out real images per condition shown to judges as the baseline.
    #[serde(default = "default_baseline")]
    pub baseline_per_condition: usize,
    /// Scripted replies for `mock:` judges and classifiers.
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_verdict_cache() -> PathBuf {
    PathBuf::from("cache/verdicts.jsonl")
}

fn default_concurrency() -> usize {
    4
}

fn default_backoff_ms() -> u64 {
    1000
}

fn default_baseline() -> usize {
    40
}

fn default_timeout() -> u64 {
    120
}

impl Default for JurySection {
    fn default() -> Self {
        JurySection {
            cache: default_verdict_cache(),
            concurrency: default_concurrency(),
            max_retries: None,
            backoff_base_ms: default_backoff_ms(),
            baseline_per_condition: default_baseline(),
            mock_script: None,
            timeout_secs: default_timeout(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationSection {
    #[serde(default = "default_classification_cache")]
    pub cache: PathBuf,
}

fn default_classification_cache() -> PathBuf {
    PathBuf::from("cache/classifications.jsonl")
}

impl Default for ClassificationSection {
    fn default() -> Self {
        ClassificationSection {
            cache: default_classification_cache(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_divergence_model")]
    pub divergence_model: ModelId,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_stability_k")]
    pub stability_k: usize,
    /// Jury compositions to compare; defaults to the full jury, each judge
    /// alone and each leave-one-out jury.
    #[serde(default)]
    pub jury_subsets: Vec<JurySubset>,
}

fn default_divergence_model() -> ModelId {
    ModelId::ClipVitl14
}

fn default_top_k() -> usize {
    3
}

fn default_stability_k() -> usize {
    4
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            divergence_model: default_divergence_model(),
            top_k: default_top_k(),
            stability_k: default_stability_k(),
            jury_subsets: Vec::new(),
        }
    }
}

/// Complete pipeline configuration, read from TOML. Relative paths are
/// resolved against the directory of the config file. Credentials are
/// never accepted here (unknown keys are rejected); see the HTTP transport
/// for the environment variables it reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub manifest: PathBuf,
    /// Root for the manifest's `file` paths.
    #[serde(default)]
    pub image_root: Option<PathBuf>,
    #[serde(default)]
    pub prompt_dir: Option<PathBuf>,
    /// `judge.<id> = company` / `method.<name> = company` overrides.
    #[serde(default)]
    pub company_map: Option<PathBuf>,
    #[serde(default)]
    pub embeddings: BTreeMap<ModelId, PathBuf>,
    pub split: SplitSection,
    #[serde(default)]
    pub fit: FitSection,
    pub bootstrap: BootstrapSection,
    #[serde(default)]
    pub jury: JurySection,
    #[serde(default)]
    pub classification: ClassificationSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub judges: Vec<JudgeConfig>,
    #[serde(default)]
    pub classifiers: Vec<JudgeConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut config: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::Validation(e.to_string()))?;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Validation(m));
        if self.embeddings.contains_key(&ModelId::Concat) {
            return bad("concat embeddings are derived from clip_vitl14 and dinov3_vitl; \
                        do not configure them"
                .into());
        }
        if self.split.heldout_per_condition == 0 {
            return bad("split.heldout_per_condition must be positive".into());
        }
        let b = &self.bootstrap;
        if !(b.level > 0.0 && b.level < 1.0) || b.replicates == 0 {
            return bad("bootstrap.level must be in (0, 1) and replicates positive".into());
        }
        if !(self.fit.ridge_lambda >= 0.0 && self.fit.ridge_lambda.is_finite()) {
            return bad("fit.ridge_lambda must be a nonnegative number".into());
        }
        if self.jury.concurrency == 0 {
            return bad("jury.concurrency must be positive".into());
        }
        if self.analysis.top_k == 0 || self.analysis.stability_k == 0 {
            return bad("analysis.top_k and analysis.stability_k must be positive".into());
        }
        for (kind, list) in [("judge", &self.judges), ("classifier", &self.classifiers)] {
            let mut seen = std::collections::BTreeSet::new();
            for j in list {
                j.validate().map_err(|e| PipelineError::Validation(e.to_string()))?;
                if !seen.insert(&j.judge_id) {
                    return bad(format!("duplicate {kind} `{}`", j.judge_id));
                }
            }
        }
        Ok(())
    }

    /// Resolves `p` against the config directory.
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.path(&self.output_dir).join(name)
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            seed: self.split.seed,
            heldout_per_condition: self.split.heldout_per_condition,
        }
    }

    pub fn summary_settings(&self) -> SummarySettings {
        SummarySettings {
            bootstrap: BootstrapSettings {
                level: self.bootstrap.level,
                replicates: self.bootstrap.replicates,
                seed: self.bootstrap.seed,
            },
            resample: self.bootstrap.resample,
        }
    }

    pub fn jury_options(&self) -> JuryOptions {
        let base = std::time::Duration::from_millis(self.jury.backoff_base_ms);
        JuryOptions {
            concurrency: self.jury.concurrency,
            backoff: Backoff {
                base,
                max: base.saturating_mul(32),
                jitter: true,
            },
        }
    }

    /// Judges with the global retry override applied.
    pub fn effective_judges(&self) -> Vec<JudgeConfig> {
        self.apply_retries(&self.judges)
    }

    pub fn effective_classifiers(&self) -> Vec<JudgeConfig> {
        self.apply_retries(&self.classifiers)
    }

    fn apply_retries(&self, list: &[JudgeConfig]) -> Vec<JudgeConfig> {
        list.iter()
            .cloned()
            .map(|mut j| {
                if let Some(r) = self.jury.max_retries {
                    j.max_retries = r;
                }
                j
            })
            .collect()
    }

    /// Replaces both seeds, for reruns with different randomness.
    pub fn override_seed(&mut self, seed: u64) {
        self.split.seed = seed;
        self.bootstrap.seed = seed;
    }
}
