//! Staged orchestration: fit → score → judge / baseline → classify →
//! analyze → report. Each stage persists its artifact under the output
//! directory (or the verdict and classification caches) so later stages can
//! run on their own.

mod config;
mod report;
mod stages;

use std::fmt;
use std::str::FromStr;

pub use config::{
    AnalysisSection, BootstrapSection, ClassificationSection, FitSection, JurySection,
    PipelineConfig, SplitSection,
};
pub use report::{build_report, emit_report, render_text, Format, EvaluationReport, Num};
pub use stages::{
    baseline_items, build_transport, load_dataset, pair_items, read_scores, run_baseline,
    run_classify, run_fit, run_judge, run_score, Dataset, FitArtifact, ScoreRow, FIT_FILE,
    SCORES_FILE,
};

mod verify;
pub use verify::{verify_report, VerifyOutcome};

use crate::jury::Transport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Fit,
    Score,
    Judge,
    Baseline,
    Classify,
    Analyze,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Fit,
        Stage::Score,
        Stage::Judge,
        Stage::Baseline,
        Stage::Classify,
        Stage::Analyze,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Fit => "fit",
            Stage::Score => "score",
            Stage::Judge => "judge",
            Stage::Baseline => "baseline",
            Stage::Classify => "classify",
            Stage::Analyze => "analyze",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, PipelineError> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s || (s == "classify-failures" && *st == Stage::Classify))
            .ok_or_else(|| PipelineError::Validation(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{stage} stage failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("{stage} stage needs {what}; run `{needs}` first")]
    Missing {
        stage: Stage,
        needs: Stage,
        what: String,
    },
    #[error("{stage} stage: {failures} call(s) exhausted their retries in transport")]
    TransportExhausted { stage: Stage, failures: usize },
}

impl PipelineError {
    /// Process exit code: 2 validation, 3 stage error, 4 transport
    /// exhaustion.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 2,
            PipelineError::Stage { .. } | PipelineError::Missing { .. } => 3,
            PipelineError::TransportExhausted { .. } => 4,
        }
    }

    pub(crate) fn stage(stage: Stage) -> impl Fn(&dyn fmt::Display) -> PipelineError {
        move |e| PipelineError::Stage {
            stage,
            message: e.to_string(),
        }
    }
}

/// Runs `stages` in pipeline order. Returns the report when `analyze` or
/// `report` ran.
pub fn run_pipeline(
    config: &PipelineConfig,
    stages: &[Stage],
    transport: &dyn Transport,
) -> Result<Option<EvaluationReport>, PipelineError> {
    let mut ordered = stages.to_vec();
    ordered.sort();
    ordered.dedup();
    stages::preflight(config, &ordered)?;
    let mut report = None;
    for stage in ordered {
        log::info!("stage {stage}");
        match stage {
            Stage::Fit => {
                run_fit(config)?;
            }
            Stage::Score => {
                run_score(config)?;
            }
            Stage::Judge => {
                run_judge(config, transport)?;
            }
            Stage::Baseline => {
                run_baseline(config, transport)?;
            }
            Stage::Classify => {
                run_classify(config, transport)?;
            }
            Stage::Analyze => {
                report = Some(build_report(config)?);
            }
            Stage::Report => {
                let r = match report.take() {
                    Some(r) => r,
                    None => build_report(config)?,
                };
                let dir = config.path(&config.output_dir);
                emit_report(&r, Format::Json, &dir.join("report.json"))?;
                emit_report(&r, Format::Text, &dir.join("report.txt"))?;
                report = Some(r);
            }
        }
    }
    Ok(report)
}

/// What `run_pipeline` would do, without running anything or calling any
/// judge. Judge-facing stages report how many calls the caches cannot
/// answer.
pub fn plan(config: &PipelineConfig, stages: &[Stage]) -> Result<Vec<String>, PipelineError> {
    let mut ordered = stages.to_vec();
    ordered.sort();
    ordered.dedup();
    stages::preflight(config, &ordered)?;
    let mut out = Vec::new();
    for stage in ordered {
        let line = match stage {
            Stage::Fit => {
                let models: Vec<String> = config.embeddings.keys().map(|m| m.to_string()).collect();
                format!("fit: Gaussians for {} -> {}", models.join(", "), config.output(FIT_FILE).display())
            }
            Stage::Score => format!("score: -> {}", config.output(SCORES_FILE).display()),
            Stage::Judge | Stage::Baseline | Stage::Classify => {
                let (pending, total) = stages::pending_calls(config, stage)?;
                format!("{stage}: {pending} of {total} calls not cached")
            }
            Stage::Analyze => "analyze: summary to stdout".to_string(),
            Stage::Report => format!(
                "report: -> {} and {}",
                config.output("report.json").display(),
                config.output("report.txt").display()
            ),
        };
        out.push(line);
    }
    Ok(out)
}
