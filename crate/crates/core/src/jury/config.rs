use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::JuryError;
use crate::types::{Condition, Method};

/// Judge ids with built-in presets; `mock:<name>` ids are also accepted.
pub const KNOWN_JUDGES: [&str; 3] = ["gpt4o", "claude", "gemini"];

/// How the backing model is asked to reason before answering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReasoningMode {
    #[default]
    None,
    /// Extended thinking with a fixed token budget.
    Extended(u32),
    /// Provider-chosen thinking budget.
    Dynamic,
}

impl fmt::Display for ReasoningMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReasoningMode::None => f.write_str("none"),
            ReasoningMode::Extended(b) => write!(f, "extended:{b}"),
            ReasoningMode::Dynamic => f.write_str("dynamic"),
        }
    }
}

impl FromStr for ReasoningMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(ReasoningMode::None),
            "dynamic" => Ok(ReasoningMode::Dynamic),
            _ => s
                .strip_prefix("extended:")
                .and_then(|b| b.parse().ok())
                .filter(|&b| b > 0)
                .map(ReasoningMode::Extended)
                .ok_or_else(|| {
                    format!("invalid reasoning mode `{s}` (none, dynamic or extended:<tokens>)")
                }),
        }
    }
}

impl Serialize for ReasoningMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ReasoningMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_max_tokens() -> u32 {
    2048
}

fn default_max_retries() -> u32 {
    3
}

/// One member of the jury. Credentials are never part of the config; the
/// HTTP transport reads them from the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeConfig {
    pub judge_id: String,
    pub endpoint: String,
    pub model_name: String,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub reasoning_mode: ReasoningMode,
    /// Provider of the judge, used for same-company bias analysis.
    pub company: String,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Images at or above this many bytes are recompressed before sending.
    #[serde(default)]
    pub image_budget_bytes: Option<usize>,
}

impl JudgeConfig {
    /// Default settings for one of the [`KNOWN_JUDGES`].
    pub fn preset(judge_id: &str, endpoint: &str) -> Result<Self, JuryError> {
        let (model_name, reasoning_mode, company, budget) = match judge_id {
            "gpt4o" => ("gpt-4o", ReasoningMode::None, "openai", None),
            "claude" => (
                "claude-sonnet-4-20250514",
                ReasoningMode::Extended(1024),
                "anthropic",
                Some(3_500_000),
            ),
            "gemini" => ("gemini-2.5-pro", ReasoningMode::Dynamic, "google", None),
            other => return Err(JuryError::Config(format!("no preset for judge `{other}`"))),
        };
        Ok(JudgeConfig {
            judge_id: judge_id.into(),
            endpoint: endpoint.into(),
            model_name: model_name.into(),
            max_tokens: default_max_tokens(),
            reasoning_mode,
            company: company.into(),
            max_retries: default_max_retries(),
            image_budget_bytes: budget,
        })
    }

    pub fn is_mock(&self) -> bool {
        self.judge_id.starts_with("mock:")
    }

    pub fn validate(&self) -> Result<(), JuryError> {
        let id = &self.judge_id;
        let known = KNOWN_JUDGES.contains(&id.as_str())
            || id
                .strip_prefix("mock:")
                .is_some_and(|n| !n.is_empty() && !n.contains(char::is_whitespace));
        if !known {
            return Err(JuryError::Config(format!(
                "unknown judge id `{id}` (expected one of {KNOWN_JUDGES:?} or mock:<name>)"
            )));
        }
        if self.max_tokens == 0 {
            return Err(JuryError::Config(format!("judge `{id}`: max_tokens must be positive")));
        }
        if self.endpoint.is_empty() || self.model_name.is_empty() || self.company.is_empty() {
            return Err(JuryError::Config(format!(
                "judge `{id}`: endpoint, model_name and company are required"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    /// Original and augmented image shown side by side.
    Pair,
    /// A single image, as used for the real-image baseline.
    Single,
}

/// Something to show a judge. Pair items carry the clear original.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationItem {
    pub item_id: String,
    pub kind: ItemKind,
    pub original_image: Option<Vec<u8>>,
    pub evaluated_image: Vec<u8>,
    pub condition: Condition,
    pub method: Option<Method>,
}

impl EvaluationItem {
    pub fn pair(
        item_id: impl Into<String>,
        original: Vec<u8>,
        augmented: Vec<u8>,
        condition: Condition,
        method: Method,
    ) -> Self {
        EvaluationItem {
            item_id: item_id.into(),
            kind: ItemKind::Pair,
            original_image: Some(original),
            evaluated_image: augmented,
            condition,
            method: Some(method),
        }
    }

    pub fn single(item_id: impl Into<String>, image: Vec<u8>, condition: Condition) -> Self {
        EvaluationItem {
            item_id: item_id.into(),
            kind: ItemKind::Single,
            original_image: None,
            evaluated_image: image,
            condition,
            method: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallStatus {
    Ok,
    ParseError,
    TransportError,
}

/// One judge's answer for one item. Failed calls are recorded too, with
/// `decision` absent and the last error in `explanation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub item_id: String,
    pub judge_id: String,
    pub kind: ItemKind,
    pub condition: Condition,
    #[serde(default)]
    pub method: Option<Method>,
    pub decision: Option<bool>,
    pub explanation: String,
    pub status: CallStatus,
    pub attempts: u32,
    pub prompt_hash: String,
    pub timestamp_ms: u64,
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        self.status == CallStatus::Ok
    }
}
