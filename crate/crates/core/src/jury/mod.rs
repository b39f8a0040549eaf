//! VLM-as-judge evaluation: prompts, transport, retries, caching and the
//! acceptance-rate statistic.

mod cache;
mod compress;
mod config;
mod parse;
mod prompt;
mod rate;
mod retry;
mod runner;
mod transport;

pub use cache::{CacheKey, JsonlCache, VerdictCache};
pub(crate) use cache::verdict_key;
pub use compress::compress_to_budget;
pub use config::{
    CallStatus, EvaluationItem, ItemKind, JudgeConfig, ReasoningMode, Verdict, KNOWN_JUDGES,
};
pub use parse::{extract_json_object, parse_verdict, ParseError};
pub use prompt::{guidance, render_pair_prompt, render_single_prompt, PromptSet, REASK_SUFFIX};
pub use rate::{acceptance_rate, AcceptanceRate};
pub use retry::{call_with_retries, Backoff, CallOutcome};
pub use runner::{evaluate_item, run_jury, JuryOptions};
pub use transport::{
    HttpTransport, ImagePart, JudgeRequest, MockReply, MockTransport, RoutingTransport,
    Transport, TransportError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JuryError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("compression error: {0}")]
    Compression(String),
    #[error("statistics error: {0}")]
    Stat(String),
    #[error("cache error: {0}")]
    Cache(String),
}
