use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::FailureError;
use crate::jury::{
    call_with_retries, extract_json_object, Backoff, CacheKey, CallStatus, JsonlCache, JudgeConfig,
    JudgeRequest, JuryOptions, ParseError, PromptSet, Transport, Verdict,
};
use crate::types::{Condition, Method};
use crate::util::{now_millis, run_lanes, sha256_hex};

/// One classifier's reading of one rejection explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureClassification {
    pub item_id: String,
    /// Judge whose rejection is being classified.
    pub vlm_judge_id: String,
    /// Classifier that produced the flags.
    pub llm_judge_id: String,
    pub condition: Condition,
    #[serde(default)]
    pub method: Option<Method>,
    pub semantic: Option<bool>,
    pub realism: Option<bool>,
    pub status: CallStatus,
    pub attempts: u32,
    pub prompt_hash: String,
    pub timestamp_ms: u64,
}

impl FailureClassification {
    /// Both flags, when the classifier answered.
    pub fn flags(&self) -> Option<(bool, bool)> {
        match (self.status, self.semantic, self.realism) {
            (CallStatus::Ok, Some(s), Some(r)) => Some((s, r)),
            _ => None,
        }
    }
}

impl CacheKey for FailureClassification {
    fn cache_key(&self) -> String {
        classification_key(&self.item_id, &self.vlm_judge_id, &self.llm_judge_id, &self.prompt_hash)
    }
}

pub(crate) fn classification_key(item: &str, vlm: &str, llm: &str, hash: &str) -> String {
    format!("{item}\t{vlm}\t{llm}\t{hash}")
}

pub type ClassificationCache = JsonlCache<FailureClassification>;

/// Parses `{"semantic": bool, "realism": bool}` with the same strict then
/// lenient extraction as verdicts.
pub fn parse_flags(raw: &str) -> Result<(bool, bool), ParseError> {
    let obj = extract_json_object(raw, "semantic")
        .ok_or_else(|| ParseError("no JSON object found".into()))?;
    let flag = |name: &str| match obj.get(name) {
        Some(Value::Bool(b)) => Ok(*b),
        Some(other) => Err(ParseError(format!("`{name}` is not a boolean: {other}"))),
        None => Err(ParseError(format!("missing `{name}`"))),
    };
    Ok((flag("semantic")?, flag("realism")?))
}

/// Asks `classifier` why `rejection` failed. The verdict must be a
/// successful rejection with a nonempty explanation.
pub fn classify_failure_reason(
    rejection: &Verdict,
    classifier: &JudgeConfig,
    transport: &dyn Transport,
    prompts: &PromptSet,
    cache: &ClassificationCache,
    backoff: &Backoff,
) -> Result<FailureClassification, FailureError> {
    if !(rejection.is_ok() && rejection.decision == Some(false)) {
        return Err(FailureError::Precondition(format!(
            "{} / {} is not a rejection",
            rejection.item_id, rejection.judge_id
        )));
    }
    if rejection.explanation.trim().is_empty() {
        return Err(FailureError::Precondition(format!(
            "{} / {} has an empty explanation",
            rejection.item_id, rejection.judge_id
        )));
    }
    let prompt = prompts.render_classify(rejection.condition.as_str(), &rejection.explanation)?;
    let prompt_hash = sha256_hex(prompt.as_bytes());
    let key = classification_key(
        &rejection.item_id,
        &rejection.judge_id,
        &classifier.judge_id,
        &prompt_hash,
    );
    if let Some(c) = cache.get(&key).filter(|c| c.status != CallStatus::TransportError) {
        return Ok(c);
    }
    let request = JudgeRequest {
        request_id: format!("{}/{}", rejection.item_id, rejection.judge_id),
        prompt,
        images: vec![],
    };
    let out = call_with_retries(transport, classifier, &request, backoff, parse_flags);
    let record = FailureClassification {
        item_id: rejection.item_id.clone(),
        vlm_judge_id: rejection.judge_id.clone(),
        llm_judge_id: classifier.judge_id.clone(),
        condition: rejection.condition,
        method: rejection.method,
        semantic: out.value.map(|v| v.0),
        realism: out.value.map(|v| v.1),
        status: out.status,
        attempts: out.attempts,
        prompt_hash,
        timestamp_ms: now_millis(),
    };
    cache.append(&record)?;
    Ok(record)
}

/// Classifies every successful rejection in `verdicts` with every
/// classifier. Output is rejection-major in verdict order.
pub fn run_classification(
    verdicts: &[Verdict],
    classifiers: &[JudgeConfig],
    transport: &dyn Transport,
    prompts: &PromptSet,
    cache: &ClassificationCache,
    options: &JuryOptions,
) -> Result<Vec<FailureClassification>, FailureError> {
    for c in classifiers {
        c.validate()?;
    }
    let rejections: Vec<&Verdict> = verdicts
        .iter()
        .filter(|v| v.is_ok() && v.decision == Some(false))
        .collect();
    run_lanes(classifiers.len(), rejections.len(), options.concurrency, |ci, i| {
        classify_failure_reason(rejections[i], &classifiers[ci], transport, prompts, cache, &options.backoff)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jury::{ItemKind, MockReply, MockTransport};

    fn rejection(explanation: &str) -> Verdict {
        Verdict {
            item_id: "fog-17".into(),
            judge_id: "mock:vlm".into(),
            kind: ItemKind::Pair,
            condition: Condition::Fog,
            method: Some(Method::Imgaug),
            decision: Some(false),
            explanation: explanation.into(),
            status: CallStatus::Ok,
            attempts: 1,
            prompt_hash: "h".into(),
            timestamp_ms: 0,
        }
    }

    fn classifier() -> JudgeConfig {
        let mut j = JudgeConfig::preset("claude", "mock").unwrap();
        j.judge_id = "mock:llm".into();
        j
    }

    #[test]
    fn parses_both_flags() {
        assert_eq!(parse_flags(r#"{"semantic": true, "realism": false}"#).unwrap(), (true, false));
        assert_eq!(
            parse_flags("Reasoning.\n```json\n{\"semantic\": false, \"realism\": true}\n```").unwrap(),
            (false, true)
        );
        assert!(parse_flags(r#"{"semantic": "no", "realism": true}"#).is_err());
        assert!(parse_flags(r#"{"semantic": true}"#).is_err());
    }

    #[test]
    fn scripted_labels_and_cache() {
        let filter = "The fog is applied as a uniform, semi-transparent white layer over the whole \
                      image, like a simple filter.";
        let mut m = MockTransport::new();
        m.script(
            "mock:llm",
            "fog-17/mock:vlm",
            vec![MockReply::Body(r#"{"semantic": false, "realism": true, "explanation": "filter"}"#.into())],
        );
        let cache = ClassificationCache::in_memory();
        let c = classify_failure_reason(
            &rejection(filter),
            &classifier(),
            &m,
            &PromptSet::default(),
            &cache,
            &Backoff::none(),
        )
        .unwrap();
        assert_eq!(c.flags(), Some((false, true)));
        let again = classify_failure_reason(
            &rejection(filter),
            &classifier(),
            &m,
            &PromptSet::default(),
            &cache,
            &Backoff::none(),
        )
        .unwrap();
        assert_eq!((again, m.calls()), (c, 1));
    }

    #[test]
    fn rejects_bad_preconditions() {
        let m = MockTransport::new();
        let run = |v: &Verdict| {
            classify_failure_reason(
                v,
                &classifier(),
                &m,
                &PromptSet::default(),
                &ClassificationCache::in_memory(),
                &Backoff::none(),
            )
        };
        assert!(matches!(run(&rejection("  ")), Err(FailureError::Precondition(_))));
        let mut accepted = rejection("fine");
        accepted.decision = Some(true);
        assert!(matches!(run(&accepted), Err(FailureError::Precondition(_))));
        assert_eq!(m.calls(), 0);
    }
}
