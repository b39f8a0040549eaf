use super::cache::verdict_key;
use super::{
    call_with_retries, compress_to_budget, parse_verdict, Backoff, CallStatus, EvaluationItem,
    ImagePart, ItemKind, JudgeConfig, JudgeRequest, JuryError, PromptSet, Transport, Verdict,
    VerdictCache,
};
use crate::util::{now_millis, run_lanes, sha256_hex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JuryOptions {
    /// In-flight calls per judge.
    pub concurrency: usize,
    pub backoff: Backoff,
}

impl Default for JuryOptions {
    fn default() -> Self {
        JuryOptions {
            concurrency: 4,
            backoff: Backoff::default(),
        }
    }
}

fn render(prompts: &PromptSet, item: &EvaluationItem) -> Result<String, JuryError> {
    match item.kind {
        ItemKind::Pair => prompts.render_pair(item.condition.as_str()),
        ItemKind::Single => prompts.render_single(item.condition.as_str()),
    }
}

/// Asks one judge about one item, reusing a cached verdict for the same
/// item, judge and prompt unless that call failed in transport. Call
/// failures are recorded in the verdict; only configuration and cache
/// problems are returned as errors.
pub fn evaluate_item(
    item: &EvaluationItem,
    judge: &JudgeConfig,
    transport: &dyn Transport,
    prompts: &PromptSet,
    cache: &VerdictCache,
    backoff: &Backoff,
) -> Result<Verdict, JuryError> {
    let prompt = render(prompts, item)?;
    let prompt_hash = sha256_hex(prompt.as_bytes());
    // transport failures are retried on the next run; answers and parse
    // failures are final
    if let Some(v) = cache.get(&verdict_key(&item.item_id, &judge.judge_id, &prompt_hash)) {
        if v.status != CallStatus::TransportError {
            return Ok(v);
        }
    }
    let mut verdict = Verdict {
        item_id: item.item_id.clone(),
        judge_id: judge.judge_id.clone(),
        kind: item.kind,
        condition: item.condition,
        method: item.method,
        decision: None,
        explanation: String::new(),
        status: CallStatus::TransportError,
        attempts: 0,
        prompt_hash,
        timestamp_ms: 0,
    };
    let images = item
        .original_image
        .iter()
        .chain(std::iter::once(&item.evaluated_image))
        .map(|bytes| match judge.image_budget_bytes {
            Some(budget) => compress_to_budget(bytes, budget).map(|c| ImagePart::new(c.into_owned())),
            None => Ok(ImagePart::new(bytes.clone())),
        })
        .collect::<Result<Vec<_>, _>>();
    match images {
        Err(e) => verdict.explanation = e.to_string(),
        Ok(images) => {
            let request = JudgeRequest {
                request_id: item.item_id.clone(),
                prompt,
                images,
            };
            let out = call_with_retries(transport, judge, &request, backoff, parse_verdict);
            verdict.status = out.status;
            verdict.attempts = out.attempts;
            match out.value {
                Some((decision, explanation)) => {
                    verdict.decision = Some(decision);
                    verdict.explanation = explanation;
                }
                None => verdict.explanation = out.error,
            }
        }
    }
    verdict.timestamp_ms = now_millis();
    cache.append(&verdict)?;
    Ok(verdict)
}

/// Every judge evaluates every item. Judges run side by side, each with up
/// to `options.concurrency` calls in flight. Output is item-major in the
/// order of `items` and `judges`, independent of scheduling.
pub fn run_jury(
    items: &[EvaluationItem],
    judges: &[JudgeConfig],
    transport: &dyn Transport,
    prompts: &PromptSet,
    cache: &VerdictCache,
    options: &JuryOptions,
) -> Result<Vec<Verdict>, JuryError> {
    for j in judges {
        j.validate()?;
    }
    for item in items {
        render(prompts, item)?;
    }
    run_lanes(judges.len(), items.len(), options.concurrency, |ji, i| {
        evaluate_item(&items[i], &judges[ji], transport, prompts, cache, &options.backoff)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jury::{MockReply, MockTransport};
    use crate::types::{Condition, Method};

    fn png() -> Vec<u8> {
        let img = image::RgbImage::from_pixel(4, 4, image::Rgb([9, 9, 9]));
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).unwrap();
        out.into_inner()
    }

    fn judge(id: &str) -> JudgeConfig {
        let mut j = JudgeConfig::preset("gpt4o", "mock").unwrap();
        j.judge_id = id.into();
        j
    }

    fn body(decision: bool) -> MockReply {
        MockReply::Body(format!("{{\"decision\": {decision}, \"explanation\": \"e\"}}"))
    }

    #[test]
    fn deterministic_order_and_cache_reuse() {
        let items: Vec<_> = (0..7)
            .map(|i| EvaluationItem::pair(format!("i{i}"), png(), png(), Condition::Rain, Method::Qwen))
            .collect();
        let judges = [judge("mock:a"), judge("mock:b")];
        let mut m = MockTransport::new();
        for i in 0..7 {
            m.script("mock:a", &format!("i{i}"), vec![body(i % 2 == 0)]);
            m.script("mock:b", &format!("i{i}"), vec![body(true)]);
        }
        let cache = VerdictCache::in_memory();
        let opts = JuryOptions {
            concurrency: 3,
            backoff: Backoff::none(),
        };
        let prompts = PromptSet::default();
        let v = run_jury(&items, &judges, &m, &prompts, &cache, &opts).unwrap();
        assert_eq!(v.len(), 14);
        for (k, verdict) in v.iter().enumerate() {
            assert_eq!(verdict.item_id, format!("i{}", k / 2));
            assert_eq!(verdict.judge_id, judges[k % 2].judge_id);
        }
        assert_eq!(v[2].decision, Some(false));
        assert_eq!(m.calls(), 14);
        let again = run_jury(&items, &judges, &m, &prompts, &cache, &opts).unwrap();
        assert_eq!(m.calls(), 14);
        assert_eq!(again, v);
    }

    #[test]
    fn failures_become_verdicts() {
        let items = [EvaluationItem::single("r1", png(), Condition::Night)];
        let mut m = MockTransport::new();
        m.script("mock:a", "r1", vec![MockReply::Body("no json".into())]);
        let mut j = judge("mock:a");
        j.max_retries = 1;
        let v = run_jury(
            &items,
            &[j],
            &m,
            &PromptSet::default(),
            &VerdictCache::in_memory(),
            &JuryOptions {
                concurrency: 1,
                backoff: Backoff::none(),
            },
        )
        .unwrap();
        assert_eq!(v[0].status, CallStatus::ParseError);
        assert_eq!(v[0].attempts, 2);
        assert_eq!(v[0].decision, None);
    }

    #[test]
    fn undecodable_image_is_recorded_without_calls() {
        let items = [EvaluationItem::single("r1", b"junk".to_vec(), Condition::Fog)];
        let mut j = judge("mock:a");
        j.image_budget_bytes = Some(1000);
        let m = MockTransport::new();
        let v = evaluate_item(
            &items[0],
            &j,
            &m,
            &PromptSet::default(),
            &VerdictCache::in_memory(),
            &Backoff::none(),
        )
        .unwrap();
        assert_eq!((v.status, v.attempts, m.calls()), (CallStatus::TransportError, 0, 0));
    }

    #[test]
    fn clear_items_are_a_config_error() {
        let items = [EvaluationItem::single("c", png(), Condition::Clear)];
        let r = run_jury(
            &items,
            &[judge("mock:a")],
            &MockTransport::new(),
            &PromptSet::default(),
            &VerdictCache::in_memory(),
            &JuryOptions::default(),
        );
        assert!(matches!(r, Err(JuryError::Config(_))));
    }
}
