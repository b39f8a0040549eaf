//! Constructed verdict sets for probing jury-composition robustness.
//!
//! Two judges accept each method at a fixed base rate; a third judge is
//! either uniformly stricter (same order, lower rates) or inverts every
//! decision on one method.

use crate::jury::{CallStatus, ItemKind, Verdict};
use crate::types::{Condition, Method};

pub const IMAGES_PER_METHOD: usize = 100;
pub const JUDGES: [&str; 3] = ["mock:a", "mock:b", "mock:c"];

/// Accepts out of [`IMAGES_PER_METHOD`] for the two reference judges,
/// shaped like a typical full-jury column.
pub fn base_accepts(method: Method) -> usize {
    match method {
        Method::Qwen => 95,
        Method::Gemini => 90,
        Method::Openai => 86,
        Method::Flux => 63,
        Method::Imgaug => 26,
        Method::Albumentations => 24,
    }
}

fn verdict(method: Method, i: usize, judge: &str, decision: bool) -> Verdict {
    Verdict {
        item_id: format!("{method}-{i:03}"),
        judge_id: judge.to_string(),
        kind: ItemKind::Pair,
        condition: Condition::ADVERSE[i % 4],
        method: Some(method),
        decision: Some(decision),
        explanation: String::new(),
        status: CallStatus::Ok,
        attempts: 1,
        prompt_hash: String::new(),
        timestamp_ms: 0,
    }
}

fn build(third: impl Fn(Method, usize) -> bool) -> Vec<Verdict> {
    let mut out = Vec::new();
    for method in Method::ALL {
        let k = base_accepts(method);
        for i in 0..IMAGES_PER_METHOD {
            out.push(verdict(method, i, JUDGES[0], i < k));
            out.push(verdict(method, i, JUDGES[1], i < k));
            out.push(verdict(method, i, JUDGES[2], third(method, i)));
        }
    }
    out
}

/// The third judge accepts only 80% of what the others accept, on every
/// method alike.
pub fn uniform_conservative() -> Vec<Verdict> {
    build(|m, i| i < base_accepts(m) * 4 / 5)
}

/// The third judge flips every decision on `target`.
pub fn decision_inverting(target: Method) -> Vec<Verdict> {
    build(move |m, i| {
        let d = i < base_accepts(m);
        if m == target {
            !d
        } else {
            d
        }
    })
}
