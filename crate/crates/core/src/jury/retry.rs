use std::time::Duration;

use rand::Rng;

use super::{CallStatus, JudgeConfig, JudgeRequest, ParseError, Transport, TransportError};
use super::REASK_SUFFIX;

/// Exponential backoff between transient failures: `base · 2^(k-1)`,
/// capped at `max`, with up to 50% random jitter added.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub base: Duration,
    pub max: Duration,
    pub jitter: bool,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff {
            base: Duration::from_secs(1),
            max: Duration::from_secs(60),
            jitter: true,
        }
    }
}

impl Backoff {
    /// No waiting at all, for tests and replayed runs.
    pub fn none() -> Self {
        Backoff {
            base: Duration::ZERO,
            max: Duration::ZERO,
            jitter: false,
        }
    }

    pub fn delay(&self, failures: u32) -> Duration {
        let exp = self.base.saturating_mul(1u32 << failures.saturating_sub(1).min(16));
        let d = exp.min(self.max);
        if self.jitter && !d.is_zero() {
            d.mul_f64(1.0 + rand::rng().random_range(0.0..0.5))
        } else {
            d
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallOutcome<T> {
    pub value: Option<T>,
    pub status: CallStatus,
    pub attempts: u32,
    /// Last error message when `value` is absent.
    pub error: String,
}

/// Calls `transport` until `parse` accepts an answer, using at most
/// `judge.max_retries + 1` attempts shared by transport and parse failures.
///
/// Transient transport errors back off before retrying; permanent ones stop
/// immediately. An unparseable answer is re-asked at once with a reminder of
/// the expected format.
pub fn call_with_retries<T>(
    transport: &dyn Transport,
    judge: &JudgeConfig,
    request: &JudgeRequest,
    backoff: &Backoff,
    parse: impl Fn(&str) -> Result<T, ParseError>,
) -> CallOutcome<T> {
    let max_attempts = judge.max_retries + 1;
    let mut reask: Option<JudgeRequest> = None;
    let mut status = CallStatus::TransportError;
    let mut error = String::new();
    let mut transient = 0;
    for attempt in 1..=max_attempts {
        let req = reask.as_ref().unwrap_or(request);
        match transport.send(judge, req) {
            Ok(body) => match parse(&body) {
                Ok(v) => {
                    return CallOutcome {
                        value: Some(v),
                        status: CallStatus::Ok,
                        attempts: attempt,
                        error: String::new(),
                    }
                }
                Err(e) => {
                    log::debug!("{} / {}: {e}", judge.judge_id, request.request_id);
                    status = CallStatus::ParseError;
                    error = e.to_string();
                    reask.get_or_insert_with(|| JudgeRequest {
                        prompt: format!("{}{REASK_SUFFIX}", request.prompt),
                        ..request.clone()
                    });
                }
            },
            Err(TransportError::Transient(e)) => {
                log::debug!("{} / {}: {e}", judge.judge_id, request.request_id);
                status = CallStatus::TransportError;
                error = e;
                transient += 1;
                if attempt < max_attempts {
                    std::thread::sleep(backoff.delay(transient));
                }
            }
            Err(TransportError::Permanent(e)) => {
                return CallOutcome {
                    value: None,
                    status: CallStatus::TransportError,
                    attempts: attempt,
                    error: e,
                }
            }
        }
    }
    log::warn!(
        "{} / {}: giving up after {max_attempts} attempts: {error}",
        judge.judge_id,
        request.request_id
    );
    CallOutcome {
        value: None,
        status,
        attempts: max_attempts,
        error,
    }
}
