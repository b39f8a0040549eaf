use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{JudgeConfig, JuryError, ReasoningMode};

#[derive(Debug, Clone, PartialEq)]
pub struct ImagePart {
    pub media_type: String,
    pub data: Vec<u8>,
}

impl ImagePart {
    pub fn new(data: Vec<u8>) -> Self {
        let media_type = match image::guess_format(&data) {
            Ok(image::ImageFormat::Jpeg) => "image/jpeg",
            Ok(image::ImageFormat::WebP) => "image/webp",
            Ok(image::ImageFormat::Gif) => "image/gif",
            _ => "image/png",
        };
        ImagePart {
            media_type: media_type.into(),
            data,
        }
    }
}

/// One model call. `request_id` identifies the item (and, for classifier
/// calls, the explanation) so scripted transports can answer per item.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgeRequest {
    pub request_id: String,
    pub prompt: String,
    pub images: Vec<ImagePart>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    /// Worth retrying: timeouts, rate limiting, server errors.
    #[error("transient transport error: {0}")]
    Transient(String),
    #[error("permanent transport error: {0}")]
    Permanent(String),
}

impl TransportError {
    pub fn from_status(status: u16, body: &str) -> Self {
        let msg = format!("HTTP {status}: {}", body.chars().take(200).collect::<String>());
        if status == 429 || status == 408 || (500..600).contains(&status) {
            TransportError::Transient(msg)
        } else {
            TransportError::Permanent(msg)
        }
    }
}

/// Sends a prompt with images to a judge and returns the raw text answer.
pub trait Transport: Send + Sync {
    fn send(&self, judge: &JudgeConfig, request: &JudgeRequest) -> Result<String, TransportError>;
}

/// JSON-over-HTTP transport. The request body is
/// `{model, max_tokens, reasoning, prompt, images: [{media_type, data}]}`
/// with base64 image data; the answer is read from a top-level `text` field
/// or, failing that, taken as the raw body. The bearer token comes from
/// `REALISM_API_KEY_<JUDGE_ID>` when set.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, JuryError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| JuryError::Config(format!("HTTP client: {e}")))?;
        Ok(HttpTransport { client })
    }

    pub fn api_key_var(judge_id: &str) -> String {
        let suffix: String = judge_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
            .collect();
        format!("REALISM_API_KEY_{suffix}")
    }

    fn body(judge: &JudgeConfig, request: &JudgeRequest) -> serde_json::Value {
        let b64 = base64::engine::general_purpose::STANDARD;
        let reasoning = match judge.reasoning_mode {
            ReasoningMode::None => serde_json::Value::Null,
            ReasoningMode::Extended(budget) => json!({"mode": "extended", "budget_tokens": budget}),
            ReasoningMode::Dynamic => json!({"mode": "dynamic"}),
        };
        let images: Vec<_> = request
            .images
            .iter()
            .map(|i| json!({"media_type": i.media_type, "data": b64.encode(&i.data)}))
            .collect();
        json!({
            "model": judge.model_name,
            "max_tokens": judge.max_tokens,
            "reasoning": reasoning,
            "prompt": request.prompt,
            "images": images,
        })
    }
}

impl Transport for HttpTransport {
    fn send(&self, judge: &JudgeConfig, request: &JudgeRequest) -> Result<String, TransportError> {
        let mut req = self
            .client
            .post(&judge.endpoint)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(Self::body(judge, request).to_string());
        if let Ok(key) = std::env::var(Self::api_key_var(&judge.judge_id)) {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() || e.is_connect() {
                TransportError::Transient(e.to_string())
            } else {
                TransportError::Permanent(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let text = resp
            .text()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::from_status(status, &text));
        }
        match serde_json::from_str::<serde_json::Value>(&text) {
            Ok(serde_json::Value::Object(m)) => match m.get("text") {
                Some(serde_json::Value::String(s)) => Ok(s.clone()),
                _ => Ok(text),
            },
            _ => Ok(text),
        }
    }
}

/// Scripted reply for [`MockTransport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockReply {
    /// Answer text returned as-is.
    Body(String),
    /// HTTP-style failure, classified like a real response.
    Status(u16),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MockLine {
    judge_id: String,
    request_id: String,
    replies: Vec<MockReply>,
}

/// Replays scripted answers keyed by (judge id, request id). The k-th call
/// for a key gets the k-th reply; the last reply repeats. Unscripted keys
/// fail permanently.
#[derive(Default)]
pub struct MockTransport {
    script: HashMap<(String, String), Vec<MockReply>>,
    seen: Mutex<HashMap<(String, String), usize>>,
    calls: AtomicUsize,
}

impl MockTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn script(&mut self, judge_id: &str, request_id: &str, replies: Vec<MockReply>) {
        self.script
            .insert((judge_id.to_string(), request_id.to_string()), replies);
    }

    /// Loads a JSONL script: one
    /// `{"judge_id", "request_id", "replies": [{"body": ".."} | {"status": 429}]}`
    /// object per line.
    pub fn load(&mut self, path: &Path) -> Result<(), JuryError> {
        let text = fs::read_to_string(path)
            .map_err(|e| JuryError::Config(format!("{}: {e}", path.display())))?;
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let l: MockLine = serde_json::from_str(line).map_err(|e| {
                JuryError::Config(format!("{}:{}: {e}", path.display(), n + 1))
            })?;
            self.script(&l.judge_id, &l.request_id, l.replies);
        }
        Ok(())
    }

    /// Total calls received so far, across all keys.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for MockTransport {
    fn send(&self, judge: &JudgeConfig, request: &JudgeRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = (judge.judge_id.clone(), request.request_id.clone());
        let Some(replies) = self.script.get(&key).filter(|r| !r.is_empty()) else {
            return Err(TransportError::Permanent(format!(
                "no scripted reply for {} / {}",
                key.0, key.1
            )));
        };
        let k = {
            let mut seen = self.seen.lock().unwrap();
            let k = seen.entry(key).or_insert(0);
            *k += 1;
            *k - 1
        };
        match &replies[k.min(replies.len() - 1)] {
            MockReply::Body(b) => Ok(b.clone()),
            MockReply::Status(s) => Err(TransportError::from_status(*s, "scripted")),
        }
    }
}

/// Sends `mock:` judges to the mock and everything else over HTTP.
pub struct RoutingTransport {
    pub mock: MockTransport,
    pub http: Option<HttpTransport>,
}

impl Transport for RoutingTransport {
    fn send(&self, judge: &JudgeConfig, request: &JudgeRequest) -> Result<String, TransportError> {
        if judge.is_mock() {
            return self.mock.send(judge, request);
        }
        match &self.http {
            Some(h) => h.send(judge, request),
            None => Err(TransportError::Permanent("no HTTP transport configured".into())),
        }
    }
}
