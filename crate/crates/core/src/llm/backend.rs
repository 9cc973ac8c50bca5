//! Chat-completion backends: an OpenAI-compatible HTTP client, a deterministic
//! offline mock, and a scripted backend for driving error paths.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::util::stable_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// What a request is asking for. Remote backends only see the rendered
/// messages; offline backends use this to simulate an answer.
#[derive(Debug, Clone, PartialEq)]
pub enum PromptTask {
    GenerateTypes {
        samples: Vec<String>,
        m_fmt: usize,
        m_cont: usize,
    },
    Annotate {
        attribute: String,
        format_types: Vec<String>,
        content_types: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmRequest {
    pub messages: Vec<ChatMessage>,
    pub task: PromptTask,
    /// Zero-based attempt number for this logical request.
    pub attempt: usize,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub trait LlmBackend: Send + Sync {
    /// Returns the assistant message content for a chat request.
    fn complete(&self, request: &LlmRequest) -> Result<String, BackendError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn complete(&self, request: &LlmRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&self, request: &LlmRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Wraps a backend and counts calls.
pub struct CountingBackend<B> {
    inner: B,
    calls: AtomicUsize,
}

impl<B> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }
}

impl<B: LlmBackend> LlmBackend for CountingBackend<B> {
    fn complete(&self, request: &LlmRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

/// Backend driven by a closure, for tests and fault injection.
pub struct ScriptedBackend<F> {
    script: F,
}

impl<F> ScriptedBackend<F>
where
    F: Fn(&LlmRequest) -> Result<String, BackendError> + Send + Sync,
{
    pub fn new(script: F) -> Self {
        Self { script }
    }
}

impl<F> LlmBackend for ScriptedBackend<F>
where
    F: Fn(&LlmRequest) -> Result<String, BackendError> + Send + Sync,
{
    fn complete(&self, request: &LlmRequest) -> Result<String, BackendError> {
        (self.script)(request)
    }
}

/// Backend that replays a fixed sequence of responses, then repeats the last.
pub struct SequenceBackend {
    responses: Vec<Result<String, BackendError>>,
    next: Mutex<usize>,
}

impl SequenceBackend {
    pub fn new(responses: Vec<Result<String, BackendError>>) -> Self {
        assert!(!responses.is_empty());
        Self {
            responses,
            next: Mutex::new(0),
        }
    }
}

impl LlmBackend for SequenceBackend {
    fn complete(&self, _request: &LlmRequest) -> Result<String, BackendError> {
        let mut next = self.next.lock().expect("sequence lock");
        let i = (*next).min(self.responses.len() - 1);
        *next += 1;
        self.responses[i].clone()
    }
}

const MOCK_FORMAT_NAMES: [&str; 4] = ["numeric code", "short name", "phrase", "detailed description"];

/// Deterministic offline stand-in for an LLM.
///
/// Format type follows surface heuristics on the attribute (all digits, then
/// token-count thresholds); content type and confidences are derived from a
/// stable hash of the attribute text. The description repeats the attribute so
/// that any signal planted in the text reaches the embedding.
#[derive(Debug, Clone, Default)]
pub struct MockLlm;

impl MockLlm {
    pub fn format_bucket(attribute: &str) -> usize {
        let trimmed = attribute.trim();
        if !trimmed.is_empty() && trimmed.chars().all(|c| c.is_ascii_digit()) {
            return 0;
        }
        match trimmed.split_whitespace().count() {
            0..=3 => 1,
            4..=12 => 2,
            _ => 3,
        }
    }

    fn type_names(m_fmt: usize, m_cont: usize) -> (Vec<String>, Vec<String>) {
        let fmt = (0..m_fmt)
            .map(|i| {
                MOCK_FORMAT_NAMES
                    .get(i)
                    .map_or_else(|| format!("format variant {}", i + 1), |s| s.to_string())
            })
            .collect();
        let cont = (0..m_cont).map(|i| format!("topic cluster {}", i + 1)).collect();
        (fmt, cont)
    }

    fn annotate(attribute: &str, format_types: &[String], content_types: &[String]) -> serde_json::Value {
        let h = stable_hash(b"mock-llm", attribute.as_bytes());
        let fmt = Self::format_bucket(attribute).min(format_types.len().saturating_sub(1));
        let cont = (h % content_types.len().max(1) as u64) as usize;
        let unit = |shift: u32| ((h >> shift) & 0xffff) as f64 / 65535.0;
        let format_confidence = round3(0.6 + 0.4 * unit(16));
        let content_confidence = round3(0.5 + 0.5 * unit(32));
        let fmt_name = format_types.get(fmt).cloned().unwrap_or_default();
        let cont_name = content_types.get(cont).cloned().unwrap_or_default();
        json!({
            "description": format!("A {fmt_name} attribute that reads: {attribute}"),
            "format_type": fmt_name,
            "format_confidence": format_confidence,
            "content_type": cont_name,
            "content_confidence": content_confidence,
            "reasoning": format!(
                "The value has {} characters and {} tokens, which fits '{}'; its wording is closest to '{}'.",
                attribute.chars().count(),
                attribute.split_whitespace().count(),
                fmt_name,
                cont_name
            ),
        })
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

impl LlmBackend for MockLlm {
    fn complete(&self, request: &LlmRequest) -> Result<String, BackendError> {
        let value = match &request.task {
            PromptTask::GenerateTypes { m_fmt, m_cont, .. } => {
                let (fmt, cont) = Self::type_names(*m_fmt, *m_cont);
                json!({ "format_types": fmt, "content_types": cont })
            }
            PromptTask::Annotate {
                attribute,
                format_types,
                content_types,
            } => Self::annotate(attribute, format_types, content_types),
        };
        Ok(value.to_string())
    }
}

/// Client for an OpenAI-compatible `/v1/chat/completions` endpoint.
pub struct OpenAiCompatibleBackend {
    url: String,
    api_key: Option<String>,
    model: String,
    client: reqwest::blocking::Client,
}

pub const ENV_LLM_ENDPOINT: &str = "GHGRL_LLM_ENDPOINT";
pub const ENV_LLM_API_KEY: &str = "GHGRL_LLM_API_KEY";

impl OpenAiCompatibleBackend {
    pub fn new(endpoint: &str, api_key: Option<String>, model: impl Into<String>, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            url: format!("{}/v1/chat/completions", endpoint.trim_end_matches('/')),
            api_key,
            model: model.into(),
            client,
        })
    }

    /// Reads the endpoint and API key from `GHGRL_LLM_ENDPOINT` / `GHGRL_LLM_API_KEY`.
    pub fn from_env(model: impl Into<String>, timeout: Duration) -> Result<Self, BackendError> {
        let endpoint = std::env::var(ENV_LLM_ENDPOINT)
            .map_err(|_| BackendError::Transport(format!("{ENV_LLM_ENDPOINT} is not set")))?;
        let key = std::env::var(ENV_LLM_API_KEY).ok().filter(|k| !k.is_empty());
        Self::new(&endpoint, key, model, timeout)
    }

    pub fn request_body(&self, request: &LlmRequest) -> serde_json::Value {
        json!({
            "model": self.model,
            "temperature": 0,
            "messages": request.messages,
        })
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

impl LlmBackend for OpenAiCompatibleBackend {
    fn complete(&self, request: &LlmRequest) -> Result<String, BackendError> {
        let mut req = self.client.post(&self.url).json(&self.request_body(request));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: excerpt(&body, 500),
            });
        }
        let parsed: CompletionResponse = serde_json::from_str(&body)
            .map_err(|e| BackendError::Protocol(format!("{e}; body: {}", excerpt(&body, 200))))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Protocol("response has no choices[0].message.content".into()))
    }
}

pub(crate) fn excerpt(text: &str, max_chars: usize) -> String {
    let mut out: String = text.chars().take(max_chars).collect();
    if text.chars().count() > max_chars {
        out.push('…');
    }
    out
}
