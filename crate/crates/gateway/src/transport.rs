//! Backends that turn a request into model text.

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::Fallback;
use crate::types::{Backend, ChatRequest, Part, Usage};

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransportError {
    #[error("HTTP {status}: {message}")]
    Status { status: u16, message: String },
    #[error("request timed out")]
    Timeout,
    #[error("network error: {0}")]
    Network(String),
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("no fixture for request digest {0}")]
    NoFixture(String),
}

impl TransportError {
    /// Rate limiting, server errors, timeouts and dropped connections are
    /// worth retrying.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportError::Status { status, .. } => *status == 429 || (500..600).contains(status),
            TransportError::Timeout | TransportError::Network(_) => true,
            TransportError::Protocol(_) | TransportError::NoFixture(_) => false,
        }
    }
}

pub trait Transport: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<Completion, TransportError>;

    fn backend(&self) -> Backend;
}

/// SHA-256 (hex) of the canonical JSON of `(system, content, model)`.
/// Part order matters; sampling settings do not.
pub fn request_digest(req: &ChatRequest) -> String {
    #[derive(Serialize)]
    struct Canonical<'a> {
        system: &'a str,
        content: &'a [Part],
        model: &'a str,
    }
    let bytes = serde_json::to_vec(&Canonical {
        system: &req.system,
        content: &req.content,
        model: &req.model,
    })
    .expect("request serialises");
    hex::encode(Sha256::digest(&bytes))
}

/// One line of a fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub digest: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    /// Free-form label, e.g. the trajectory id, for humans editing the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Deterministic replay of recorded answers keyed by request digest.
#[derive(Debug, Clone)]
pub struct FixtureMock {
    entries: HashMap<String, FixtureEntry>,
    fallback: Fallback,
}

impl FixtureMock {
    pub fn new(entries: impl IntoIterator<Item = FixtureEntry>, fallback: Fallback) -> Self {
        Self {
            entries: entries.into_iter().map(|e| (e.digest.clone(), e)).collect(),
            fallback,
        }
    }

    /// Reads a JSONL fixture file; blank lines and `//` comments are skipped.
    pub fn load(path: &Path, fallback: Fallback) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let e: FixtureEntry =
                serde_json::from_str(line).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?;
            entries.push(e);
        }
        Ok(Self::new(entries, fallback))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn estimated_usage(req: &ChatRequest, text: &str) -> Usage {
    Usage {
        input_tokens: req.estimated_input_tokens(),
        output_tokens: (text.len() as u64).div_ceil(4),
    }
}

impl Transport for FixtureMock {
    fn complete(&self, req: &ChatRequest) -> Result<Completion, TransportError> {
        let digest = request_digest(req);
        match self.entries.get(&digest) {
            Some(e) => Ok(Completion {
                usage: e.usage.unwrap_or_else(|| estimated_usage(req, &e.text)),
                text: e.text.clone(),
            }),
            None => match &self.fallback {
                Fallback::Error => Err(TransportError::NoFixture(digest)),
                Fallback::Canned(text) => Ok(Completion {
                    usage: estimated_usage(req, text),
                    text: text.clone(),
                }),
            },
        }
    }

    fn backend(&self) -> Backend {
        Backend::Mock
    }
}

/// Transport backed by a closure; used for scripted and instrumented mocks.
pub struct FnTransport<F> {
    f: F,
}

impl<F> FnTransport<F>
where
    F: Fn(&ChatRequest) -> Result<Completion, TransportError> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f }
    }
}

impl<F> Transport for FnTransport<F>
where
    F: Fn(&ChatRequest) -> Result<Completion, TransportError> + Send + Sync,
{
    fn complete(&self, req: &ChatRequest) -> Result<Completion, TransportError> {
        (self.f)(req)
    }

    fn backend(&self) -> Backend {
        Backend::Mock
    }
}

/// OpenAI-compatible chat-completions endpoint. Images travel as data URLs.
pub struct RemoteTransport {
    agent: ureq::Agent,
    endpoint: String,
    api_key: String,
}

impl RemoteTransport {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            endpoint: endpoint.into(),
            api_key: api_key.into(),
        }
    }
}

/// Request body in chat-completions wire format.
pub fn wire_body(req: &ChatRequest) -> Value {
    let parts: Vec<Value> = req
        .content
        .iter()
        .map(|p| match p {
            Part::Text { text } => json!({"type": "text", "text": text}),
            Part::Image { media_type, data } => json!({
                "type": "image_url",
                "image_url": {"url": format!("data:{media_type};base64,{data}")},
            }),
        })
        .collect();
    json!({
        "model": req.model,
        "messages": [
            {"role": "system", "content": req.system},
            {"role": "user", "content": parts},
        ],
        "max_tokens": req.max_output_tokens,
        "temperature": req.temperature,
    })
}

/// Extracts the first choice's text and the token usage.
pub fn parse_wire_response(body: &Value) -> Result<Completion, TransportError> {
    let content = body
        .pointer("/choices/0/message/content")
        .ok_or_else(|| TransportError::Protocol("no choices[0].message.content".into()))?;
    let text = match content {
        Value::String(s) => s.clone(),
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join(""),
        Value::Null => String::new(),
        other => return Err(TransportError::Protocol(format!("unexpected content {other}"))),
    };
    let tok = |k: &str| {
        body.pointer(&format!("/usage/{k}"))
            .and_then(Value::as_u64)
            .unwrap_or(0)
    };
    Ok(Completion {
        text,
        usage: Usage {
            input_tokens: tok("prompt_tokens"),
            output_tokens: tok("completion_tokens"),
        },
    })
}

fn error_message(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| v.pointer("/error/message").and_then(Value::as_str).map(str::to_string))
        .unwrap_or_else(|| body.chars().take(500).collect())
}

impl Transport for RemoteTransport {
    fn complete(&self, req: &ChatRequest) -> Result<Completion, TransportError> {
        let result = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .header("Content-Type", "application/json")
            .send_json(wire_body(req));
        let mut resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(TransportError::Timeout),
            Err(e) => return Err(TransportError::Network(e.to_string())),
        };
        let status = resp.status().as_u16();
        let mut body = String::new();
        resp.body_mut()
            .as_reader()
            .read_to_string(&mut body)
            .map_err(|e| TransportError::Network(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status {
                status,
                message: error_message(&body),
            });
        }
        let v: Value = serde_json::from_str(&body).map_err(|e| TransportError::Protocol(e.to_string()))?;
        parse_wire_response(&v)
    }

    fn backend(&self) -> Backend {
        Backend::Remote
    }
}
