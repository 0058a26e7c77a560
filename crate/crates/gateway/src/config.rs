use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::types::{Backend, ChatRequest, Part};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_delay_ms: 500,
            max_delay_ms: 20_000,
        }
    }
}

impl RetryPolicy {
    /// Wait before attempt `next` (2-based): `base * 2^(next - 2)`, capped.
    pub fn delay(&self, next: u32) -> Duration {
        let exp = next.saturating_sub(2).min(30);
        let ms = self.base_delay_ms.saturating_mul(1u64 << exp).min(self.max_delay_ms);
        Duration::from_millis(ms)
    }
}

/// What the mock answers when a request has no fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "text")]
pub enum Fallback {
    Error,
    Canned(String),
}

/// Dollars per million tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Price {
    pub input_per_mtok: f64,
    pub output_per_mtok: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub backend: Backend,
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub model: String,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    /// Sliding one-minute budget of input plus output tokens.
    pub tokens_per_minute: Option<u64>,
    pub timeout_s: u64,
    pub max_output_tokens: u32,
    pub temperature: f64,
    pub fixtures: Option<PathBuf>,
    pub fallback: Fallback,
    pub prices: BTreeMap<String, Price>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Mock,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            api_key_env: "TRAJLENS_API_KEY".into(),
            model: "gpt-4o-mini".into(),
            max_in_flight: 4,
            retry: RetryPolicy::default(),
            tokens_per_minute: None,
            timeout_s: 120,
            max_output_tokens: 1024,
            temperature: 0.0,
            fixtures: None,
            fallback: Fallback::Error,
            prices: BTreeMap::new(),
        }
    }
}

impl GatewayConfig {
    /// A request for the configured model and sampling settings.
    pub fn request(&self, system: impl Into<String>, content: Vec<Part>) -> ChatRequest {
        let mut r = ChatRequest::new(self.model.clone(), system, content);
        r.max_output_tokens = self.max_output_tokens;
        r.temperature = self.temperature;
        r
    }

    /// Every violated constraint, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.max_in_flight < 1 {
            v.push("gateway.max_in_flight must be >= 1".to_string());
        }
        if self.retry.max_attempts < 1 {
            v.push("gateway.retry.max_attempts must be >= 1".to_string());
        }
        if self.tokens_per_minute == Some(0) {
            v.push("gateway.tokens_per_minute must be > 0 when set".to_string());
        }
        if self.timeout_s == 0 {
            v.push("gateway.timeout_s must be > 0".to_string());
        }
        if self.model.trim().is_empty() {
            v.push("gateway.model must not be empty".to_string());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            v.push(format!(
                "gateway.temperature must be in [0, 2] (got {})",
                self.temperature
            ));
        }
        if self.backend == Backend::Remote {
            if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
                v.push(format!(
                    "gateway.endpoint must be an http(s) URL (got {:?})",
                    self.endpoint
                ));
            }
            if self.api_key_env.trim().is_empty() {
                v.push("gateway.api_key_env must name an environment variable".to_string());
            }
        }
        for (model, p) in &self.prices {
            if !(p.input_per_mtok >= 0.0 && p.output_per_mtok >= 0.0) {
                v.push(format!("gateway.prices.{model}: prices must be >= 0"));
            }
        }
        v
    }
}
