use std::sync::Arc;
use std::time::{Duration, Instant};

use log::{debug, warn};
use thiserror::Error;

use crate::admission::{FifoSemaphore, TokenBudget};
use crate::config::{GatewayConfig, RetryPolicy};
use crate::ledger::{ModelReport, UsageLedger};
use crate::transport::{FixtureMock, RemoteTransport, Transport, TransportError};
use crate::types::{Backend, ChatRequest, ChatResponse, Part};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("gateway configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("request failed after {attempts} attempt(s): {source}")]
    Permanent {
        attempts: u32,
        #[source]
        source: TransportError,
    },
    #[error("retries exhausted after {attempts} attempt(s): {source}")]
    Exhausted {
        attempts: u32,
        #[source]
        source: TransportError,
    },
}

impl GatewayError {
    pub fn attempts(&self) -> u32 {
        match self {
            GatewayError::Permanent { attempts, .. } | GatewayError::Exhausted { attempts, .. } => *attempts,
            _ => 0,
        }
    }
}

/// Sends requests through one transport with bounded concurrency, an
/// optional token budget, retry on transient failures and usage accounting.
pub struct Gateway {
    transport: Arc<dyn Transport>,
    config: GatewayConfig,
    admission: FifoSemaphore,
    budget: Option<TokenBudget>,
    ledger: UsageLedger,
}

impl Gateway {
    /// Builds the configured backend. The API key is read from the
    /// environment variable named in the config; nothing touches the
    /// network here.
    pub fn from_config(config: GatewayConfig) -> Result<Self, GatewayError> {
        let v = config.violations();
        if !v.is_empty() {
            return Err(GatewayError::Config(v));
        }
        let transport: Arc<dyn Transport> = match config.backend {
            Backend::Remote => {
                let key = std::env::var(&config.api_key_env)
                    .ok()
                    .filter(|k| !k.trim().is_empty())
                    .ok_or_else(|| {
                        GatewayError::Config(vec![format!(
                            "environment variable {} is not set (needed by the remote backend)",
                            config.api_key_env
                        )])
                    })?;
                Arc::new(RemoteTransport::new(
                    config.endpoint.clone(),
                    key,
                    Duration::from_secs(config.timeout_s),
                ))
            }
            Backend::Mock => {
                let mock = match &config.fixtures {
                    Some(path) => FixtureMock::load(path, config.fallback.clone())
                        .map_err(|e| GatewayError::Config(vec![format!("fixtures: {e}")]))?,
                    None => FixtureMock::new([], config.fallback.clone()),
                };
                Arc::new(mock)
            }
        };
        Self::with_transport(config, transport)
    }

    pub fn with_transport(config: GatewayConfig, transport: Arc<dyn Transport>) -> Result<Self, GatewayError> {
        let v = config.violations();
        if !v.is_empty() {
            return Err(GatewayError::Config(v));
        }
        Ok(Self {
            admission: FifoSemaphore::new(config.max_in_flight),
            budget: config.tokens_per_minute.map(TokenBudget::per_minute),
            transport,
            config,
            ledger: UsageLedger::new(),
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn backend(&self) -> Backend {
        self.transport.backend()
    }

    /// A request for the configured model and sampling settings.
    pub fn request(&self, system: impl Into<String>, content: Vec<Part>) -> ChatRequest {
        self.config.request(system, content)
    }

    pub fn send(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.validate().map_err(GatewayError::InvalidRequest)?;
        let policy: &RetryPolicy = &self.config.retry;
        let mut attempt = 0;
        loop {
            attempt += 1;
            if attempt > 1 {
                let d = policy.delay(attempt);
                debug!("retrying {} in {:?} (attempt {attempt})", req.model, d);
                std::thread::sleep(d);
            }
            if let Some(b) = &self.budget {
                b.acquire(req.estimated_input_tokens() + u64::from(req.max_output_tokens));
            }
            let began = Instant::now();
            let result = {
                let _permit = self.admission.acquire();
                self.transport.complete(req)
            };
            match result {
                Ok(c) => {
                    // mock latency is reported as zero so outputs stay reproducible
                    let latency_s = match self.transport.backend() {
                        Backend::Mock => 0.0,
                        Backend::Remote => began.elapsed().as_secs_f64(),
                    };
                    self.ledger.record_success(&req.model, c.usage, latency_s, attempt);
                    return Ok(ChatResponse {
                        text: c.text,
                        usage: c.usage,
                        latency_s,
                        backend: self.transport.backend(),
                        model: req.model.clone(),
                        attempts: attempt,
                    });
                }
                Err(e) if e.is_transient() && attempt < policy.max_attempts => {
                    warn!("transient failure on attempt {attempt}: {e}");
                }
                Err(e) => {
                    self.ledger.record_failure(&req.model, attempt);
                    return Err(if e.is_transient() {
                        GatewayError::Exhausted {
                            attempts: attempt,
                            source: e,
                        }
                    } else {
                        GatewayError::Permanent {
                            attempts: attempt,
                            source: e,
                        }
                    });
                }
            }
        }
    }

    pub fn ledger(&self) -> &UsageLedger {
        &self.ledger
    }

    pub fn usage_report(&self) -> Vec<ModelReport> {
        self.ledger.report(&self.config.prices)
    }
}
