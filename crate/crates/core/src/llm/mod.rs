//! Chat-completion access for translation prompts: the OpenAI-compatible HTTP
//! client, a scriptable in-process mock, a persistent response cache and a
//! mock HTTP server for integration tests.

mod cache;
mod http;
mod mock;
mod server;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheRecord, CachedGateway, ResponseCache};
pub use http::{GatewayConfig, HttpGateway, RetryPolicy};
pub use mock::{MockGateway, Scenario, ScenarioStep};
pub use server::MockServer;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("request failed after {attempts} attempts (last status: {})", status.map_or("none".to_string(), |s| s.to_string()))]
    Transport { status: Option<u16>, attempts: u32, message: String },
    #[error("request rejected with HTTP {status}: {body}")]
    Request { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    Protocol(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error("model returned an empty translation")]
    EmptyTranslation,
    #[error("response cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(with = "secs")]
    pub timeout: Duration,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Default for LlmRequest {
    fn default() -> Self {
        LlmRequest {
            model: "gpt-4-turbo".into(),
            prompt: String::new(),
            temperature: 0.0,
            max_tokens: 256,
            timeout: Duration::from_secs(60),
        }
    }
}

impl LlmRequest {
    pub fn new(model: impl Into<String>, prompt: impl Into<String>) -> Self {
        LlmRequest { model: model.into(), prompt: prompt.into(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.prompt.is_empty() {
            return Err(LlmError::InvalidRequest("prompt is empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Cache key: SHA-256 over model, prompt and temperature.
    pub fn cache_key(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.model.as_bytes());
        h.update([0x1f]);
        h.update(self.prompt.as_bytes());
        h.update([0x1f]);
        h.update(self.temperature.to_string().as_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LlmResponse {
    pub raw_text: String,
    pub model: String,
    pub latency: Duration,
    pub attempt_count: u32,
    pub cached: bool,
}

/// Anything that can answer a completion request.
pub trait Gateway: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

impl<G: Gateway + ?Sized> Gateway for &G {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<G: Gateway + ?Sized> Gateway for Box<G> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<G: Gateway + ?Sized> Gateway for std::sync::Arc<G> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

const QUOTE_PAIRS: [(char, char); 4] = [('"', '"'), ('\'', '\''), ('“', '”'), ('‘', '’')];

/// Extracts the hypothesis from a raw completion: trims, drops a leading
/// `Mambai:` label and one pair of enclosing quotes, and folds newlines
/// into single spaces.
pub fn parse_translation(raw: &str) -> Result<String, LlmError> {
    let mut text = raw.trim();
    if let Some(rest) = strip_label(text) {
        text = rest.trim();
    }
    for (open, close) in QUOTE_PAIRS {
        if text.chars().count() >= 2 && text.starts_with(open) && text.ends_with(close) {
            text = text[open.len_utf8()..text.len() - close.len_utf8()].trim();
            break;
        }
    }
    let folded = text
        .split(['\n', '\r'])
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    if folded.is_empty() {
        return Err(LlmError::EmptyTranslation);
    }
    // a label may have been hidden inside the quotes
    if strip_label(&folded).is_some() || QUOTE_PAIRS.iter().any(|&(o, c)| folded.chars().count() >= 2 && folded.starts_with(o) && folded.ends_with(c)) {
        return parse_translation(&folded);
    }
    Ok(folded)
}

fn strip_label(text: &str) -> Option<&str> {
    const LABEL: &str = "mambai:";
    let head = text.get(..LABEL.len())?;
    head.eq_ignore_ascii_case(LABEL).then(|| &text[LABEL.len()..])
}
