use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::Deserialize;
use serde_json::json;

use super::{Gateway, LlmError, LlmRequest, LlmResponse};

/// Exponential backoff for 429 / 5xx / connection failures.
#[derive(Clone, Debug, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
    /// Relative jitter; 0.2 means ±20%.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base_delay: Duration::from_secs(1), factor: 2.0, jitter: 0.2 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based), without jitter.
    pub fn nominal_delay(&self, retry: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(retry.saturating_sub(1) as i32))
    }

    fn jittered_delay(&self, retry: u32) -> Duration {
        let nominal = self.nominal_delay(retry);
        if self.jitter <= 0.0 {
            return nominal;
        }
        let scale = rand::rng().random_range(1.0 - self.jitter..=1.0 + self.jitter);
        nominal.mul_f64(scale.max(0.0))
    }
}

#[derive(Clone, Debug)]
pub struct GatewayConfig {
    /// Server root, e.g. `https://api.openai.com`; `/v1/chat/completions` is appended.
    pub base_url: String,
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
    /// Maximum concurrent requests.
    pub max_in_flight: usize,
    /// Send the prompt's first line as a system message instead of keeping
    /// the whole prompt in one user message.
    pub system_split: bool,
}

impl GatewayConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        GatewayConfig {
            base_url: base_url.into(),
            api_key: None,
            retry: RetryPolicy::default(),
            max_in_flight: 4,
            system_split: false,
        }
    }

    /// Reads `LLM_BASE_URL` and `LLM_API_KEY`.
    pub fn from_env() -> Result<Self, LlmError> {
        let base = std::env::var("LLM_BASE_URL").map_err(|_| LlmError::Config("LLM_BASE_URL is not set".into()))?;
        let mut cfg = GatewayConfig::new(base);
        cfg.api_key = std::env::var("LLM_API_KEY").ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }

    pub fn endpoint(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/v1") {
            format!("{base}/chat/completions")
        } else {
            format!("{base}/v1/chat/completions")
        }
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Slots {
    limit: usize,
    used: Mutex<usize>,
    freed: Condvar,
    peak: Mutex<usize>,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(limit: usize) -> Self {
        Slots { limit: limit.max(1), used: Mutex::new(0), freed: Condvar::new(), peak: Mutex::new(0) }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut used = self.used.lock().unwrap();
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap();
        }
        *used += 1;
        let mut peak = self.peak.lock().unwrap();
        *peak = (*peak).max(*used);
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

/// OpenAI-compatible chat-completions client.
pub struct HttpGateway {
    cfg: GatewayConfig,
    endpoint: String,
    agent: ureq::Agent,
    slots: Slots,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Retry { status: Option<u16>, message: String },
    Fatal(LlmError),
}

impl HttpGateway {
    pub fn new(cfg: GatewayConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        HttpGateway { endpoint: cfg.endpoint(), slots: Slots::new(cfg.max_in_flight), cfg, agent }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    /// Most requests observed in flight at once.
    pub fn peak_in_flight(&self) -> usize {
        *self.slots.peak.lock().unwrap()
    }

    fn body(&self, req: &LlmRequest) -> serde_json::Value {
        let messages = match req.prompt.split_once('\n') {
            Some((system, rest)) if self.cfg.system_split => json!([
                {"role": "system", "content": system},
                {"role": "user", "content": rest.trim_start_matches('\n')},
            ]),
            _ => json!([{"role": "user", "content": req.prompt}]),
        };
        json!({
            "model": req.model,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        })
    }

    fn attempt(&self, req: &LlmRequest, body: &serde_json::Value) -> Attempt {
        let mut call = self
            .agent
            .post(&self.endpoint)
            .config()
            .timeout_global(Some(req.timeout))
            .build()
            .header("Content-Type", "application/json");
        if let Some(key) = &self.cfg.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match call.send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry { status: None, message: e.to_string() },
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry { status: Some(status), message: e.to_string() },
        };
        match status {
            200..=299 => match serde_json::from_str::<ChatResponse>(&text) {
                Ok(parsed) => match parsed.choices.into_iter().next().and_then(|c| c.message.content) {
                    Some(content) => Attempt::Done(content),
                    None => Attempt::Fatal(LlmError::Protocol("response has no choices[0].message.content".into())),
                },
                Err(e) => Attempt::Fatal(LlmError::Protocol(e.to_string())),
            },
            429 | 500..=599 => Attempt::Retry { status: Some(status), message: text },
            _ => Attempt::Fatal(LlmError::Request { status, body: text }),
        }
    }
}

impl Gateway for HttpGateway {
    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
        req.validate()?;
        let body = self.body(req);
        let _slot = self.slots.acquire();
        let started = Instant::now();
        let max = self.cfg.retry.max_attempts.max(1);
        let mut last = (None, String::new());
        for attempt in 1..=max {
            if attempt > 1 {
                std::thread::sleep(self.cfg.retry.jittered_delay(attempt - 1));
            }
            match self.attempt(req, &body) {
                Attempt::Done(raw_text) => {
                    return Ok(LlmResponse {
                        raw_text,
                        model: req.model.clone(),
                        latency: started.elapsed(),
                        attempt_count: attempt,
                        cached: false,
                    })
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry { status, message } => {
                    log::debug!("attempt {attempt}/{max} failed: {status:?} {message}");
                    last = (status, message);
                }
            }
        }
        Err(LlmError::Transport { status: last.0, attempts: max, message: last.1 })
    }
}
