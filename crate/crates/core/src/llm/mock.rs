use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Gateway, LlmError, LlmRequest, LlmResponse};
use crate::prompting::prompt_input;

/// One scripted reply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStep {
    #[serde(default = "ok")]
    pub status: u16,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub delay_ms: u64,
    /// Send `body` verbatim instead of wrapping it in a chat-completions
    /// response (HTTP mock server only).
    #[serde(default)]
    pub raw: bool,
}

fn ok() -> u16 {
    200
}

impl ScenarioStep {
    pub fn reply(body: impl Into<String>) -> Self {
        ScenarioStep { status: 200, body: body.into(), delay_ms: 0, raw: false }
    }

    pub fn status(status: u16) -> Self {
        ScenarioStep { status, body: format!("status {status}"), delay_ms: 0, raw: false }
    }
}

/// Scripted mock behaviour.
///
/// Steps are served in order and the last one repeats once the script runs
/// out. With `echo` set, every successful step instead answers with the
/// reference translation of the prompt's input sentence (or the input itself
/// when no reference is known).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub steps: Vec<ScenarioStep>,
    #[serde(default)]
    pub echo: bool,
}

impl Scenario {
    pub fn echo() -> Self {
        Scenario { steps: Vec::new(), echo: true }
    }

    pub fn constant(body: impl Into<String>) -> Self {
        Scenario { steps: vec![ScenarioStep::reply(body)], echo: false }
    }

    pub fn from_steps(steps: Vec<ScenarioStep>) -> Self {
        Scenario { steps, echo: false }
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("scenario {}: {e}", path.display())))
    }

    pub(crate) fn step(&self, n: usize) -> ScenarioStep {
        match self.steps.len() {
            0 => ScenarioStep::reply(""),
            len => self.steps[n.min(len - 1)].clone(),
        }
    }
}

/// Answers prompt text for echo scenarios.
#[derive(Clone, Debug, Default)]
pub(crate) struct EchoBook {
    references: HashMap<String, String>,
}

impl EchoBook {
    pub(crate) fn new(references: HashMap<String, String>) -> Self {
        EchoBook { references }
    }

    pub(crate) fn answer(&self, prompt: &str) -> String {
        let input = prompt_input(prompt).unwrap_or(prompt);
        self.references.get(input).cloned().unwrap_or_else(|| input.to_string())
    }
}

/// In-process scripted gateway. Counts every call it receives.
#[derive(Debug)]
pub struct MockGateway {
    scenario: Scenario,
    echo: EchoBook,
    next: Mutex<usize>,
    calls: AtomicUsize,
}

impl MockGateway {
    pub fn new(scenario: Scenario) -> Self {
        MockGateway { scenario, echo: EchoBook::default(), next: Mutex::new(0), calls: AtomicUsize::new(0) }
    }

    /// Echo gateway answering each input sentence with its reference.
    pub fn echo(references: HashMap<String, String>) -> Self {
        MockGateway::new(Scenario::echo()).with_references(references)
    }

    pub fn with_references(mut self, references: HashMap<String, String>) -> Self {
        self.echo = EchoBook::new(references);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Gateway for MockGateway {
    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
        req.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let step = {
            let mut next = self.next.lock().unwrap();
            let s = self.scenario.step(*next);
            *next += 1;
            s
        };
        if step.delay_ms > 0 {
            std::thread::sleep(Duration::from_millis(step.delay_ms));
        }
        match step.status {
            200..=299 => {
                let raw_text = if self.scenario.echo { self.echo.answer(&req.prompt) } else { step.body };
                Ok(LlmResponse {
                    raw_text,
                    model: req.model.clone(),
                    latency: Duration::from_millis(step.delay_ms),
                    attempt_count: 1,
                    cached: false,
                })
            }
            429 | 500..=599 => Err(LlmError::Transport { status: Some(step.status), attempts: 1, message: step.body }),
            s => Err(LlmError::Request { status: s, body: step.body }),
        }
    }
}
