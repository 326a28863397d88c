use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{json, Value};

use super::mock::{EchoBook, Scenario};
use crate::retrieval::{EmbeddingProvider, HashedTrigramProvider};

#[derive(Default)]
struct Counters {
    hits: AtomicUsize,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
}

struct State {
    scenario: Scenario,
    echo: EchoBook,
    next: Mutex<usize>,
    counters: Counters,
    embedder: HashedTrigramProvider,
    bodies: Mutex<Vec<Value>>,
}

/// Scriptable HTTP stand-in for a chat-completions server.
///
/// Serves `POST /v1/chat/completions` from a [`Scenario`] and
/// `POST /embed` with hashed-trigram vectors. Stops when dropped.
pub struct MockServer {
    server: Arc<tiny_http::Server>,
    state: Arc<State>,
    url: String,
    worker: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(scenario: Scenario) -> std::io::Result<Self> {
        MockServer::start_on("127.0.0.1:0", scenario, HashMap::new())
    }

    pub fn start_on(addr: &str, scenario: Scenario, references: HashMap<String, String>) -> std::io::Result<Self> {
        let server = Arc::new(tiny_http::Server::http(addr).map_err(std::io::Error::other)?);
        let port = server.server_addr().to_ip().map(|a| a.port()).unwrap_or(0);
        let state = Arc::new(State {
            scenario,
            echo: EchoBook::new(references),
            next: Mutex::new(0),
            counters: Counters::default(),
            embedder: HashedTrigramProvider::default(),
            bodies: Mutex::new(Vec::new()),
        });
        let worker = {
            let server = Arc::clone(&server);
            let state = Arc::clone(&state);
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    let state = Arc::clone(&state);
                    std::thread::spawn(move || handle(&state, request));
                }
            })
        };
        Ok(MockServer { server, state, url: format!("http://127.0.0.1:{port}"), worker: Some(worker) })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Chat-completion requests received so far.
    pub fn hits(&self) -> usize {
        self.state.counters.hits.load(Ordering::SeqCst)
    }

    /// Most chat-completion requests handled concurrently.
    pub fn peak_in_flight(&self) -> usize {
        self.state.counters.peak.load(Ordering::SeqCst)
    }

    /// JSON bodies of the chat-completion requests received.
    pub fn request_bodies(&self) -> Vec<Value> {
        self.state.bodies.lock().unwrap().clone()
    }

    /// Blocks serving requests until the process exits.
    pub fn wait(mut self) {
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

fn respond(request: tiny_http::Request, status: u16, body: String) {
    let header = tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
    let _ = request.respond(tiny_http::Response::from_string(body).with_status_code(status).with_header(header));
}

fn handle(state: &State, mut request: tiny_http::Request) {
    let mut body = String::new();
    if request.as_reader().read_to_string(&mut body).is_err() {
        return respond(request, 400, r#"{"error": "unreadable body"}"#.into());
    }
    let parsed: Value = match serde_json::from_str(&body) {
        Ok(v) => v,
        Err(e) => return respond(request, 400, json!({"error": e.to_string()}).to_string()),
    };
    let path = request.url().split('?').next().unwrap_or("").to_string();
    match (request.method(), path.as_str()) {
        (tiny_http::Method::Post, "/embed") => {
            let texts: Vec<String> = serde_json::from_value(parsed["texts"].clone()).unwrap_or_default();
            let vectors = state.embedder.embed(&texts).unwrap_or_default();
            respond(request, 200, json!({ "vectors": vectors }).to_string())
        }
        (tiny_http::Method::Post, "/v1/chat/completions") => {
            let c = &state.counters;
            c.hits.fetch_add(1, Ordering::SeqCst);
            let now = c.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            c.peak.fetch_max(now, Ordering::SeqCst);
            state.bodies.lock().unwrap().push(parsed.clone());

            let step = {
                let mut next = state.next.lock().unwrap();
                let s = state.scenario.step(*next);
                *next += 1;
                s
            };
            if step.delay_ms > 0 {
                std::thread::sleep(Duration::from_millis(step.delay_ms));
            }
            let reply = if step.raw || !(200..300).contains(&step.status) {
                step.body
            } else {
                let content = if state.scenario.echo {
                    let prompt = parsed["messages"]
                        .as_array()
                        .and_then(|m| m.last())
                        .and_then(|m| m["content"].as_str())
                        .unwrap_or("");
                    state.echo.answer(prompt)
                } else {
                    step.body
                };
                json!({
                    "id": "mock",
                    "object": "chat.completion",
                    "model": parsed["model"],
                    "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
                })
                .to_string()
            };
            c.in_flight.fetch_sub(1, Ordering::SeqCst);
            respond(request, step.status, reply)
        }
        _ => respond(request, 404, r#"{"error": "not found"}"#.into()),
    }
}
