use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{sha256_hex, Gateway, LlmError, LlmRequest, LlmResponse};

/// One line of the cache file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub model: String,
    pub prompt_sha: String,
    pub response: String,
}

/// Completion cache, optionally persisted to an append-only JSONL file.
#[derive(Debug, Default)]
pub struct ResponseCache {
    entries: Mutex<HashMap<String, String>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache::default()
    }

    /// Loads existing records from `path` (if present) and appends new ones.
    /// Malformed lines, such as a torn final write, are skipped.
    pub fn open(path: &Path) -> Result<Self, LlmError> {
        let mut entries = HashMap::new();
        if path.exists() {
            for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(r) => {
                        entries.insert(r.key, r.response);
                    }
                    Err(e) => log::warn!("{}:{}: ignoring cache line: {e}", path.display(), n + 1),
                }
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ResponseCache { entries: Mutex::new(entries), file: Some(Mutex::new(file)), path: Some(path.to_path_buf()) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, req: &LlmRequest) -> Option<String> {
        self.entries.lock().unwrap().get(&req.cache_key()).cloned()
    }

    pub fn put(&self, req: &LlmRequest, response: &str) -> Result<(), LlmError> {
        let key = req.cache_key();
        let mut entries = self.entries.lock().unwrap();
        if entries.contains_key(&key) {
            return Ok(());
        }
        if let Some(file) = &self.file {
            let record = CacheRecord {
                key: key.clone(),
                model: req.model.clone(),
                prompt_sha: sha256_hex(&req.prompt),
                response: response.to_string(),
            };
            let mut line = serde_json::to_string(&record).expect("cache record serializes");
            line.push('\n');
            let mut f = file.lock().unwrap();
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        entries.insert(key, response.to_string());
        Ok(())
    }
}

/// Serves repeated requests from a [`ResponseCache`] and records fresh
/// successful completions in it.
pub struct CachedGateway<G> {
    inner: G,
    cache: ResponseCache,
}

impl<G: Gateway> CachedGateway<G> {
    pub fn new(inner: G, cache: ResponseCache) -> Self {
        CachedGateway { inner, cache }
    }

    pub fn inner(&self) -> &G {
        &self.inner
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }
}

impl<G: Gateway> Gateway for CachedGateway<G> {
    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, LlmError> {
        req.validate()?;
        if let Some(raw_text) = self.cache.get(req) {
            return Ok(LlmResponse { raw_text, model: req.model.clone(), latency: Duration::ZERO, attempt_count: 1, cached: true });
        }
        let resp = self.inner.complete(req)?;
        self.cache.put(req, &resp.raw_text)?;
        Ok(resp)
    }
}
