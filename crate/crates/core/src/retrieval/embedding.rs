use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{rank_top_k, RetrievalError, RetrievedExample, Source};
use crate::aligner::SentencePair;
use crate::text::tokenize;

/// Turns sentences into dense vectors.
///
/// Implementations may return vectors of any norm; callers normalize.
pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier; stores remember which provider built them.
    fn id(&self) -> &str;

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError>;
}

pub fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Deterministic bag of hashed character trigrams.
///
/// Every token is wrapped as `<token>` and each character trigram is hashed
/// with FNV-1a; bits above the lowest pick the bucket and the lowest bit
/// (hash parity) picks the sign.
#[derive(Clone, Debug)]
pub struct HashedTrigramProvider {
    dim: usize,
    id: String,
}

impl Default for HashedTrigramProvider {
    fn default() -> Self {
        HashedTrigramProvider::new(512)
    }
}

impl HashedTrigramProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedTrigramProvider { dim, id: format!("hashed-trigram-{dim}") }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Unnormalized trigram counts.
    pub fn raw_vector(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let mut buf = String::new();
        for tok in tokenize(text) {
            let chars: Vec<char> = std::iter::once('<').chain(tok.chars()).chain(std::iter::once('>')).collect();
            for w in chars.windows(3) {
                buf.clear();
                buf.extend(w);
                let h = fnv1a64(buf.as_bytes());
                let bucket = ((h >> 1) % self.dim as u64) as usize;
                v[bucket] += if h & 1 == 0 { 1.0 } else { -1.0 };
            }
        }
        v
    }
}

impl EmbeddingProvider for HashedTrigramProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError> {
        Ok(texts
            .iter()
            .map(|t| {
                let mut v = self.raw_vector(t);
                normalize(&mut v);
                v
            })
            .collect())
    }
}

/// Client for an embedding service speaking
/// `POST {base}/embed {"texts": [...]}` → `{"vectors": [[...], ...]}`.
pub struct RemoteEmbedder {
    endpoint: String,
    id: String,
    agent: ureq::Agent,
    batch_size: usize,
    max_in_flight: usize,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

impl RemoteEmbedder {
    pub fn new(base_url: &str) -> Self {
        let base = base_url.trim_end_matches('/');
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteEmbedder {
            endpoint: format!("{base}/embed"),
            id: format!("remote:{base}"),
            agent,
            batch_size: 64,
            max_in_flight: 4,
        }
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    /// Upper bound on concurrent requests.
    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError> {
        let err = |m: String| RetrievalError::Provider(format!("{}: {m}", self.endpoint));
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&EmbedRequest { texts })
            .map_err(|e| err(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| err(e.to_string()))?;
        if status != 200 {
            return Err(err(format!("HTTP {status}: {body}")));
        }
        let parsed: EmbedResponse = serde_json::from_str(&body).map_err(|e| err(format!("malformed response: {e}")))?;
        if parsed.vectors.len() != texts.len() {
            return Err(err(format!("{} vectors for {} texts", parsed.vectors.len(), texts.len())));
        }
        Ok(parsed.vectors)
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError> {
        let batches: Vec<&[String]> = texts.chunks(self.batch_size).collect();
        let mut out = Vec::with_capacity(texts.len());
        for wave in batches.chunks(self.max_in_flight) {
            let results: Vec<_> = std::thread::scope(|s| {
                let handles: Vec<_> = wave.iter().map(|b| s.spawn(|| self.embed_batch(b))).collect();
                handles.into_iter().map(|h| h.join().expect("embedding worker panicked")).collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}

/// Unit-normalized embeddings of the training English sentences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStore {
    pub provider_id: String,
    vectors: Vec<Vec<f64>>,
    pairs: Vec<SentencePair>,
}

impl EmbeddingStore {
    pub fn build(train: &[SentencePair], provider: &dyn EmbeddingProvider) -> Result<Self, RetrievalError> {
        if train.is_empty() {
            return Err(RetrievalError::EmptyTrainingSet);
        }
        let english: Vec<String> = train.iter().map(|p| p.english.clone()).collect();
        let vectors = embed_normalized(provider, &english)?;
        Ok(EmbeddingStore { provider_id: provider.id().to_string(), vectors, pairs: train.to_vec() })
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

/// Embeds and unit-normalizes, checking that all vectors share one size.
pub fn embed_normalized(provider: &dyn EmbeddingProvider, texts: &[String]) -> Result<Vec<Vec<f64>>, RetrievalError> {
    let mut vectors = provider.embed(texts)?;
    if vectors.len() != texts.len() {
        return Err(RetrievalError::Provider(format!("{} vectors for {} texts", vectors.len(), texts.len())));
    }
    if let Some(first) = vectors.first() {
        let d = first.len();
        if vectors.iter().any(|v| v.len() != d) {
            return Err(RetrievalError::Provider("inconsistent embedding dimensions".into()));
        }
    }
    vectors.iter_mut().for_each(|v| normalize(v));
    Ok(vectors)
}

/// Top-`k` training pairs by embedding cosine, ties broken by training index.
pub fn retrieve_semantic(
    store: &EmbeddingStore,
    provider: &dyn EmbeddingProvider,
    query: &str,
    k: usize,
) -> Result<Vec<RetrievedExample>, RetrievalError> {
    if provider.id() != store.provider_id {
        return Err(RetrievalError::ProviderMismatch { store: store.provider_id.clone(), provider: provider.id().to_string() });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let q = embed_normalized(provider, &[query.to_string()])?.pop().unwrap_or_default();
    if q.len() != store.dim() {
        return Err(RetrievalError::Provider(format!("query has dimension {}, store {}", q.len(), store.dim())));
    }
    let sims: Vec<f64> = store.vectors.iter().map(|v| dot(&q, v)).collect();
    Ok(rank_top_k(&sims, k)
        .into_iter()
        .map(|(i, sim)| RetrievedExample { pair: store.pairs[i].clone(), similarity: sim, source: Source::Embedding, train_index: i })
        .collect())
}
