//! Few-shot example selection (TF-IDF and embedding similarity) and
//! dictionary lookup for prompt construction.

mod embedding;
mod tfidf;

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embedding::{
    dot, embed_normalized, fnv1a64, normalize, retrieve_semantic, EmbeddingProvider, EmbeddingStore,
    HashedTrigramProvider, RemoteEmbedder,
};
pub use tfidf::{retrieve_tfidf, retrieve_tfidf_batch, sparse_dot, SparseVec, TfidfIndex, TfidfModel};

pub use crate::text::tokenize;
use crate::aligner::SentencePair;
use crate::corpus_extract::DictionaryEntry;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot build an index from an empty training set")]
    EmptyTrainingSet,
    #[error("embedding store was built by `{store}` but queried with `{provider}`")]
    ProviderMismatch { store: String, provider: String },
    #[error("embedding provider failed: {0}")]
    Provider(String),
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Tfidf,
    Embedding,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Tfidf => "tfidf",
            Source::Embedding => "embedding",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievedExample {
    pub pair: SentencePair,
    pub similarity: f64,
    pub source: Source,
    /// Row of the pair in the training set.
    pub train_index: usize,
}

/// Similarities are compared at this resolution so that mathematically equal
/// scores computed along different float paths still tie.
const SIMILARITY_RESOLUTION: f64 = 1e12;

/// Indices of the `k` highest similarities, ties by lower index. Returned
/// similarities are rounded to the ranking resolution.
pub(crate) fn rank_top_k(sims: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = sims
        .iter()
        .enumerate()
        .map(|(i, &s)| (i, (s * SIMILARITY_RESOLUTION).round() / SIMILARITY_RESOLUTION))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

/// Combines TF-IDF and embedding results into one prompt example list.
///
/// Takes the first `n_tfidf` distinct pairs from `tfidf`, then the first
/// `n_embed` pairs from `embedding` that are not already present. Callers
/// that overfetch (2k per source) get duplicates replaced by the next
/// candidates; otherwise duplicates simply shrink the list.
pub fn merge_examples(
    tfidf: &[RetrievedExample],
    embedding: &[RetrievedExample],
    n_tfidf: usize,
    n_embed: usize,
) -> Vec<RetrievedExample> {
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    let mut out = Vec::with_capacity(n_tfidf + n_embed);
    for (list, quota) in [(tfidf, n_tfidf), (embedding, n_embed)] {
        let mut taken = 0;
        for ex in list {
            if taken == quota {
                break;
            }
            if seen.insert((ex.pair.english.as_str(), ex.pair.mambai.as_str())) {
                out.push(ex.clone());
                taken += 1;
            }
        }
    }
    out
}

/// Dictionary entries whose headword occurs in `input`.
///
/// Matching is on exact lowercase tokens; a multi-word headword must occur as
/// a contiguous token run. Entries come out in order of first occurrence in
/// the input (dictionary order among entries matching at the same position),
/// each at most once.
pub fn lookup_dictionary(input: &str, dict: &[DictionaryEntry]) -> Vec<DictionaryEntry> {
    let tokens = tokenize(input);
    let heads: Vec<Vec<String>> = dict.iter().map(|e| tokenize(&e.entry)).collect();
    let mut emitted = vec![false; dict.len()];
    let mut out = Vec::new();
    for start in 0..tokens.len() {
        for (i, head) in heads.iter().enumerate() {
            if emitted[i] || head.is_empty() || start + head.len() > tokens.len() {
                continue;
            }
            if tokens[start..start + head.len()] == head[..] {
                emitted[i] = true;
                out.push(dict[i].clone());
            }
        }
    }
    out
}

/// Training-set indexes plus the provider needed for semantic queries.
pub struct ExampleSelector {
    tfidf: TfidfIndex,
    semantic: Option<(EmbeddingStore, Arc<dyn EmbeddingProvider>)>,
}

impl ExampleSelector {
    pub fn new(train: &[SentencePair], provider: Option<Arc<dyn EmbeddingProvider>>) -> Result<Self, RetrievalError> {
        let tfidf = TfidfIndex::build(train)?;
        let semantic = match provider {
            Some(p) => Some((EmbeddingStore::build(train, p.as_ref())?, p)),
            None => None,
        };
        Ok(ExampleSelector { tfidf, semantic })
    }

    pub fn tfidf(&self) -> &TfidfIndex {
        &self.tfidf
    }

    pub fn has_semantic(&self) -> bool {
        self.semantic.is_some()
    }

    /// `n_tfidf` + `n_embed` distinct examples for `query`, overfetching
    /// twice the quota from each source to refill after deduplication.
    pub fn select(&self, query: &str, n_tfidf: usize, n_embed: usize) -> Result<Vec<RetrievedExample>, RetrievalError> {
        let by_tfidf = retrieve_tfidf(&self.tfidf, query, 2 * n_tfidf);
        let by_embedding = if n_embed == 0 {
            Vec::new()
        } else {
            let (store, provider) = self
                .semantic
                .as_ref()
                .ok_or_else(|| RetrievalError::Provider("semantic examples requested without an embedding provider".into()))?;
            retrieve_semantic(store, provider.as_ref(), query, 2 * n_embed)?
        };
        Ok(merge_examples(&by_tfidf, &by_embedding, n_tfidf, n_embed))
    }
}
