use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{rank_top_k, RetrievalError, RetrievedExample, Source};
use crate::aligner::SentencePair;
use crate::exec::{self, Execution};
use crate::text::tokenize;

/// Sparse vector as (dimension, weight) sorted by dimension.
pub type SparseVec = Vec<(u32, f64)>;

/// Vocabulary plus smoothed IDF weights fitted on a document collection.
#[derive(Clone, Debug, PartialEq)]
pub struct TfidfModel {
    vocabulary: HashMap<String, u32>,
    idf: Vec<f64>,
}

impl TfidfModel {
    /// Fits `idf(t) = ln((1 + N) / (1 + df(t))) + 1` over `docs`.
    pub fn fit<S: AsRef<str>>(docs: &[S]) -> Self {
        let mut vocabulary: HashMap<String, u32> = HashMap::new();
        let mut df: Vec<usize> = Vec::new();
        for doc in docs {
            let mut seen: Vec<u32> = tokenize(doc.as_ref())
                .into_iter()
                .map(|tok| {
                    let next = vocabulary.len() as u32;
                    let id = *vocabulary.entry(tok).or_insert(next);
                    if id as usize == df.len() {
                        df.push(0);
                    }
                    id
                })
                .collect();
            seen.sort_unstable();
            seen.dedup();
            for id in seen {
                df[id as usize] += 1;
            }
        }
        let n = docs.len() as f64;
        let idf = df.iter().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
        TfidfModel { vocabulary, idf }
    }

    pub fn vocabulary_len(&self) -> usize {
        self.idf.len()
    }

    pub fn idf_of(&self, token: &str) -> Option<f64> {
        self.vocabulary.get(token).map(|&i| self.idf[i as usize])
    }

    /// Raw term frequency times IDF, L2-normalized. Out-of-vocabulary tokens
    /// are ignored; an all-OOV text yields the empty (zero) vector.
    pub fn vectorize(&self, text: &str) -> SparseVec {
        let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
        for tok in tokenize(text) {
            if let Some(&id) = self.vocabulary.get(&tok) {
                *tf.entry(id).or_insert(0.0) += 1.0;
            }
        }
        let mut v: SparseVec = tf.into_iter().map(|(id, c)| (id, c * self.idf[id as usize])).collect();
        let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut v {
                *w /= norm;
            }
        }
        v
    }
}

/// Dot product of two dimension-sorted sparse vectors.
pub fn sparse_dot(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// TF-IDF rows over the English side of the training pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct TfidfIndex {
    model: TfidfModel,
    rows: Vec<SparseVec>,
    pairs: Vec<SentencePair>,
}

impl TfidfIndex {
    pub fn build(train: &[SentencePair]) -> Result<Self, RetrievalError> {
        if train.is_empty() {
            return Err(RetrievalError::EmptyTrainingSet);
        }
        let english: Vec<&str> = train.iter().map(|p| p.english.as_str()).collect();
        let model = TfidfModel::fit(&english);
        let rows = english.iter().map(|e| model.vectorize(e)).collect();
        Ok(TfidfIndex { model, rows, pairs: train.to_vec() })
    }

    pub fn model(&self) -> &TfidfModel {
        &self.model
    }

    pub fn rows(&self) -> &[SparseVec] {
        &self.rows
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Cosine similarity of `query` to every training row.
    pub fn similarities(&self, query: &str) -> Vec<f64> {
        let q = self.model.vectorize(query);
        self.rows.iter().map(|r| sparse_dot(&q, r)).collect()
    }

    pub fn to_json(&self) -> String {
        let mut vocabulary = BTreeMap::new();
        for (tok, &id) in &self.model.vocabulary {
            vocabulary.insert(tok.clone(), id);
        }
        let file = IndexFile {
            vocabulary,
            idf: self.model.idf.clone(),
            rows: self.rows.clone(),
            pairs: self.pairs.clone(),
        };
        serde_json::to_string(&file).expect("index serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, RetrievalError> {
        let file: IndexFile = serde_json::from_str(json)?;
        let dims = file.idf.len();
        if file.rows.len() != file.pairs.len() {
            return Err(RetrievalError::Corrupt(format!("{} rows for {} pairs", file.rows.len(), file.pairs.len())));
        }
        if file.vocabulary.values().any(|&id| id as usize >= dims)
            || file.rows.iter().flatten().any(|&(id, _)| id as usize >= dims)
        {
            return Err(RetrievalError::Corrupt("dimension index out of range".into()));
        }
        let model = TfidfModel { vocabulary: file.vocabulary.into_iter().collect(), idf: file.idf };
        Ok(TfidfIndex { model, rows: file.rows, pairs: file.pairs })
    }
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    vocabulary: BTreeMap<String, u32>,
    idf: Vec<f64>,
    rows: Vec<SparseVec>,
    pairs: Vec<SentencePair>,
}

/// Top-`k` training pairs by TF-IDF cosine, ties broken by training index.
pub fn retrieve_tfidf(index: &TfidfIndex, query: &str, k: usize) -> Vec<RetrievedExample> {
    if k == 0 {
        return Vec::new();
    }
    rank_top_k(&index.similarities(query), k)
        .into_iter()
        .map(|(i, sim)| RetrievedExample { pair: index.pairs[i].clone(), similarity: sim, source: Source::Tfidf, train_index: i })
        .collect()
}

/// [`retrieve_tfidf`] for many queries at once.
pub fn retrieve_tfidf_batch<S: AsRef<str> + Sync>(
    index: &TfidfIndex,
    queries: &[S],
    k: usize,
    exec: Execution,
) -> Vec<Vec<RetrievedExample>> {
    exec::map(queries, exec, |q| retrieve_tfidf(index, q.as_ref(), k))
}
