//! Train/test distribution gap: mean cosine similarity between two sentence
//! sets under TF-IDF or embedding representations.

use serde::{Deserialize, Serialize};

use crate::exec::{self, Execution};
use crate::retrieval::{dot, embed_normalized, sparse_dot, EmbeddingProvider, RetrievalError, TfidfModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tfidf,
    Semantic,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Tfidf => "TF-IDF",
            Method::Semantic => "Semantic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Eng,
    Mgm,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Eng => "eng",
            Language::Mgm => "mgm",
        }
    }
}

/// How cross-set similarities are reduced to one number.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Mean over all |A|×|B| pairs.
    #[default]
    MeanAll,
    /// Mean over A of the best match in B.
    MeanMax,
}

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("both sentence sets must be non-empty")]
    EmptySet,
    #[error("semantic similarity needs an embedding provider")]
    MissingProvider,
    #[error(transparent)]
    Provider(#[from] RetrievalError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    #[serde(rename = "Similarity")]
    pub similarity: String,
    #[serde(rename = "Lang")]
    pub language: Language,
    #[serde(rename = "Method")]
    pub method: String,
    #[serde(rename = "Score")]
    pub score: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub rows: Vec<SimilarityRow>,
}

/// Builds one labelled report row, e.g. `"Test x Train"`.
pub fn report_row(set_a: &str, set_b: &str, language: Language, method: Method, score: f64) -> SimilarityRow {
    SimilarityRow { similarity: format!("{set_a} x {set_b}"), language, method: method.label().to_string(), score }
}

/// Aggregated cosine similarity between `set_a` and `set_b`.
///
/// TF-IDF fits one vocabulary/IDF over both sets; the semantic method embeds
/// both sets with `provider`.
pub fn mean_pairwise_similarity<S: AsRef<str> + Sync>(
    set_a: &[S],
    set_b: &[S],
    method: Method,
    provider: Option<&dyn EmbeddingProvider>,
    aggregation: Aggregation,
    exec: Execution,
) -> Result<f64, AnalysisError> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(AnalysisError::EmptySet);
    }
    match method {
        Method::Tfidf => {
            let joint: Vec<&str> = set_a.iter().chain(set_b).map(AsRef::as_ref).collect();
            let model = TfidfModel::fit(&joint);
            let va: Vec<_> = set_a.iter().map(|s| model.vectorize(s.as_ref())).collect();
            let vb: Vec<_> = set_b.iter().map(|s| model.vectorize(s.as_ref())).collect();
            Ok(aggregate(&va, &vb, |x, y| sparse_dot(x, y), aggregation, exec))
        }
        Method::Semantic => {
            let provider = provider.ok_or(AnalysisError::MissingProvider)?;
            let own = |s: &[S]| s.iter().map(|t| t.as_ref().to_string()).collect::<Vec<_>>();
            let va = embed_normalized(provider, &own(set_a))?;
            let vb = embed_normalized(provider, &own(set_b))?;
            Ok(aggregate(&va, &vb, |x, y| dot(x, y), aggregation, exec))
        }
    }
}

fn aggregate<V: Sync>(
    va: &[V],
    vb: &[V],
    sim: impl Fn(&V, &V) -> f64 + Sync + Send,
    aggregation: Aggregation,
    exec: Execution,
) -> f64 {
    match aggregation {
        Aggregation::MeanAll => {
            let total = exec::sum(va, exec, |a| vb.iter().map(|b| sim(a, b)).sum::<f64>());
            total / (va.len() * vb.len()) as f64
        }
        Aggregation::MeanMax => {
            let best = exec::sum(va, exec, |a| vb.iter().map(|b| sim(a, b)).fold(f64::NEG_INFINITY, f64::max));
            best / va.len() as f64
        }
    }
}
