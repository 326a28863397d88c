//! Corpus-level BLEU, chrF and chrF++ following the sacreBLEU defaults
//! (13a tokenization, exponential smoothing, β = 2, character order 6).

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("{hyps} hypotheses for {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("cannot score an empty corpus")]
    Empty,
    #[error("invalid metric config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BleuSmoothing {
    /// Orders with no matches get precision `1 / (2^k · total)`, k counting
    /// such orders so far.
    ExpFloor,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub bleu_max_order: usize,
    pub bleu_smoothing: BleuSmoothing,
    pub chrf_char_order: usize,
    pub chrf_word_order: usize,
    pub chrf_beta: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            bleu_max_order: 4,
            bleu_smoothing: BleuSmoothing::ExpFloor,
            chrf_char_order: 6,
            chrf_word_order: 0,
            chrf_beta: 2.0,
        }
    }
}

impl MetricConfig {
    pub fn chrf_plus_plus() -> Self {
        MetricConfig { chrf_word_order: 2, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.bleu_max_order == 0 || self.chrf_char_order == 0 {
            return Err(MetricError::Config("n-gram orders must be at least 1".into()));
        }
        if !(self.chrf_beta > 0.0) {
            return Err(MetricError::Config("beta must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu: f64,
    pub chrf: f64,
    pub chrf_pp: f64,
    pub n_sentences: usize,
}

fn check<S: AsRef<str>>(hyps: &[S], refs: &[S]) -> Result<(), MetricError> {
    if hyps.len() != refs.len() {
        return Err(MetricError::LengthMismatch { hyps: hyps.len(), refs: refs.len() });
    }
    if hyps.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

static TOKENIZE_13A: LazyLock<[(Regex, &'static str); 4]> = LazyLock::new(|| {
    [
        (Regex::new(r"([\{-~\[-` -&\(-\+:-@/])").unwrap(), " $1 "),
        (Regex::new(r"([^0-9])([\.,])").unwrap(), "$1 $2 "),
        (Regex::new(r"([\.,])([^0-9])").unwrap(), " $1 $2"),
        (Regex::new(r"([0-9])(-)").unwrap(), "$1 $2 "),
    ]
});

/// mteval-v13a tokenization as used by sacreBLEU.
pub fn tokenize_13a(line: &str) -> Vec<String> {
    let mut s = line.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if s.contains('&') {
        s = s.replace("&quot;", "\"").replace("&amp;", "&").replace("&lt;", "<").replace("&gt;", ">");
    }
    let mut s = format!(" {s} ");
    for (re, rep) in TOKENIZE_13A.iter() {
        s = re.replace_all(&s, *rep).into_owned();
    }
    s.split_whitespace().map(str::to_string).collect()
}

fn ngram_counts<T: Hash + Eq + Clone>(items: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if items.len() >= n {
        for w in items.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU on a 0-100 scale.
pub fn bleu<S: AsRef<str>>(hyps: &[S], refs: &[S], cfg: &MetricConfig) -> Result<f64, MetricError> {
    check(hyps, refs)?;
    cfg.validate()?;
    let order = cfg.bleu_max_order;
    let mut correct = vec![0usize; order];
    let mut total = vec![0usize; order];
    let (mut sys_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hyps.iter().zip(refs) {
        let h = tokenize_13a(h.as_ref());
        let r = tokenize_13a(r.as_ref());
        sys_len += h.len();
        ref_len += r.len();
        for n in 1..=order {
            let hc = ngram_counts(&h, n);
            let rc = ngram_counts(&r, n);
            total[n - 1] += h.len().saturating_sub(n - 1);
            correct[n - 1] += hc.iter().map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0))).sum::<usize>();
        }
    }
    Ok(bleu_from_stats(&correct, &total, sys_len, ref_len, cfg.bleu_smoothing))
}

fn bleu_from_stats(correct: &[usize], total: &[usize], sys_len: usize, ref_len: usize, smoothing: BleuSmoothing) -> f64 {
    if correct.iter().all(|&c| c == 0) {
        return 0.0;
    }
    let bp = if sys_len >= ref_len {
        1.0
    } else if sys_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / sys_len as f64).exp()
    };
    let mut log_sum = 0.0;
    let mut smooth = 1.0;
    for (&c, &t) in correct.iter().zip(total) {
        if t == 0 {
            return 0.0;
        }
        let p = if c > 0 {
            c as f64 / t as f64
        } else {
            match smoothing {
                BleuSmoothing::ExpFloor => {
                    smooth *= 2.0;
                    1.0 / (smooth * t as f64)
                }
                BleuSmoothing::None => return 0.0,
            }
        };
        log_sum += p.ln();
    }
    (100.0 * bp * (log_sum / correct.len() as f64).exp()).clamp(0.0, 100.0)
}

const PUNCTUATION: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

/// Whitespace split with one leading or trailing ASCII punctuation mark
/// peeled off each word, as chrF++ defines word n-grams.
pub fn chrf_words(sentence: &str) -> Vec<String> {
    let mut out = Vec::new();
    for w in sentence.split_whitespace() {
        let chars: Vec<char> = w.chars().collect();
        if chars.len() == 1 {
            out.push(w.to_string());
        } else if PUNCTUATION.contains(chars[chars.len() - 1]) {
            out.push(chars[..chars.len() - 1].iter().collect());
            out.push(chars[chars.len() - 1].to_string());
        } else if PUNCTUATION.contains(chars[0]) {
            out.push(chars[0].to_string());
            out.push(chars[1..].iter().collect());
        } else {
            out.push(w.to_string());
        }
    }
    out
}

/// (hypothesis n-grams, reference n-grams, matches) for one order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NgramStats {
    pub hyp: usize,
    pub reference: usize,
    pub matched: usize,
}

fn order_stats<T: Hash + Eq + Clone>(h: &[T], r: &[T], n: usize) -> NgramStats {
    let hc = ngram_counts(h, n);
    let rc = ngram_counts(r, n);
    let reference: usize = rc.values().sum();
    let hyp: usize = hc.values().sum();
    let matched = hc.iter().map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0))).sum();
    NgramStats { hyp: if reference > 0 { hyp } else { 0 }, reference, matched }
}

/// Per-order statistics for one segment: character orders first, then word orders.
pub fn chrf_segment_stats(hyp: &str, reference: &str, cfg: &MetricConfig) -> Vec<NgramStats> {
    let hc: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let rc: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let mut stats: Vec<NgramStats> = (1..=cfg.chrf_char_order).map(|n| order_stats(&hc, &rc, n)).collect();
    if cfg.chrf_word_order > 0 {
        let hw = chrf_words(hyp);
        let rw = chrf_words(reference);
        stats.extend((1..=cfg.chrf_word_order).map(|n| order_stats(&hw, &rw, n)));
    }
    stats
}

/// F-score from summed statistics, averaging precision and recall over the
/// orders where both sides have n-grams.
pub fn chrf_from_stats(stats: &[NgramStats], beta: f64) -> f64 {
    let (mut prec, mut rec, mut effective) = (0.0, 0.0, 0usize);
    for s in stats {
        if s.hyp > 0 && s.reference > 0 {
            prec += s.matched as f64 / s.hyp as f64;
            rec += s.matched as f64 / s.reference as f64;
            effective += 1;
        }
    }
    if effective == 0 {
        return 0.0;
    }
    prec /= effective as f64;
    rec /= effective as f64;
    let b2 = beta * beta;
    if prec + rec == 0.0 {
        return 0.0;
    }
    (100.0 * (1.0 + b2) * prec * rec / (b2 * prec + rec)).clamp(0.0, 100.0)
}

/// Corpus chrF (`chrf_word_order = 0`) or chrF++ (`chrf_word_order = 2`).
pub fn chrf<S: AsRef<str>>(hyps: &[S], refs: &[S], cfg: &MetricConfig) -> Result<f64, MetricError> {
    check(hyps, refs)?;
    cfg.validate()?;
    let mut totals = vec![NgramStats::default(); cfg.chrf_char_order + cfg.chrf_word_order];
    for (h, r) in hyps.iter().zip(refs) {
        for (t, s) in totals.iter_mut().zip(chrf_segment_stats(h.as_ref(), r.as_ref(), cfg)) {
            t.hyp += s.hyp;
            t.reference += s.reference;
            t.matched += s.matched;
        }
    }
    Ok(chrf_from_stats(&totals, cfg.chrf_beta))
}

/// BLEU, chrF and chrF++ with default settings.
pub fn evaluate<S: AsRef<str>>(hyps: &[S], refs: &[S]) -> Result<MetricReport, MetricError> {
    let base = MetricConfig::default();
    Ok(MetricReport {
        bleu: bleu(hyps, refs, &base)?,
        chrf: chrf(hyps, refs, &base)?,
        chrf_pp: chrf(hyps, refs, &MetricConfig::chrf_plus_plus())?,
        n_sentences: hyps.len(),
    })
}
