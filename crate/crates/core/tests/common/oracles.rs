//! Slow, direct reimplementations used to check the library.

use std::collections::HashMap;

use mambai_core::aligner::{gale_church_cost, AlignConfig, BeadKind};

/// Minimum total cost over every monotone bead path, found by listing the
/// paths one by one.
pub fn brute_force_alignment_cost(english: &[String], mambai: &[String], cfg: &AlignConfig) -> f64 {
    let ec: Vec<usize> = english.iter().map(|s| s.chars().count()).collect();
    let mc: Vec<usize> = mambai.iter().map(|s| s.chars().count()).collect();
    let mut best = f64::INFINITY;
    let mut path: Vec<(BeadKind, usize, usize)> = Vec::new();
    enumerate(&ec, &mc, 0, 0, &mut path, &mut |p| {
        let total: f64 = p.iter().map(|&(k, i, j)| step_cost(&ec, &mc, i, j, k, cfg)).sum();
        best = best.min(total);
    });
    best
}

fn merged_len(lens: &[usize]) -> usize {
    if lens.is_empty() {
        0
    } else {
        lens.iter().sum::<usize>() + lens.len() - 1
    }
}

fn step_cost(ec: &[usize], mc: &[usize], i: usize, j: usize, kind: BeadKind, cfg: &AlignConfig) -> f64 {
    let (di, dj) = kind.counts();
    gale_church_cost(merged_len(&ec[i..i + di]), merged_len(&mc[j..j + dj]), kind, cfg).unwrap()
}

fn enumerate(
    ec: &[usize],
    mc: &[usize],
    i: usize,
    j: usize,
    path: &mut Vec<(BeadKind, usize, usize)>,
    visit: &mut dyn FnMut(&[(BeadKind, usize, usize)]),
) {
    if i == ec.len() && j == mc.len() {
        visit(path);
        return;
    }
    for kind in BeadKind::ALL {
        let (di, dj) = kind.counts();
        if i + di <= ec.len() && j + dj <= mc.len() {
            path.push((kind, i, j));
            enumerate(ec, mc, i + di, j + dj, path, visit);
            path.pop();
        }
    }
}

pub fn simple_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Dense TF-IDF cosine of `query` against each document, computed without
/// any normalization shortcuts.
pub fn dense_tfidf_cosines(docs: &[String], query: &str) -> Vec<f64> {
    let toks: Vec<Vec<String>> = docs.iter().map(|d| simple_tokens(d)).collect();
    let mut vocab: Vec<String> = toks.iter().flatten().cloned().collect();
    vocab.sort();
    vocab.dedup();
    let n = docs.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|t| {
            let df = toks.iter().filter(|d| d.contains(t)).count() as f64;
            ((1.0 + n) / (1.0 + df)).ln() + 1.0
        })
        .collect();
    let dense = |tokens: &[String]| -> Vec<f64> {
        vocab.iter().zip(&idf).map(|(t, w)| tokens.iter().filter(|x| *x == t).count() as f64 * w).collect()
    };
    let q = dense(&simple_tokens(query));
    toks.iter().map(|d| cosine(&dense(d), &q)).collect()
}

fn fnv(bytes: &[u8]) -> u64 {
    let mut h: u64 = 14695981039346656037;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(1099511628211);
    }
    h
}

pub fn dense_trigram_vector(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for tok in simple_tokens(text) {
        let wrapped: Vec<char> = format!("<{tok}>").chars().collect();
        for k in 0..wrapped.len().saturating_sub(2) {
            let tri: String = wrapped[k..k + 3].iter().collect();
            let h = fnv(tri.as_bytes());
            let bucket = ((h >> 1) % dim as u64) as usize;
            v[bucket] += if h % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    v
}

pub fn dense_trigram_cosines(docs: &[String], query: &str) -> Vec<f64> {
    let q = dense_trigram_vector(query, 512);
    docs.iter().map(|d| cosine(&dense_trigram_vector(d, 512), &q)).collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Top-k indices: highest cosine first, equal cosines (to 1e-9) by lower index.
pub fn rank(cosines: &[f64], k: usize) -> Vec<usize> {
    let key = |s: f64| (s * 1e9).round() as i64;
    let mut idx: Vec<usize> = (0..cosines.len()).collect();
    idx.sort_by(|&a, &b| key(cosines[b]).cmp(&key(cosines[a])).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

pub fn counts<T: std::hash::Hash + Eq + Clone>(items: &[T]) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for x in items {
        *m.entry(x.clone()).or_insert(0) += 1;
    }
    m
}
