//! Sentence alignment: Gale-Church length-based dynamic programming with a
//! dictionary overlap score on top, plus threshold filtering and the
//! train/test split.

use std::collections::{HashMap, HashSet};
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_extract::{BilingualSection, DictionaryEntry};
use crate::exec::{self, Execution};
use crate::text::tokenize;

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("{kind} bead needs positive lengths on both sides (got {src} / {tgt})")]
    EmptyBeadSide { kind: BeadKind, src: usize, tgt: usize },
    #[error("invalid alignment config: {0}")]
    Config(String),
    #[error("corpus of {0} pairs is too small to split")]
    CorpusTooSmall(usize),
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    Fraction(f64),
}

/// An aligned English/Mambai sentence pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub english: String,
    pub mambai: String,
    #[serde(default)]
    pub score: f64,
    #[serde(default)]
    pub section: String,
}

impl SentencePair {
    pub fn new(english: impl Into<String>, mambai: impl Into<String>) -> Self {
        SentencePair { english: english.into(), mambai: mambai.into(), score: 1.0, section: String::new() }
    }

    /// Same text on both sides, ignoring score and section.
    pub fn same_text(&self, other: &SentencePair) -> bool {
        self.english == other.english && self.mambai == other.mambai
    }
}

/// Alignment unit: how many English and Mambai sentences it covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BeadKind {
    #[serde(rename = "1-1")]
    OneOne,
    #[serde(rename = "1-0")]
    OneZero,
    #[serde(rename = "0-1")]
    ZeroOne,
    #[serde(rename = "2-1")]
    TwoOne,
    #[serde(rename = "1-2")]
    OneTwo,
    #[serde(rename = "2-2")]
    TwoTwo,
}

impl BeadKind {
    pub const ALL: [BeadKind; 6] = [
        BeadKind::OneOne,
        BeadKind::OneZero,
        BeadKind::ZeroOne,
        BeadKind::TwoOne,
        BeadKind::OneTwo,
        BeadKind::TwoTwo,
    ];

    /// (english sentences, mambai sentences) consumed.
    pub fn counts(self) -> (usize, usize) {
        match self {
            BeadKind::OneOne => (1, 1),
            BeadKind::OneZero => (1, 0),
            BeadKind::ZeroOne => (0, 1),
            BeadKind::TwoOne => (2, 1),
            BeadKind::OneTwo => (1, 2),
            BeadKind::TwoTwo => (2, 2),
        }
    }

    pub fn is_insertion(self) -> bool {
        matches!(self, BeadKind::OneZero | BeadKind::ZeroOne)
    }
}

impl std::fmt::Display for BeadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (a, b) = self.counts();
        write!(f, "{a}-{b}")
    }
}

/// Prior probability of each bead kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchPriors {
    pub one_one: f64,
    pub one_zero: f64,
    pub zero_one: f64,
    pub two_one: f64,
    pub one_two: f64,
    pub two_two: f64,
}

impl Default for MatchPriors {
    fn default() -> Self {
        MatchPriors {
            one_one: 0.89,
            one_zero: 0.005,
            zero_one: 0.005,
            two_one: 0.0445,
            one_two: 0.0445,
            two_two: 0.011,
        }
    }
}

impl MatchPriors {
    pub fn get(&self, kind: BeadKind) -> f64 {
        match kind {
            BeadKind::OneOne => self.one_one,
            BeadKind::OneZero => self.one_zero,
            BeadKind::ZeroOne => self.zero_one,
            BeadKind::TwoOne => self.two_one,
            BeadKind::OneTwo => self.one_two,
            BeadKind::TwoTwo => self.two_two,
        }
    }

    pub fn sum(&self) -> f64 {
        BeadKind::ALL.iter().map(|&k| self.get(k)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    /// Expected Mambai characters per English character.
    pub mean_char_ratio: f64,
    /// Variance of the length difference per English character.
    pub variance: f64,
    pub match_priors: MatchPriors,
    /// Weight of the lexical score in the combined pair score.
    pub lex_weight: f64,
    pub score_threshold: f64,
    /// Tail probability standing in for the length term of 1-0 / 0-1 beads.
    pub insertion_tail: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            mean_char_ratio: 1.0,
            variance: 6.8,
            match_priors: MatchPriors::default(),
            lex_weight: 0.7,
            score_threshold: 0.2,
            insertion_tail: 0.02,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        let sum = self.match_priors.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(AlignError::Config(format!("match priors sum to {sum}, expected 1")));
        }
        if BeadKind::ALL.iter().any(|&k| !(self.match_priors.get(k) >= 0.0)) {
            return Err(AlignError::Config("match priors must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.lex_weight) {
            return Err(AlignError::Config(format!("lex_weight {} outside [0, 1]", self.lex_weight)));
        }
        if !(self.variance > 0.0) {
            return Err(AlignError::Config(format!("variance {} must be positive", self.variance)));
        }
        if !(self.mean_char_ratio > 0.0) {
            return Err(AlignError::Config("mean_char_ratio must be positive".into()));
        }
        if !(self.insertion_tail > 0.0 && self.insertion_tail <= 1.0) {
            return Err(AlignError::Config("insertion_tail must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

const PROB_FLOOR: f64 = 1e-12;

/// Complementary error function, Abramowitz & Stegun 7.1.26
/// (absolute error below 1.5e-7).
pub fn erfc(x: f64) -> f64 {
    const P: f64 = 0.327_591_1;
    const A: [f64; 5] = [0.254_829_592, -0.284_496_736, 1.421_413_741, -1.453_152_027, 1.061_405_429];
    let z = x.abs();
    let t = 1.0 / (1.0 + P * z);
    let poly = t * (A[0] + t * (A[1] + t * (A[2] + t * (A[3] + t * A[4]))));
    let r = poly * (-z * z).exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standardized length difference of a bead.
pub fn length_delta(src_chars: usize, tgt_chars: usize, cfg: &AlignConfig) -> f64 {
    let src = src_chars as f64;
    (tgt_chars as f64 - src * cfg.mean_char_ratio) / (src * cfg.variance).sqrt()
}

/// Two-sided tail probability `2 (1 - Φ(|δ|))` of the length difference.
pub fn length_score(src_chars: usize, tgt_chars: usize, cfg: &AlignConfig) -> f64 {
    if src_chars == 0 {
        return if tgt_chars == 0 { 1.0 } else { 0.0 };
    }
    erfc(length_delta(src_chars, tgt_chars, cfg).abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Negative log probability of a bead given its character lengths.
pub fn gale_church_cost(src_chars: usize, tgt_chars: usize, kind: BeadKind, cfg: &AlignConfig) -> Result<f64, AlignError> {
    let prior = -cfg.match_priors.get(kind).max(PROB_FLOOR).ln();
    if kind.is_insertion() {
        return Ok(prior - cfg.insertion_tail.max(PROB_FLOOR).ln());
    }
    if src_chars == 0 || tgt_chars == 0 {
        return Err(AlignError::EmptyBeadSide { kind, src: src_chars, tgt: tgt_chars });
    }
    let tail = length_score(src_chars, tgt_chars, cfg).max(PROB_FLOOR);
    Ok((prior - tail.ln()).max(0.0))
}

/// One step of an alignment path.
#[derive(Clone, Debug, PartialEq)]
pub struct Bead {
    pub kind: BeadKind,
    pub english: Range<usize>,
    pub mambai: Range<usize>,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub beads: Vec<Bead>,
    pub cost: f64,
}

/// Joined text of a sentence span, as used for merged beads.
pub fn join_span(sentences: &[String], span: Range<usize>) -> String {
    sentences[span].join(" ")
}

fn span_chars(char_counts: &[usize], span: Range<usize>) -> usize {
    let n = span.len();
    if n == 0 {
        0
    } else {
        char_counts[span].iter().sum::<usize>() + (n - 1)
    }
}

/// Cost of one bead starting at English index `i` and Mambai index `j`.
pub fn bead_cost(
    english_chars: &[usize],
    mambai_chars: &[usize],
    i: usize,
    j: usize,
    kind: BeadKind,
    cfg: &AlignConfig,
) -> Result<f64, AlignError> {
    let (di, dj) = kind.counts();
    gale_church_cost(
        span_chars(english_chars, i..i + di),
        span_chars(mambai_chars, j..j + dj),
        kind,
        cfg,
    )
}

/// Minimum-cost monotone bead path through the two sentence lists.
///
/// Ties are resolved by the order of [`BeadKind::ALL`].
pub fn align_path(english: &[String], mambai: &[String], cfg: &AlignConfig) -> Result<Alignment, AlignError> {
    let n = english.len();
    let m = mambai.len();
    let ec: Vec<usize> = english.iter().map(|s| s.chars().count()).collect();
    let mc: Vec<usize> = mambai.iter().map(|s| s.chars().count()).collect();

    let w = m + 1;
    let mut best = vec![f64::INFINITY; (n + 1) * w];
    let mut back: Vec<Option<(BeadKind, f64)>> = vec![None; (n + 1) * w];
    best[0] = 0.0;

    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut cell = f64::INFINITY;
            let mut from = None;
            for kind in BeadKind::ALL {
                let (di, dj) = kind.counts();
                if di > i || dj > j {
                    continue;
                }
                let prev = best[(i - di) * w + (j - dj)];
                if !prev.is_finite() {
                    continue;
                }
                let c = bead_cost(&ec, &mc, i - di, j - dj, kind, cfg)?;
                if prev + c < cell {
                    cell = prev + c;
                    from = Some((kind, c));
                }
            }
            best[i * w + j] = cell;
            back[i * w + j] = from;
        }
    }

    let mut beads = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let (kind, cost) = back[i * w + j].expect("every cell is reachable through insertions");
        let (di, dj) = kind.counts();
        beads.push(Bead { kind, english: i - di..i, mambai: j - dj..j, cost });
        i -= di;
        j -= dj;
    }
    beads.reverse();
    Ok(Alignment { beads, cost: best[n * w + m] })
}

/// English-token to Mambai-translation lookup used for lexical scoring.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    translations: HashMap<String, Vec<HashSet<String>>>,
}

impl Lexicon {
    /// Indexes single-token headwords of an English→Mambai dictionary.
    pub fn new(dict: &[DictionaryEntry]) -> Self {
        let mut translations: HashMap<String, Vec<HashSet<String>>> = HashMap::new();
        for e in dict {
            let head = tokenize(&e.entry);
            let target: HashSet<String> = tokenize(&e.translation).into_iter().collect();
            if head.len() == 1 && !target.is_empty() {
                translations.entry(head.into_iter().next().unwrap()).or_default().push(target);
            }
        }
        Lexicon { translations }
    }

    pub fn is_empty(&self) -> bool {
        self.translations.is_empty()
    }

    /// Fraction of English tokens with a dictionary translation that shares
    /// a token with the Mambai sentence.
    pub fn score(&self, english: &str, mambai: &str) -> f64 {
        let en = tokenize(english);
        if en.is_empty() || self.translations.is_empty() {
            return 0.0;
        }
        let mg: HashSet<String> = tokenize(mambai).into_iter().collect();
        let hits = en
            .iter()
            .filter(|tok| {
                self.translations
                    .get(tok.as_str())
                    .is_some_and(|senses| senses.iter().any(|s| !s.is_disjoint(&mg)))
            })
            .count();
        hits as f64 / en.len().max(1) as f64
    }
}

/// Dictionary overlap score in `[0, 1]`; see [`Lexicon::score`].
pub fn lexical_score(english: &str, mambai: &str, dict: &[DictionaryEntry]) -> f64 {
    Lexicon::new(dict).score(english, mambai)
}

/// Aligns one section and scores every non-insertion bead.
///
/// Merged beads emit the space-joined sentences as a single pair. The
/// returned pairs carry an empty section name.
pub fn align_section(
    english: &[String],
    mambai: &[String],
    lexicon: &Lexicon,
    cfg: &AlignConfig,
) -> Result<Vec<SentencePair>, AlignError> {
    cfg.validate()?;
    if english.is_empty() || mambai.is_empty() {
        return Ok(Vec::new());
    }
    let path = align_path(english, mambai, cfg)?;
    let lambda = cfg.lex_weight;
    Ok(path
        .beads
        .into_iter()
        .filter(|b| !b.kind.is_insertion())
        .map(|b| {
            let en = join_span(english, b.english);
            let mg = join_span(mambai, b.mambai);
            let len = length_score(en.chars().count(), mg.chars().count(), cfg);
            let lex = lexicon.score(&en, &mg);
            SentencePair { score: lambda * lex + (1.0 - lambda) * len, english: en, mambai: mg, section: String::new() }
        })
        .collect())
}

/// Aligns every section, tagging pairs with the section title. Output keeps
/// section order.
pub fn align_sections(
    sections: &[BilingualSection],
    dict: &[DictionaryEntry],
    cfg: &AlignConfig,
    exec: Execution,
) -> Result<Vec<SentencePair>, AlignError> {
    cfg.validate()?;
    let lexicon = Lexicon::new(dict);
    let per_section = exec::map(sections, exec, |s| {
        align_section(&s.english_sentences, &s.mambai_sentences, &lexicon, cfg).map(|pairs| {
            pairs
                .into_iter()
                .map(|mut p| {
                    p.section = s.title.clone();
                    p
                })
                .collect::<Vec<_>>()
        })
    });
    let mut out = Vec::new();
    for pairs in per_section {
        out.extend(pairs?);
    }
    Ok(out)
}

/// Keeps pairs scoring at least `threshold`, in order.
pub fn filter_pairs(pairs: &[SentencePair], threshold: f64) -> Vec<SentencePair> {
    pairs.iter().filter(|p| p.score >= threshold).cloned().collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<SentencePair>,
    pub test: Vec<SentencePair>,
    pub seed: u64,
}

/// Seeded shuffle, then the first `round(test_fraction * n)` shuffled pairs
/// become the test set. Both halves keep corpus order.
pub fn split_corpus(pairs: &[SentencePair], test_fraction: f64, seed: u64) -> Result<CorpusSplit, AlignError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(AlignError::Fraction(test_fraction));
    }
    if pairs.len() < 2 {
        return Err(AlignError::CorpusTooSmall(pairs.len()));
    }
    let n_test = (test_fraction * pairs.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_test = vec![false; pairs.len()];
    for &i in &order[..n_test] {
        in_test[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (p, t) in pairs.iter().zip(in_test) {
        if t {
            test.push(p.clone());
        } else {
            train.push(p.clone());
        }
    }
    Ok(CorpusSplit { train, test, seed })
}
