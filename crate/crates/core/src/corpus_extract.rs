//! Mining dictionaries and bilingual sentence sections out of font-annotated
//! document dumps.
//!
//! The input is a [`RunDocument`]: the document text cut into runs that share
//! one font weight. Bold marks dictionary headwords (in dictionary files) and
//! Mambai sentences (in the phrase-book section); upper-case runs delimit
//! phrase-book sections.

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default part-of-speech abbreviation pattern, matched case-insensitively at
/// the start of a dictionary body.
pub const DEFAULT_POS_PATTERN: &str = r"^(adj|adv|n|v|pron|prep|conj|interj|num)\.";

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("invalid part-of-speech pattern: {0}")]
    Pattern(#[from] regex::Error),
    #[error("malformed run document: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub text: String,
    pub bold: bool,
}

impl Run {
    pub fn bold(text: impl Into<String>) -> Self {
        Run { text: text.into(), bold: true }
    }

    pub fn normal(text: impl Into<String>) -> Self {
        Run { text: text.into(), bold: false }
    }
}

/// Ordered text runs with their font weight.
///
/// Run text is trimmed on construction and blank runs are dropped.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RunDocument {
    runs: Vec<Run>,
}

impl RunDocument {
    pub fn new(runs: impl IntoIterator<Item = Run>) -> Self {
        let runs = runs
            .into_iter()
            .filter_map(|r| {
                let text = r.text.trim();
                (!text.is_empty()).then(|| Run { text: text.to_string(), bold: r.bold })
            })
            .collect();
        RunDocument { runs }
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Concatenation of all run texts, in order.
    pub fn text(&self) -> String {
        self.runs.iter().map(|r| r.text.as_str()).collect()
    }

    pub fn from_json(json: &str) -> Result<Self, ExtractError> {
        #[derive(Deserialize)]
        struct Raw {
            runs: Vec<Run>,
        }
        let raw: Raw = serde_json::from_str(json)?;
        Ok(RunDocument::new(raw.runs))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("run document serializes")
    }
}

impl<'de> Deserialize<'de> for RunDocument {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            runs: Vec<Run>,
        }
        Raw::deserialize(d).map(|raw| RunDocument::new(raw.runs))
    }
}

/// One (entry, translation, part of speech) triple. Field names match the
/// published dictionary JSON.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub entry: String,
    pub translation: String,
    pub part_of_speech: Option<String>,
}

impl DictionaryEntry {
    pub fn new(entry: impl Into<String>, translation: impl Into<String>) -> Self {
        DictionaryEntry { entry: entry.into(), translation: translation.into(), part_of_speech: None }
    }

    pub fn with_pos(mut self, pos: impl Into<String>) -> Self {
        self.part_of_speech = Some(pos.into());
        self
    }

    /// The same pair read in the opposite direction.
    pub fn inverted(&self) -> Self {
        DictionaryEntry {
            entry: self.translation.clone(),
            translation: self.entry.clone(),
            part_of_speech: self.part_of_speech.clone(),
        }
    }
}

/// A headword that could not be turned into an entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkippedEntry {
    pub run_index: usize,
    pub text: String,
    pub reason: &'static str,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedDictionary {
    pub entries: Vec<DictionaryEntry>,
    pub skipped: Vec<SkippedEntry>,
}

/// Compiles a part-of-speech pattern the way [`parse_dictionary`] uses it.
pub fn compile_pos_pattern(pattern: &str) -> Result<Regex, ExtractError> {
    Ok(RegexBuilder::new(pattern).case_insensitive(true).build()?)
}

/// Turns alternating bold headword / normal body runs into dictionary entries.
///
/// Consecutive body runs are joined with a space. A headword without a body
/// (or whose body is only a part of speech) is reported in
/// [`ParsedDictionary::skipped`], as is body text with no headword before it.
/// Translations are denormalized before returning.
pub fn parse_dictionary(doc: &RunDocument, pos_pattern: &str) -> Result<ParsedDictionary, ExtractError> {
    let pos_re = compile_pos_pattern(pos_pattern)?;
    let mut out = ParsedDictionary::default();
    let mut head: Option<(usize, &str)> = None;
    let mut body: Vec<(usize, &str)> = Vec::new();

    let flush = |head: Option<(usize, &str)>, body: &mut Vec<(usize, &str)>, out: &mut ParsedDictionary| {
        let joined = body.iter().map(|(_, t)| *t).collect::<Vec<_>>().join(" ");
        let Some((idx, word)) = head else {
            if let Some((first, _)) = body.first() {
                out.skipped.push(SkippedEntry {
                    run_index: *first,
                    text: joined,
                    reason: "body text without a headword",
                });
            }
            body.clear();
            return;
        };
        body.clear();
        let (pos, rest) = split_pos(&pos_re, joined.trim());
        if rest.is_empty() {
            out.skipped.push(SkippedEntry {
                run_index: idx,
                text: word.to_string(),
                reason: "headword without translation",
            });
            return;
        }
        out.entries.push(DictionaryEntry {
            entry: word.to_string(),
            translation: rest.to_string(),
            part_of_speech: pos,
        });
    };

    for (i, run) in doc.runs().iter().enumerate() {
        if run.bold {
            flush(head.take(), &mut body, &mut out);
            head = Some((i, run.text.as_str()));
        } else {
            body.push((i, run.text.as_str()));
        }
    }
    flush(head.take(), &mut body, &mut out);

    for s in &out.skipped {
        log::warn!("skipped dictionary run {}: {} ({:?})", s.run_index, s.reason, s.text);
    }
    out.entries = denormalize_translations(out.entries);
    Ok(out)
}

fn split_pos<'a>(re: &Regex, body: &'a str) -> (Option<String>, &'a str) {
    match re.find(body) {
        Some(m) if m.start() == 0 && !m.as_str().is_empty() => {
            (Some(m.as_str().to_string()), body[m.end()..].trim())
        }
        _ => (None, body),
    }
}

/// Splits multi-sense translations into one entry per sense.
///
/// Outside parentheses both `;` and `,` separate senses. Parenthetical
/// alternatives stay intact, with any `;` inside them rewritten to `,` so no
/// translation keeps a semicolon. Fragments are trimmed; empty ones dropped.
pub fn denormalize_translations(entries: Vec<DictionaryEntry>) -> Vec<DictionaryEntry> {
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let pieces = split_senses(&e.translation);
        for piece in pieces {
            out.push(DictionaryEntry {
                entry: e.entry.clone(),
                translation: piece,
                part_of_speech: e.part_of_speech.clone(),
            });
        }
    }
    out
}

fn split_senses(text: &str) -> Vec<String> {
    let mut pieces = Vec::new();
    let mut cur = String::new();
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '(' => {
                depth += 1;
                cur.push(c);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                cur.push(c);
            }
            ';' | ',' if depth == 0 => pieces.push(std::mem::take(&mut cur)),
            ';' => cur.push(','),
            _ => cur.push(c),
        }
    }
    pieces.push(cur);
    pieces
        .into_iter()
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

/// A phrase-book section: its upper-case title and the sentences on each side.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilingualSection {
    pub title: String,
    pub mambai_sentences: Vec<String>,
    pub english_sentences: Vec<String>,
}

/// True for runs such as `GREETINGS` or `AT THE MARKET (2)`: at least two
/// letters, none of them lower case.
pub fn is_section_delimiter(text: &str) -> bool {
    let t = text.trim();
    let mut letters = 0;
    for c in t.chars() {
        if c.is_alphabetic() {
            if c.is_lowercase() || !c.is_uppercase() {
                return false;
            }
            letters += 1;
        }
    }
    letters >= 2
}

/// Groups phrase-book runs into sections: bold text is Mambai, normal text
/// English, upper-case runs open a new section.
pub fn segment_bilingual_sections(doc: &RunDocument) -> Vec<BilingualSection> {
    let mut sections: Vec<BilingualSection> = Vec::new();
    for run in doc.runs() {
        if is_section_delimiter(&run.text) {
            sections.push(BilingualSection { title: run.text.clone(), ..Default::default() });
            continue;
        }
        if sections.is_empty() {
            sections.push(BilingualSection::default());
        }
        let section = sections.last_mut().expect("non-empty");
        let target = if run.bold { &mut section.mambai_sentences } else { &mut section.english_sentences };
        target.extend(split_sentences(&run.text));
    }
    sections
}

/// Splits text after `.`, `!` or `?` followed by whitespace.
///
/// Terminal punctuation (plus any closing quotes or brackets) stays with its
/// sentence. No split happens inside parentheses or after a single-letter
/// abbreviation such as `p.`.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut depth = 0usize;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth = depth.saturating_sub(1),
            '.' | '!' | '?' if depth == 0 => {
                let mut end = i + 1;
                let mut only_period = c == '.';
                while end < chars.len() && matches!(chars[end], '.' | '!' | '?') {
                    only_period &= chars[end] == '.';
                    end += 1;
                }
                while end < chars.len() && matches!(chars[end], '"' | '\'' | '”' | '’' | '»' | ')' | ']') {
                    end += 1;
                }
                let at_break = end == chars.len() || chars[end].is_whitespace();
                if at_break && !(only_period && single_letter_before(&chars, start, i)) {
                    push_trimmed(&mut out, &chars[start..end]);
                    start = end;
                }
                i = end;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    push_trimmed(&mut out, &chars[start..]);
    out
}

fn single_letter_before(chars: &[char], start: usize, dot: usize) -> bool {
    if dot == start || !chars[dot - 1].is_alphabetic() {
        return false;
    }
    dot - 1 == start || !chars[dot - 2].is_alphanumeric()
}

fn push_trimmed(out: &mut Vec<String>, chars: &[char]) {
    let s: String = chars.iter().collect();
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}
