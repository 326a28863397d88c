//! Shared word tokenizer used by retrieval, dictionary lookup and lexical scoring.

/// Lowercases, splits on whitespace and trims non-alphanumeric characters
/// from both ends of every token. Internal apostrophes and hyphens survive.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}
