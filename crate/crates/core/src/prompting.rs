//! Few-shot translation prompt.
//!
//! Layout (all line endings `\n`, no trailing newline):
//!
//! ```text
//! You are a translator for the Mambai language, originally from Timor-Leste.
//!
//! # Example sentences
//!
//! English: {example English}
//! Mambai: {example Mambai}
//!
//! # Dictionary entries
//!
//! English: {word}
//! Mambai: {word translation}
//!
//! Please provide the translation for the following sentence. Do not provide any explanations or text apart from the translation.
//!
//! English: {input}
//! Mambai:
//! ```
//!
//! Both section headers are always present, even with no examples or entries.

use thiserror::Error;

pub const SYSTEM_LINE: &str = "You are a translator for the Mambai language, originally from Timor-Leste.";
pub const EXAMPLES_HEADER: &str = "# Example sentences";
pub const DICTIONARY_HEADER: &str = "# Dictionary entries";
pub const INSTRUCTION: &str =
    "Please provide the translation for the following sentence. Do not provide any explanations or text apart from the translation.";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("input sentence is empty")]
    EmptyInput,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PromptSpec {
    /// (English, Mambai) example sentence pairs.
    pub examples: Vec<(String, String)>,
    /// (English word, Mambai word) dictionary pairs.
    pub dict_entries: Vec<(String, String)>,
    pub input: String,
}

fn push_pair(out: &mut String, english: &str, mambai: &str) {
    out.push_str("English: ");
    out.push_str(english);
    out.push_str("\nMambai: ");
    out.push_str(mambai);
    out.push_str("\n\n");
}

pub fn build_prompt(spec: &PromptSpec) -> Result<String, PromptError> {
    if spec.input.trim().is_empty() {
        return Err(PromptError::EmptyInput);
    }
    let mut out = String::new();
    out.push_str(SYSTEM_LINE);
    out.push_str("\n\n");
    out.push_str(EXAMPLES_HEADER);
    out.push_str("\n\n");
    for (e, m) in &spec.examples {
        push_pair(&mut out, e, m);
    }
    out.push_str(DICTIONARY_HEADER);
    out.push_str("\n\n");
    for (e, m) in &spec.dict_entries {
        push_pair(&mut out, e, m);
    }
    out.push_str(INSTRUCTION);
    out.push_str("\n\nEnglish: ");
    out.push_str(&spec.input);
    out.push_str("\nMambai:");
    Ok(out)
}

/// The input sentence of a prompt built by [`build_prompt`].
pub fn prompt_input(prompt: &str) -> Option<&str> {
    let body = prompt.strip_suffix("\nMambai:")?;
    let start = body.rfind("\n\nEnglish: ")? + "\n\nEnglish: ".len();
    Some(&body[start..])
}
