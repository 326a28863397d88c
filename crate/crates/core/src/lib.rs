//! English to Mambai machine translation toolkit: dictionary and corpus
//! extraction, sentence alignment, example retrieval, prompt assembly,
//! LLM access, evaluation metrics and experiment running.

pub mod aligner;
pub mod analysis;
pub mod corpus_extract;
pub mod exec;
pub mod io;
pub mod llm;
pub mod metrics;
pub mod prompting;
pub mod retrieval;
pub mod runner;
pub mod text;

pub use aligner::{align_sections, AlignConfig, SentencePair};
pub use corpus_extract::{parse_dictionary, DictionaryEntry, RunDocument};
pub use exec::Execution;
pub use llm::{Gateway, LlmError, LlmRequest, LlmResponse};
pub use metrics::{evaluate, MetricReport};
pub use prompting::{build_prompt, PromptSpec};
pub use retrieval::{ExampleSelector, RetrievedExample};
