//! Experiment grid: for every cell, translate the test set with
//! retrieval-augmented prompts, score the hypotheses and write the result
//! table plus per-sentence records.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aligner::SentencePair;
use crate::corpus_extract::DictionaryEntry;
use crate::exec::{self, Execution};
use crate::io::{self, IoError};
use crate::llm::{parse_translation, sha256_hex, Gateway, LlmError, LlmRequest};
use crate::metrics::{evaluate, MetricError, MetricReport};
use crate::prompting::{build_prompt, PromptSpec};
use crate::retrieval::{lookup_dictionary, EmbeddingProvider, ExampleSelector, HashedTrigramProvider, RemoteEmbedder, RetrievalError, Source};

/// Example counts the published grid explores.
pub const GRID_COUNTS: [usize; 3] = [0, 5, 10];

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Decoding {
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: f64,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding { temperature: 0.0, max_tokens: 256, timeout_secs: 60.0 }
    }
}

impl Decoding {
    pub fn request(&self, model: &str, prompt: String) -> LlmRequest {
        LlmRequest {
            model: model.to_string(),
            prompt,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            timeout: Duration::from_secs_f64(self.timeout_secs.max(0.0)),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataPaths {
    pub train: PathBuf,
    pub test: PathBuf,
    #[serde(default)]
    pub dict: Option<PathBuf>,
}

/// Which embedding provider backs semantic retrieval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderConfig {
    Hashed {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Remote {
        url: String,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
    },
}

fn default_dim() -> usize {
    512
}

fn default_in_flight() -> usize {
    4
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Hashed { dim: default_dim() }
    }
}

impl EmbedderConfig {
    pub fn provider(&self) -> Arc<dyn EmbeddingProvider> {
        match self {
            EmbedderConfig::Hashed { dim } => Arc::new(HashedTrigramProvider::new((*dim).max(1))),
            EmbedderConfig::Remote { url, max_in_flight } => Arc::new(RemoteEmbedder::new(url).with_max_in_flight(*max_in_flight)),
        }
    }
}

/// One grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: String,
    pub n_tfidf: usize,
    pub n_embed: usize,
    pub use_dict: bool,
    pub seed: u64,
    pub decoding: Decoding,
    pub paths: DataPaths,
}

impl ExperimentConfig {
    pub fn name(&self, index: usize) -> String {
        let model: String = self.model.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect();
        format!("{index:02}-{model}-t{}-e{}-{}", self.n_tfidf, self.n_embed, if self.use_dict { "dict" } else { "nodict" })
    }

    /// Counts outside the published grid are allowed but flagged.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        for (name, n) in [("n_tfidf", self.n_tfidf), ("n_embed", self.n_embed)] {
            if !GRID_COUNTS.contains(&n) {
                w.push(format!("{name} = {n} is outside the usual {{0, 5, 10}} grid"));
            }
        }
        w
    }
}

/// Per-cell overrides inside a grid file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellOverrides {
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub n_tfidf: Option<usize>,
    #[serde(default)]
    pub n_embed: Option<usize>,
    #[serde(default)]
    pub use_dict: Option<bool>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_model() -> String {
    "gpt-4-turbo".into()
}

fn default_concurrency() -> usize {
    4
}

/// Grid configuration file (JSON or TOML).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub n_tfidf: usize,
    #[serde(default)]
    pub n_embed: usize,
    #[serde(default)]
    pub use_dict: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub decoding: Decoding,
    pub paths: DataPaths,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    /// Concurrent translations per cell.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// Response cache file; defaults to `cache.jsonl` in the output directory.
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub grid: Vec<CellOverrides>,
}

impl GridConfig {
    pub fn parse(text: &str, toml_syntax: bool) -> Result<Self, RunError> {
        if toml_syntax {
            toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
        } else {
            serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))
        }
    }

    /// Loads a grid file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let mut cfg = GridConfig::parse(&text, is_toml)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.train);
        fix(&mut self.paths.test);
        if let Some(d) = &mut self.paths.dict {
            fix(d);
        }
        if let Some(c) = &mut self.cache {
            fix(c);
        }
    }

    /// Expanded cells in file order; an empty grid means one cell of the base settings.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let base = ExperimentConfig {
            model: self.model.clone(),
            n_tfidf: self.n_tfidf,
            n_embed: self.n_embed,
            use_dict: self.use_dict,
            seed: self.seed,
            decoding: self.decoding.clone(),
            paths: self.paths.clone(),
        };
        if self.grid.is_empty() {
            return vec![base];
        }
        self.grid
            .iter()
            .map(|o| ExperimentConfig {
                model: o.model.clone().unwrap_or_else(|| base.model.clone()),
                n_tfidf: o.n_tfidf.unwrap_or(base.n_tfidf),
                n_embed: o.n_embed.unwrap_or(base.n_embed),
                use_dict: o.use_dict.unwrap_or(base.use_dict),
                seed: o.seed.unwrap_or(base.seed),
                ..base.clone()
            })
            .collect()
    }
}

/// Training pairs, test pairs and the English→Mambai dictionary.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub train: Vec<SentencePair>,
    pub test: Vec<SentencePair>,
    pub dict: Vec<DictionaryEntry>,
}

impl Dataset {
    pub fn load(paths: &DataPaths) -> Result<Self, RunError> {
        Ok(Dataset {
            train: io::read_jsonl(&paths.train)?,
            test: io::read_jsonl(&paths.test)?,
            dict: match &paths.dict {
                Some(p) => io::read_json(p)?,
                None => Vec::new(),
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleRef {
    pub english: String,
    pub source: Source,
}

/// Outcome for one test sentence. `hypothesis_mambai` is empty exactly when
/// `error` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub input_english: String,
    pub reference_mambai: String,
    pub hypothesis_mambai: String,
    pub prompt_sha: String,
    pub examples_used: Vec<ExampleRef>,
    pub dict_entries_used: usize,
    pub model: String,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub records: Vec<TranslationRecord>,
    pub report: MetricReport,
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub concurrency: usize,
    pub exec: Execution,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { concurrency: default_concurrency(), exec: Execution::default() }
    }
}

/// Assembles the prompt for one input sentence.
pub fn prompt_for(
    cfg: &ExperimentConfig,
    input: &str,
    selector: &ExampleSelector,
    dict: &[DictionaryEntry],
) -> Result<(String, Vec<ExampleRef>, usize), RetrievalError> {
    let examples = selector.select(input, cfg.n_tfidf, cfg.n_embed)?;
    let entries = if cfg.use_dict { lookup_dictionary(input, dict) } else { Vec::new() };
    let spec = PromptSpec {
        examples: examples.iter().map(|e| (e.pair.english.clone(), e.pair.mambai.clone())).collect(),
        dict_entries: entries.iter().map(|e| (e.entry.clone(), e.translation.clone())).collect(),
        input: input.to_string(),
    };
    let prompt = build_prompt(&spec).map_err(|e| RetrievalError::Provider(e.to_string()))?;
    let used = examples.iter().map(|e| ExampleRef { english: e.pair.english.clone(), source: e.source }).collect();
    Ok((prompt, used, entries.len()))
}

fn translate_one(
    cfg: &ExperimentConfig,
    pair: &SentencePair,
    selector: &ExampleSelector,
    dict: &[DictionaryEntry],
    gateway: &dyn Gateway,
) -> TranslationRecord {
    let mut record = TranslationRecord {
        input_english: pair.english.clone(),
        reference_mambai: pair.mambai.clone(),
        hypothesis_mambai: String::new(),
        prompt_sha: String::new(),
        examples_used: Vec::new(),
        dict_entries_used: 0,
        model: cfg.model.clone(),
        error: None,
    };
    let (prompt, used, n_dict) = match prompt_for(cfg, &pair.english, selector, dict) {
        Ok(p) => p,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.prompt_sha = sha256_hex(&prompt);
    record.examples_used = used;
    record.dict_entries_used = n_dict;
    let outcome = gateway
        .complete(&cfg.decoding.request(&cfg.model, prompt))
        .and_then(|resp| parse_translation(&resp.raw_text));
    match outcome {
        Ok(h) => record.hypothesis_mambai = h,
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Translates and scores every test sentence for one cell.
///
/// Sentences whose translation fails keep an empty hypothesis and still
/// count towards the scores. Records come back in test-set order.
pub fn run_cell(
    cfg: &ExperimentConfig,
    data: &Dataset,
    selector: &ExampleSelector,
    gateway: &dyn Gateway,
    opts: RunOptions,
) -> Result<CellResult, RunError> {
    if data.test.is_empty() {
        return Err(RunError::Config("test set is empty".into()));
    }
    if cfg.n_embed > 0 && !selector.has_semantic() {
        return Err(RunError::Config("n_embed > 0 but no embedding provider is configured".into()));
    }
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    let records = exec::map_bounded(&data.test, opts.exec, opts.concurrency, |_, pair| {
        translate_one(cfg, pair, selector, &data.dict, gateway)
    });
    let hyps: Vec<&str> = records.iter().map(|r| r.hypothesis_mambai.as_str()).collect();
    let refs: Vec<&str> = records.iter().map(|r| r.reference_mambai.as_str()).collect();
    let report = evaluate(&hyps, &refs)?;
    Ok(CellResult { records, report })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub name: String,
    pub model: String,
    pub n_tfidf: usize,
    pub n_embed: usize,
    pub use_dict: bool,
    pub seed: u64,
    pub metrics: Option<MetricReport>,
    pub n_errors: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Table layout: Model, N_TFIDF, N_embed, UseDict, BLEU, ChrF, ChrF++,
    /// scores to one decimal. An Error column is appended only when a cell
    /// failed.
    pub fn to_csv(&self) -> String {
        let with_error = self.rows.iter().any(|r| r.error.is_some());
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["Model", "N_TFIDF", "N_embed", "UseDict", "BLEU", "ChrF", "ChrF++"];
        if with_error {
            header.push("Error");
        }
        w.write_record(&header).expect("in-memory csv");
        for r in &self.rows {
            let score = |f: fn(&MetricReport) -> f64| r.metrics.as_ref().map(|m| format!("{:.1}", f(m))).unwrap_or_default();
            let mut rec = vec![
                r.model.clone(),
                r.n_tfidf.to_string(),
                r.n_embed.to_string(),
                if r.use_dict { "TRUE" } else { "FALSE" }.to_string(),
                score(|m| m.bleu),
                score(|m| m.chrf),
                score(|m| m.chrf_pp),
            ];
            if with_error {
                rec.push(r.error.clone().unwrap_or_default());
            }
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}

/// Output of [`run_grid`]: the table and each successful cell's records.
#[derive(Clone, Debug, Default)]
pub struct GridOutcome {
    pub table: ResultTable,
    pub records: Vec<(String, Vec<TranslationRecord>)>,
}

/// Runs the cells in order. A cell that fails outright is kept as a row
/// with no metrics and its error; later cells still run.
pub fn run_grid(
    cells: &[ExperimentConfig],
    embedder: &EmbedderConfig,
    gateway: &dyn Gateway,
    opts: RunOptions,
) -> GridOutcome {
    let mut datasets: HashMap<DataPaths, Result<Arc<(Dataset, ExampleSelector)>, String>> = HashMap::new();
    let mut out = GridOutcome::default();
    let needs_provider = cells.iter().any(|c| c.n_embed > 0);
    for (i, cfg) in cells.iter().enumerate() {
        let name = cfg.name(i);
        let prepared = datasets
            .entry(cfg.paths.clone())
            .or_insert_with(|| {
                let data = Dataset::load(&cfg.paths).map_err(|e| e.to_string())?;
                let provider = needs_provider.then(|| embedder.provider());
                let selector = ExampleSelector::new(&data.train, provider).map_err(|e| e.to_string())?;
                Ok(Arc::new((data, selector)))
            })
            .clone();
        let result = prepared.and_then(|p| run_cell(cfg, &p.0, &p.1, gateway, opts).map_err(|e| e.to_string()));
        let mut row = ResultRow {
            name: name.clone(),
            model: cfg.model.clone(),
            n_tfidf: cfg.n_tfidf,
            n_embed: cfg.n_embed,
            use_dict: cfg.use_dict,
            seed: cfg.seed,
            metrics: None,
            n_errors: 0,
            error: None,
        };
        match result {
            Ok(cell) => {
                row.n_errors = cell.records.iter().filter(|r| r.error.is_some()).count();
                row.metrics = Some(cell.report);
                out.records.push((name, cell.records));
            }
            Err(e) => {
                log::error!("cell {name} failed: {e}");
                row.error = Some(e);
            }
        }
        out.table.rows.push(row);
    }
    out
}

/// Writes `results.csv`, `records_<cell>.jsonl` and `report.json`.
pub fn write_outputs(outcome: &GridOutcome, out_dir: &Path) -> Result<(), RunError> {
    io::write_text(&out_dir.join("results.csv"), &outcome.table.to_csv())?;
    for (name, records) in &outcome.records {
        io::write_jsonl(&out_dir.join(format!("records_{name}.jsonl")), records)?;
    }
    io::write_json(&out_dir.join("report.json"), &outcome.table)?;
    Ok(())
}
