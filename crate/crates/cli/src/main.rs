use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mambai_core::aligner::{align_sections, filter_pairs, split_corpus, AlignConfig, SentencePair};
use mambai_core::analysis::{mean_pairwise_similarity, report_row, Aggregation, Language, Method, SimilarityReport};
use mambai_core::corpus_extract::{parse_dictionary, segment_bilingual_sections, BilingualSection, DictionaryEntry, RunDocument, DEFAULT_POS_PATTERN};
use mambai_core::exec::Execution;
use mambai_core::io;
use mambai_core::llm::{CachedGateway, Gateway, GatewayConfig, HttpGateway, MockGateway, ResponseCache, Scenario};
use mambai_core::metrics::evaluate;
use mambai_core::retrieval::{retrieve_tfidf, ExampleSelector, HashedTrigramProvider, TfidfIndex};
use mambai_core::runner::{self, prompt_for, Dataset, DataPaths, Decoding, ExperimentConfig, GridConfig, RunOptions};

#[derive(Parser)]
#[command(name = "mambai", version, about = "English to Mambai retrieval-augmented translation toolkit")]
struct Cli {
    /// Run data-parallel stages on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a dictionary run document into entries.
    ExtractDict {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value = DEFAULT_POS_PATTERN)]
        pos_pattern: String,
        /// Swap headword and translation (for Mambai-English dictionaries).
        #[arg(long)]
        invert: bool,
    },
    /// Segment a phrase-book run document into bilingual sections.
    ExtractSentences {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
    /// Align sections into scored sentence pairs (JSONL).
    Align {
        #[arg(long)]
        sections: PathBuf,
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        threshold: f64,
    },
    /// Seeded train/test split of aligned pairs.
    Split {
        #[arg(long = "in")]
        pairs: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "out-train")]
        train_out: PathBuf,
        #[arg(long = "out-test")]
        test_out: PathBuf,
    },
    /// Build or query a TF-IDF index.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Print the prompt for one English sentence.
    Prompt {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(long)]
        input: String,
        #[command(flatten)]
        shots: Shots,
    },
    /// Score hypotheses against references (one sentence per line).
    Evaluate {
        #[arg(long)]
        hyps: PathBuf,
        #[arg(long)]
        refs: PathBuf,
    },
    /// Mean cross-set similarity between two pair files.
    Analyze {
        #[arg(long)]
        set_a: PathBuf,
        #[arg(long)]
        set_b: PathBuf,
        #[arg(long, default_value = "Test")]
        name_a: String,
        #[arg(long, default_value = "Train")]
        name_b: String,
        #[arg(long, value_enum, default_value_t = Aggregate::MeanAll)]
        aggregation: Aggregate,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run an experiment grid.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Use an in-process mock model instead of the HTTP endpoint: a
        /// scenario file, or `echo` / `empty`.
        #[arg(long)]
        mock: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum IndexAction {
    Build {
        #[arg(long)]
        train: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
    /// Load a saved index and print the top matches for a query.
    Load {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
}

#[derive(Args)]
struct Shots {
    #[arg(long, default_value_t = 0)]
    n_tfidf: usize,
    #[arg(long, default_value_t = 0)]
    n_embed: usize,
    #[arg(long)]
    use_dict: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Aggregate {
    MeanAll,
    MeanMax,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::ExtractDict { input, output, pos_pattern, invert } => {
            let doc = load_runs(&input)?;
            let parsed = parse_dictionary(&doc, &pos_pattern)?;
            for s in &parsed.skipped {
                log::warn!("run {}: {} ({:?})", s.run_index, s.reason, s.text);
            }
            let entries: Vec<DictionaryEntry> =
                if invert { parsed.entries.iter().map(DictionaryEntry::inverted).collect() } else { parsed.entries };
            io::write_json(&output, &entries)?;
            println!("{} entries, {} skipped", entries.len(), parsed.skipped.len());
        }
        Command::ExtractSentences { input, output } => {
            let sections = segment_bilingual_sections(&load_runs(&input)?);
            io::write_json(&output, &sections)?;
            println!("{} sections", sections.len());
        }
        Command::Align { sections, dict, output, threshold } => {
            let sections: Vec<BilingualSection> = io::read_json(&sections)?;
            let dict = load_dict(dict.as_deref())?;
            let pairs = align_sections(&sections, &dict, &AlignConfig::default(), exec)?;
            let kept = filter_pairs(&pairs, threshold);
            io::write_jsonl(&output, &kept)?;
            println!("{} pairs aligned, {} kept", pairs.len(), kept.len());
        }
        Command::Split { pairs, test_fraction, seed, train_out, test_out } => {
            let pairs: Vec<SentencePair> = io::read_jsonl(&pairs)?;
            let split = split_corpus(&pairs, test_fraction, seed)?;
            io::write_jsonl(&train_out, &split.train)?;
            io::write_jsonl(&test_out, &split.test)?;
            println!("train {}, test {}", split.train.len(), split.test.len());
        }
        Command::Index { action: IndexAction::Build { train, output } } => {
            let train: Vec<SentencePair> = io::read_jsonl(&train)?;
            let index = TfidfIndex::build(&train)?;
            io::write_text(&output, &index.to_json())?;
            println!("{} rows, {} terms", index.len(), index.model().vocabulary_len());
        }
        Command::Index { action: IndexAction::Load { index, query, k } } => {
            let text = std::fs::read_to_string(&index).with_context(|| format!("reading {}", index.display()))?;
            let index = TfidfIndex::from_json(&text)?;
            for hit in retrieve_tfidf(&index, &query, k) {
                println!("{:.4}\t{}\t{}", hit.similarity, hit.pair.english, hit.pair.mambai);
            }
        }
        Command::Prompt { train, dict, input, shots } => {
            let data = Dataset { train: io::read_jsonl(&train)?, test: Vec::new(), dict: load_dict(dict.as_deref())? };
            let provider = (shots.n_embed > 0).then(|| Arc::new(HashedTrigramProvider::default()) as _);
            let selector = ExampleSelector::new(&data.train, provider)?;
            let cfg = ExperimentConfig {
                model: String::new(),
                n_tfidf: shots.n_tfidf,
                n_embed: shots.n_embed,
                use_dict: shots.use_dict,
                seed: 0,
                decoding: Decoding::default(),
                paths: DataPaths::default(),
            };
            let (prompt, _, _) = prompt_for(&cfg, &input, &selector, &data.dict)?;
            print!("{prompt}");
        }
        Command::Evaluate { hyps, refs } => {
            let hyps = io::read_lines(&hyps)?;
            let refs = io::read_lines(&refs)?;
            let report = evaluate(&hyps, &refs)?;
            println!("BLEU {:.2}\tchrF {:.2}\tchrF++ {:.2}\t({} sentences)", report.bleu, report.chrf, report.chrf_pp, report.n_sentences);
        }
        Command::Analyze { set_a, set_b, name_a, name_b, aggregation, output } => {
            let a: Vec<SentencePair> = io::read_jsonl(&set_a)?;
            let b: Vec<SentencePair> = io::read_jsonl(&set_b)?;
            let aggregation = match aggregation {
                Aggregate::MeanAll => Aggregation::MeanAll,
                Aggregate::MeanMax => Aggregation::MeanMax,
            };
            let provider = HashedTrigramProvider::default();
            let mut report = SimilarityReport::default();
            for lang in [Language::Eng, Language::Mgm] {
                let side = |ps: &[SentencePair]| -> Vec<String> {
                    ps.iter().map(|p| if lang == Language::Eng { p.english.clone() } else { p.mambai.clone() }).collect()
                };
                let (sa, sb) = (side(&a), side(&b));
                for method in [Method::Tfidf, Method::Semantic] {
                    let score = mean_pairwise_similarity(&sa, &sb, method, Some(&provider), aggregation, exec)?;
                    report.rows.push(report_row(&name_a, &name_b, lang, method, score));
                }
            }
            for r in &report.rows {
                println!("{}\t{}\t{}\t{:.4}", r.similarity, r.language.as_str(), r.method, r.score);
            }
            if let Some(path) = output {
                io::write_json(&path, &report)?;
            }
        }
        Command::Run { config, mock, out_dir } => run_grid(&config, mock, &out_dir, exec)?,
    }
    Ok(())
}

fn load_runs(path: &Path) -> Result<RunDocument> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(RunDocument::from_json(&text)?)
}

fn load_dict(path: Option<&Path>) -> Result<Vec<DictionaryEntry>> {
    Ok(match path {
        Some(p) => io::read_json(p)?,
        None => Vec::new(),
    })
}

fn mock_scenario(spec: &str) -> Result<Scenario> {
    Ok(match spec {
        "echo" => Scenario::echo(),
        "empty" => Scenario::constant(""),
        path => Scenario::load(Path::new(path))?,
    })
}

fn run_grid(config: &Path, mock: Option<String>, out_dir: &Path, exec: Execution) -> Result<()> {
    let grid = GridConfig::load(config)?;
    let cells = grid.cells();
    if cells.is_empty() {
        bail!("grid has no cells");
    }
    let inner: Box<dyn Gateway> = match mock {
        Some(spec) => {
            let mut refs = HashMap::new();
            for cell in &cells {
                let test: Vec<SentencePair> = io::read_jsonl(&cell.paths.test)?;
                refs.extend(test.into_iter().map(|p| (p.english, p.mambai)));
            }
            Box::new(MockGateway::new(mock_scenario(&spec)?).with_references(refs))
        }
        None => Box::new(HttpGateway::new(GatewayConfig::from_env()?)),
    };
    let cache_path = grid.cache.clone().unwrap_or_else(|| out_dir.join("cache.jsonl"));
    let gateway = CachedGateway::new(inner, ResponseCache::open(&cache_path)?);
    let opts = RunOptions { concurrency: grid.concurrency.max(1), exec };
    let outcome = runner::run_grid(&cells, &grid.embedder, &gateway, opts);
    runner::write_outputs(&outcome, out_dir)?;
    print!("{}", outcome.table.to_csv());
    Ok(())
}
