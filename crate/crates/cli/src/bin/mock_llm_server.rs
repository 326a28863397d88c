//! Stand-alone mock of the chat-completions and embedding endpoints.

use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;

use mambai_core::aligner::SentencePair;
use mambai_core::io;
use mambai_core::llm::{MockServer, Scenario};

#[derive(Parser)]
#[command(name = "mock-llm-server", version, about = "Scripted chat-completions server for offline runs")]
struct Cli {
    /// Scenario JSON; without one the server echoes references.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8089")]
    bind: String,
    /// Pair file (JSONL) whose Mambai side answers echo requests.
    #[arg(long)]
    references: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let scenario = match &cli.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::echo(),
    };
    let references: HashMap<String, String> = match &cli.references {
        Some(p) => io::read_jsonl::<SentencePair>(p)?.into_iter().map(|p| (p.english, p.mambai)).collect(),
        None => HashMap::new(),
    };
    let server = MockServer::start_on(&cli.bind, scenario, references)?;
    println!("listening on {}", server.url());
    server.wait();
    Ok(())
}
