//! `cti`: one entry point for every pipeline stage.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::manifest::{Manifest, RunContext};

#[derive(Debug, Parser)]
#[command(
    name = "cti",
    version,
    about = "Threat-intelligence harvesting pipeline"
)]
struct Cli {
    /// Validate configuration and inputs, then stop.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Directory receiving one manifest per invocation.
    #[arg(long, global = true, env = "CTI_RUNS_DIR", default_value = "runs")]
    runs_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the page classifier from labelled examples.
    TrainClassifier(commands::TrainClassifierArgs),
    /// Find crawl seeds through a search backend.
    Seedfind(commands::SeedfindArgs),
    /// Crawl from seeds into the store.
    Crawl(commands::CrawlArgs),
    /// Extract text and metadata from fetched pages.
    Parse(commands::ParseArgs),
    /// Turn a forum dump into a tokenized corpus, tag list and phrase table.
    Preprocess(commands::PreprocessArgs),
    /// Train skip-gram term vectors on a corpus.
    TrainEmbeddings(commands::TrainEmbeddingsArgs),
    /// Expand tags into a topic vocabulary.
    BuildVocab(commands::BuildVocabArgs),
    /// Score stored documents against a vocabulary.
    Rank(commands::RankArgs),
    /// Keep ranked documents by threshold or top-k.
    Select(commands::SelectArgs),
    /// Export top and bottom ranked documents as classifier examples.
    ExportFeedback(commands::ExportFeedbackArgs),
    /// Run the judgment API.
    Serve(commands::ServeArgs),
    /// Export documents or judgments.
    Export(commands::ExportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::TrainClassifier(_) => "train-classifier",
            Self::Seedfind(_) => "seedfind",
            Self::Crawl(_) => "crawl",
            Self::Parse(_) => "parse",
            Self::Preprocess(_) => "preprocess",
            Self::TrainEmbeddings(_) => "train-embeddings",
            Self::BuildVocab(_) => "build-vocab",
            Self::Rank(_) => "rank",
            Self::Select(_) => "select",
            Self::ExportFeedback(_) => "export-feedback",
            Self::Serve(_) => "serve",
            Self::Export(_) => "export",
        }
    }
}

/// Failure classes with distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("missing config key `{0}`")]
    MissingKey(String),
    #[error("missing input artifact {path}: {reason}")]
    MissingInput { path: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_MISSING_KEY: u8 = 3;
pub const EXIT_MISSING_INPUT: u8 = 4;
pub const EXIT_INVALID: u8 = 5;

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::MissingKey(_) => EXIT_MISSING_KEY,
            Self::MissingInput { .. } => EXIT_MISSING_INPUT,
            Self::Invalid(_) => EXIT_INVALID,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::MissingKey(_) => "missing_config_key",
            Self::MissingInput { .. } => "missing_input",
            Self::Invalid(_) => "invalid_config",
            Self::Runtime(_) => "runtime",
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": format!("{self:#}"), "exit_code": self.exit_code() });
        match self {
            Self::MissingKey(k) => v["key"] = json!(k),
            Self::MissingInput { path, .. } => v["path"] = json!(path),
            _ => {}
        }
        v
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let v = json!({ "error": "usage", "message": e.to_string().trim_end(), "exit_code": EXIT_USAGE });
            eprintln!("{v}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let mut ctx = RunContext::new(cli.command.name(), cli.seed, cli.dry_run);
    let result = match &cli.command {
        Command::TrainClassifier(a) => commands::train_classifier(a, &mut ctx),
        Command::Seedfind(a) => commands::seedfind(a, &mut ctx),
        Command::Crawl(a) => commands::crawl(a, &mut ctx),
        Command::Parse(a) => commands::parse(a, &mut ctx),
        Command::Preprocess(a) => commands::preprocess(a, &mut ctx),
        Command::TrainEmbeddings(a) => commands::train_embeddings(a, &mut ctx),
        Command::BuildVocab(a) => commands::build_vocab(a, &mut ctx),
        Command::Rank(a) => commands::rank(a, &mut ctx),
        Command::Select(a) => commands::select(a, &mut ctx),
        Command::ExportFeedback(a) => commands::export_feedback(a, &mut ctx),
        Command::Serve(a) => commands::serve(a, &mut ctx),
        Command::Export(a) => commands::export(a, &mut ctx),
    };
    let (code, error) = match &result {
        Ok(()) => (0, None),
        Err(e) => {
            eprintln!("{}", e.to_json());
            (e.exit_code(), Some(format!("{e:#}")))
        }
    };
    let manifest = Manifest::finish(ctx, code, error);
    if let Err(e) = manifest.write(&cli.runs_dir) {
        let err = CliError::Runtime(e.context("cannot write run manifest"));
        eprintln!("{}", err.to_json());
        if code == 0 {
            return ExitCode::from(err.exit_code());
        }
    }
    ExitCode::from(code)
}
