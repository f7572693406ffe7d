use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use cti_core::classifier::{
    load_classifier, load_examples, save_classifier, seed_find, train_model, HttpPageSource,
    HttpSearchBackend, LocalIndex, PageSource, SearchBackend, SeedLimits, TrainParams,
};
use cti_core::crawler::{parse_pending, run_crawl, ConfigError, CrawlConfigFile};
use cti_core::embeddings::{load_model, save_model, train_skipgram, write_text, Hyperparams};
use cti_core::parser::{MetadataRule, MetadataRuleSpec};
use cti_core::preprocess::{
    build_phrase_table, parse_dump_dir, tokenize_mwe, ForcedPhrases, PhraseTable, DEFAULT_DELTA,
    DEFAULT_THRESHOLD,
};
use cti_core::ranker::{
    feedback_examples, rank_corpus, select as select_ranked, RankedLine, Scorer, Selection,
};
use cti_core::service::{AppState, ServiceConfig};
use cti_core::store::{DocStatus, Store};
use cti_core::vocab::{build_vocabulary, load_vocabulary, save_vocabulary, DEFAULT_NEIGHBORS};

use crate::config::{input_path, required, resolve};
use crate::manifest::RunContext;
use crate::{CliError, CliResult};

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(anyhow::anyhow!("{e}"))
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string(v).unwrap_or_default());
}

fn dry_run_report(ctx: &RunContext) {
    print_json(
        &json!({ "dry_run": true, "valid": true, "subcommand": ctx.subcommand, "config": ctx.config }),
    );
}

fn create(p: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(p).with_context(|| format!("creating {}", p.display()))?,
    ))
}

/// Writes to `path`, or stdout when absent.
fn sink(path: Option<&PathBuf>, ctx: &mut RunContext) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            ctx.output(p);
            Box::new(create(p)?)
        }
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn open_store(p: &Path) -> CliResult<Store> {
    Store::open(p).map_err(|e| runtime_err(format!("cannot open store {}: {e}", p.display())))
}

fn existing_store(p: &Path, ctx: &mut RunContext) -> CliResult<Store> {
    let p = input_path(p)?;
    ctx.input(&p);
    open_store(&p)
}

fn read_lines(p: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

#[derive(Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainClassifierArgs {
    /// TOML file with this subcommand's keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory with pos/ and neg/ text files, or a JSON-lines file.
    #[arg(long)]
    examples: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

pub fn train_classifier(a: &TrainClassifierArgs, ctx: &mut RunContext) -> CliResult<()> {
    let (s, snap) = resolve(a, a.config.as_ref(), &["examples", "out"])?;
    ctx.config = snap;
    let examples_path = input_path(&required(&s.examples, "examples")?)?;
    let out = required(&s.out, "out")?;
    let defaults = TrainParams::default();
    let params = TrainParams {
        lambda: s.lambda.unwrap_or(defaults.lambda),
        epochs: s.epochs.unwrap_or(defaults.epochs),
        seed: ctx.seed,
    };
    if params.lambda.is_nan() || params.lambda <= 0.0 || params.epochs == 0 {
        return Err(CliError::Invalid(
            "lambda and epochs must be positive".into(),
        ));
    }
    ctx.input(&examples_path);
    let examples = load_examples(&examples_path).map_err(|e| CliError::Invalid(e.to_string()))?;
    if ctx.dry_run {
        dry_run_report(ctx);
        return Ok(());
    }
    let (model, report) = train_model(&examples, &params).map_err(runtime_err)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).context("creating output directory")?;
    }
    save_classifier(&model, &out).map_err(runtime_err)?;
    ctx.output(&out);
    print_json(&json!({
        "examples": examples.len(),
        "n_pos": model.n_pos,
        "n_neg": model.n_neg,
        "training_accuracy": report.training_accuracy,
        "out": out,
    }));
    Ok(())
}

#[derive(Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedfindArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Classifier model file.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    query: Option<String>,
    /// Local search index: JSON lines of `{url, text}`.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Search URL template containing `{query}`.
    #[arg(long)]
    backend_url: Option<String>,
    #[arg(long)]
    max_seeds: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    query_terms: Option<usize>,
    #[arg(long)]
    user_agent: Option<String>,
    /// Seed list output (one URL per line); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct IndexLine {
    url: url::Url,
    text: String,
}

pub fn seedfind(a: &SeedfindArgs, ctx: &mut RunContext) -> CliResult<()> {
    let (s, snap) = resolve(a, a.config.as_ref(), &["model", "index", "out"])?;
    ctx.config = snap;
    let model_path = input_path(&required(&s.model, "model")?)?;
    ctx.input(&model_path);
    let query = required(&s.query, "query")?;
    let defaults = SeedLimits::default();
    let limits = SeedLimits {
        max_seeds: s.max_seeds.unwrap_or(defaults.max_seeds),
        max_iters: s.max_iters.unwrap_or(defaults.max_iters),
        query_terms: s.query_terms.unwrap_or(defaults.query_terms),
    };
    let model = load_classifier(&model_path).map_err(|e| CliError::Invalid(e.to_string()))?;
    let ua = s
        .user_agent
        .clone()
        .unwrap_or_else(|| "cti-seedfind".into());
    let (backend, pages): (Box<dyn SearchBackend>, Box<dyn PageSource>) =
        match (&s.index, &s.backend_url) {
            (Some(index), None) => {
                let index = input_path(index)?;
                ctx.input(&index);
                let mut entries = Vec::new();
                for (i, line) in BufReader::new(File::open(&index).context("opening index")?)
                    .lines()
                    .enumerate()
                {
                    let line = line.context("reading index")?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let e: IndexLine = serde_json::from_str(&line).map_err(|e| {
                        CliError::Invalid(format!("{} line {}: {e}", index.display(), i + 1))
                    })?;
                    entries.push((e.url, e.text));
                }
                let idx = LocalIndex::new(entries);
                (Box::new(idx.clone()), Box::new(idx))
            }
            (None, Some(template)) => (
                Box::new(
                    HttpSearchBackend::new(template, &ua)
                        .map_err(|e| CliError::Invalid(e.to_string()))?,
                ),
                Box::new(HttpPageSource::new(&ua).map_err(runtime_err)?),
            ),
            (None, None) => return Err(CliError::MissingKey("index".into())),
            (Some(_), Some(_)) => {
                return Err(CliError::Invalid(
                    "give either index or backend_url, not both".into(),
                ))
            }
        };
    if ctx.dry_run {
        dry_run_report(ctx);
        return Ok(());
    }
    let outcome = seed_find(&query, &model, backend.as_ref(), pages.as_ref(), limits);
    let mut w = sink(s.out.as_ref(), ctx)?;
    for u in &outcome.seeds {
        writeln!(w, "{u}").context("writing seeds")?;
    }
    w.flush().context("writing seeds")?;
    drop(w);
    if s.out.is_some() {
        print_json(
            &json!({ "seeds": outcome.seeds.len(), "queries": outcome.queries, "examined": outcome.examined, "warnings": outcome.warnings }),
        );
    }
    Ok(())
}

#[derive(Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrawlArgs {
    /// Crawl configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Document store (created when missing).
    #[arg(long)]
    store: Option<PathBuf>,
    /// Crawl report output (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
    /// focused, in_depth or dark.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long = "seed-url")]
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    seeds: Vec<String>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    whitelist: Vec<String>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    blacklist: Vec<String>,
    #[arg(long)]
    model_path: Option<PathBuf>,
    #[arg(long)]
    politeness_ms: Option<u64>,
    #[arg(long)]
    max_depth: Option<u32>,
    #[arg(long)]
    max_pages: Option<usize>,
    #[arg(long)]
    socks_proxy: Option<String>,
    #[arg(long)]
    cookie_jar: Option<PathBuf>,
    #[arg(long)]
    user_agent: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    parse_batch: Option<usize>,
    #[arg(long)]
    respect_robots: Option<bool>,
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    metadata_rules: Vec<MetadataRuleSpec>,
}

fn config_error(e: ConfigError) -> CliError {
    match e {
        ConfigError::MissingKey(k) => CliError::MissingKey(k.to_string()),
        ConfigError::Io { path, source } => CliError::MissingInput {
            path,
            reason: source.to_string(),
        },
        other => CliError::Invalid(other.to_string()),
    }
}

pub fn crawl(a: &CrawlArgs, ctx: &mut RunContext) -> CliResult<()> {
    let (s, snap) = resolve(
        a,
        a.config.as_ref(),
        &["store", "report", "model_path", "cookie_jar"],
    )?;
    ctx.config = snap.clone();
    let store_path = required(&s.store, "store")?;
    let mut file_keys = snap;
    if let Value::Object(m) = &mut file_keys {
        m.remove("store");
        m.remove("report");
    }
    let file: CrawlConfigFile =
        serde_json::from_value(file_keys).map_err(|e| CliError::Invalid(e.to_string()))?;
    for p in [&file.model_path, &file.cookie_jar].into_iter().flatten() {
        ctx.input(&input_path(p)?);
    }
    let config = file.resolve().map_err(config_error)?;
    if ctx.dry_run {
        print_json(&json!({
            "dry_run": true,
            "valid": true,
            "subcommand": "crawl",
            "profile": config.profile,
            "seeds": config.seeds.iter().map(|u| u.as_str()).collect::<Vec<_>>(),
            "filters": config.filters.len(),
            "max_pages": config.max_pages,
            "max_depth": config.max_depth,
            "politeness_ms": config.politeness_delay.as_millis() as u64,
            "proxy": config.proxy,
            "cookies": config.cookie_jar.len(),
            "respect_robots": config.respect_robots,
            "fetches": 0,
        }));
        return Ok(());
    }
    if let Some(dir) = store_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).context("creating store directory")?;
    }
    let store = open_store(&store_path)?;
    ctx.output(&store_path);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting runtime")?;
    let report = rt
        .block_on(run_crawl(&config, &store))
        .map_err(runtime_err)?;
    let report_json = serde_json::to_value(&report).context("serializing report")?;
    if let Some(p) = &s.report {
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, &report_json).context("writing report")?;
        w.write_all(b"\n").context("writing report")?;
        ctx.output(p);
    }
    print_json(&report_json);
    Ok(())
}

#[derive(Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParseArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
    /// Crawl configuration whose `metadata_rules` apply.
    #[arg(long)]
    crawl_config: Option<PathBuf>,
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    metadata_rules: Vec<MetadataRuleSpec>,
}

pub fn parse(a: &ParseArgs, ctx: &mut RunContext) -> CliResult<()> {
    let (s, snap) = resolve(a, a.config.as_ref(), &["store", "crawl_config"])?;
    ctx.config = snap;
    let store_path = input_path(&required(&s.store, "store")?)?;
    let mut specs = s.metadata_rules.clone();
    if let Some(cc) = &s.crawl_config {
        let cc = input_path(cc)?;
        ctx.input(&cc);
        let file = CrawlConfigFile::load(&cc).map_err(config_error)?;
        specs.extend(file.metadata_rules);
    }
    let rules = specs
        .iter()
        .map(MetadataRule::from_spec)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let store = existing_store(&store_path, ctx)?;
    if ctx.dry_run {
        dry_run_report(ctx);
        return Ok(());
    }
    let pending = store
        .count_documents(Some(DocStatus::Fetched))
        .map_err(runtime_err)?;
    let parsed = parse_pending(&store, &rules).map_err(runtime_err)?;
    ctx.output(&store_path);
    print_json(&json!({ "pending": pending, "parsed": parsed }));
    Ok(())
}

#[derive(Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding Posts.xml and optionally Comments.xml.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Tokenized corpus, one post per line.
    #[arg(long)]
    corpus_out: Option<PathBuf>,
    /// Distinct tags, one per line.
    #[arg(long)]
    tags_out: Option<PathBuf>,
    /// Learned phrase table (TSV).
    #[arg(long)]
    phrases_out: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
}

pub fn preprocess(a: &PreprocessArgs, ctx: &mut RunContext) -> CliResult<()> {
    let (s, snap) = resolve(
        a,
        a.config.as_ref(),
        &["dump", "corpus_out", "tags_out", "phrases_out"],
    )?;
    ctx.config = snap;
    let dump = input_path(&required(&s.dump, "dump")?)?;
    ctx.input(&input_path(&dump.join("Posts.xml"))?);
    let corpus_out = required(&s.corpus_out, "corpus_out")?;
    let tags_out = required(&s.tags_out, "tags_out")?;
    if ctx.dry_run {
        dry_run_report(ctx);
        return Ok(());
    }
    let parsed = parse_dump_dir(&dump).map_err(|e| CliError::Invalid(e.to_string()))?;
    let tags: BTreeSet<String> = parsed.tag_set().into_iter().collect();
    let sentences: Vec<Vec<String>> = parsed
        .posts
        .iter()
        .map(|p| p.body_text.split_whitespace().map(str::to_string).collect())
        .collect();
    let table = build_phrase_table(
        &sentences,
        s.threshold.unwrap_or(DEFAULT_THRESHOLD),
        s.delta.unwrap_or(DEFAULT_DELTA),
    );
    let forced = ForcedPhrases::new(tags.iter());
    let mut w = create(&corpus_out)?;
    let mut lines = 0;
    for post in &parsed.posts {
        let tokens = tokenize_mwe(&post.body_text, &table, &forced);
        if tokens.is_empty() {
            continue;
        }
        writeln!(w, "{}", tokens.join(" ")).context("writing corpus")?;
        lines += 1;
    }
    w.flush().context("writing corpus")?;
    ctx.output(&corpus_out);
    let mut w = create(&tags_out)?;
    for t in &tags {
        writeln!(w, "{t}").context("writing tags")?;
    }
    w.flush().context("writing tags")?;
    ctx.output(&tags_out);
    if let Some(p) = &s.phrases_out {
        let mut w = create(p)?;
        table.write_tsv(&mut w).context("writing phrase table")?;
        w.flush().context("writing phrase table")?;
        ctx.output(p);
    }
    print_json(&json!({
        "posts": parsed.posts.len(),
        "skipped_rows": parsed.skipped_rows,
        "corpus_lines": lines,
        "tags": tags.len(),
        "phrases": table.len(),
    }));
    Ok(())
}

#[derive(Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainEmbeddingsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus file, one whitespace-tokenized post per line.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Binary model output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional plain-text vectors output.
    #[arg(long)]
    text_out: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    min_count: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
}

pub fn train_embeddings(a: &TrainEmbeddingsArgs, ctx: &mut RunContext) -> CliResult<()> {
    let (s, snap) = resolve(a, a.config.as_ref(), &["corpus", "out", "text_out"])?;
    ctx.config = snap;
    let corpus_path = input_path(&required(&s.corpus, "corpus")?)?;
    ctx.input(&corpus_path);
    let out = required(&s.out, "out")?;
    let d = Hyperparams::default();
    let hyper = Hyperparams {
        dim: s.dim.unwrap_or(d.dim),
        window: s.window.unwrap_or(d.window),
        min_count: s.min_count.unwrap_or(d.min_count),
        negatives: s.negatives.unwrap_or(d.negatives),
        epochs: s.epochs.unwrap_or(d.epochs),
        learning_rate: s.learning_rate.unwrap_or(d.learning_rate),
        subsample: s.subsample.unwrap_or(d.subsample),
        seed: ctx.seed,
        threads: s.threads.unwrap_or(d.threads),
    };
    if hyper.dim == 0 || hyper.window == 0 || hyper.epochs == 0 || hyper.threads == 0 {
        return Err(CliError::Invalid(
            "dim, window, epochs and threads must be positive".into(),
        ));
    }
    if ctx.dry_run {
        dry_run_report(ctx);
        return Ok(());
    }
    let corpus: Vec<Vec<String>> = read_lines(&corpus_path)?
        .into_iter()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect();
    let (model, report) = train_skipgram(&corpus, &hyper).map_err(runtime_err)?;
    create(&out)?;
    save_model(&model, &out).map_err(runtime_err)?;
    ctx.output(&out);
    if let Some(p) = &s.text_out {
        let mut w = create(p)?;
        write_text(&model, &mut w).map_err(runtime_err)?;
        w.flush().context("writing text vectors")?;
        ctx.output(p);
    }
    print_json(&json!({
        "vocab_size": report.vocab_size,
        "words_processed": report.words_processed,
        "epoch_losses": report.epoch_losses,
    }));
    Ok(())
}

#[derive(Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildVocabArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Embedding model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Tag list, one per line.
    #[arg(long)]
    tags: Option<PathBuf>,
    /// Neighbours added per tag.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn build_vocab(a: &BuildVocabArgs, ctx: &mut RunContext) -> CliResult<()> {
    let (s, snap) = resolve(a, a.config.as_ref(), &["model", "tags", "out"])?;
    ctx.config = snap;
    let model_path = input_path(&required(&s.model, "model")?)?;
    let tags_path = input_path(&required(&s.tags, "tags")?)?;
    ctx.input(&model_path);
    ctx.input(&tags_path);
    let out = required(&s.out, "out")?;
    let tags = read_lines(&tags_path)?;
    if ctx.dry_run {
        dry_run_report(ctx);
        return Ok(());
    }
    let model = load_model(&model_path).map_err(|e| CliError::Invalid(e.to_string()))?;
    let name = s.name.clone().unwrap_or_else(|| "cti".into());
    let build = build_vocabulary(&name, &tags, &model, s.n.unwrap_or(DEFAULT_NEIGHBORS))
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    create(&out)?;
    save_vocabulary(&build.vocabulary, &out).map_err(runtime_err)?;
    ctx.output(&out);
    print_json(
        &json!({ "terms": build.vocabulary.len(), "tags": tags.len(), "oov_tags": build.oov_tags }),
    );
    Ok(())
}

#[derive(Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Embedding model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Phrase table from preprocessing.
    #[arg(long)]
    phrases: Option<PathBuf>,
    /// Ranked JSON lines; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn rank(a: &RankArgs, ctx: &mut RunContext) -> CliResult<()> {
    let (s, snap) = resolve(
        a,
        a.config.as_ref(),
        &["store", "vocab", "model", "phrases", "out"],
    )?;
    ctx.config = snap;
    let store_path = input_path(&required(&s.store, "store")?)?;
    let vocab_path = input_path(&required(&s.vocab, "vocab")?)?;
    let model_path = input_path(&required(&s.model, "model")?)?;
    let phrases_path = s.phrases.as_ref().map(|p| input_path(p)).transpose()?;
    for p in [Some(&vocab_path), Some(&model_path), phrases_path.as_ref()]
        .into_iter()
        .flatten()
    {
        ctx.input(p);
    }
    let vocab = load_vocabulary(&vocab_path).map_err(|e| CliError::Invalid(e.to_string()))?;
    let model = load_model(&model_path).map_err(|e| CliError::Invalid(e.to_string()))?;
    let phrases = match &phrases_path {
        Some(p) => PhraseTable::read_tsv(BufReader::new(
            File::open(p).context("opening phrase table")?,
        ))
        .map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?,
        None => PhraseTable::empty(),
    };
    let store = existing_store(&store_path, ctx)?;
    let scorer = Scorer::new(&vocab, &model)
        .map_err(|e| CliError::Invalid(e.to_string()))?
        .with_phrases(phrases);
    if ctx.dry_run {
        dry_run_report(ctx);
        return Ok(());
    }
    let mut ids = store
        .document_ids(Some(DocStatus::Parsed))
        .map_err(runtime_err)?;
    ids.extend(
        store
            .document_ids(Some(DocStatus::Ranked))
            .map_err(runtime_err)?,
    );
    let outcome = rank_corpus(&store, &ids, &scorer).map_err(runtime_err)?;
    ctx.output(&store_path);
    let mut w = sink(s.out.as_ref(), ctx)?;
    for r in &outcome.results {
        serde_json::to_writer(&mut w, &RankedLine::from(r)).context("writing ranking")?;
        w.write_all(b"\n").context("writing ranking")?;
    }
    w.flush().context("writing ranking")?;
    Ok(())
}

fn read_ranked(p: &Path) -> CliResult<Vec<RankedLine>> {
    let mut out = Vec::new();
    for (i, line) in read_lines(p)?.iter().enumerate() {
        out.push(
            serde_json::from_str(line)
                .map_err(|e| CliError::Invalid(format!("{} line {}: {e}", p.display(), i + 1)))?,
        );
    }
    Ok(out)
}

#[derive(Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ranked JSON lines from `rank`.
    #[arg(long)]
    ranked: Option<PathBuf>,
    /// Keep documents with r >= threshold.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    /// Keep the first k documents.
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn select(a: &SelectArgs, ctx: &mut RunContext) -> CliResult<()> {
    let (s, snap) = resolve(a, a.config.as_ref(), &["ranked", "out"])?;
    ctx.config = snap;
    let ranked_path = input_path(&required(&s.ranked, "ranked")?)?;
    ctx.input(&ranked_path);
    let mode = match (s.threshold, s.top_k) {
        (Some(t), None) if (-1.0..=1.0).contains(&t) => Selection::Threshold(t),
        (Some(t), None) => return Err(CliError::Invalid(format!("threshold {t} outside [-1, 1]"))),
        (None, Some(k)) => Selection::TopK(k),
        (None, None) => return Err(CliError::MissingKey("threshold".into())),
        (Some(_), Some(_)) => {
            return Err(CliError::Invalid(
                "give either threshold or top_k, not both".into(),
            ))
        }
    };
    let ranked = read_ranked(&ranked_path)?;
    if ctx.dry_run {
        dry_run_report(ctx);
        return Ok(());
    }
    let chosen = select_ranked(&ranked, mode);
    let mut w = sink(s.out.as_ref(), ctx)?;
    for r in &chosen {
        serde_json::to_writer(&mut w, r).context("writing selection")?;
        w.write_all(b"\n").context("writing selection")?;
    }
    w.flush().context("writing selection")?;
    Ok(())
}

#[derive(Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportFeedbackArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    ranked: Option<PathBuf>,
    /// Positives taken from the top of the ranking.
    #[arg(long)]
    top: Option<usize>,
    /// Negatives taken from the bottom of the ranking.
    #[arg(long)]
    bottom: Option<usize>,
    /// Examples in the classifier's JSON-lines format.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn export_feedback(a: &ExportFeedbackArgs, ctx: &mut RunContext) -> CliResult<()> {
    let (s, snap) = resolve(a, a.config.as_ref(), &["store", "ranked", "out"])?;
    ctx.config = snap;
    let store_path = input_path(&required(&s.store, "store")?)?;
    let ranked_path = input_path(&required(&s.ranked, "ranked")?)?;
    ctx.input(&ranked_path);
    let top = required(&s.top, "top")?;
    let bottom = required(&s.bottom, "bottom")?;
    let out = required(&s.out, "out")?;
    let ranked = read_ranked(&ranked_path)?;
    let store = existing_store(&store_path, ctx)?;
    if ctx.dry_run {
        dry_run_report(ctx);
        return Ok(());
    }
    let examples = feedback_examples(&store, &ranked, top, bottom).map_err(runtime_err)?;
    let mut w = create(&out)?;
    cti_core::classifier::write_examples_jsonl(&examples, &mut w).context("writing examples")?;
    w.flush().context("writing examples")?;
    ctx.output(&out);
    print_json(&json!({ "examples": examples.len() }));
    Ok(())
}

#[derive(Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
    /// `host:port`; the CTI_LISTEN variable overrides the config file.
    #[arg(long)]
    listen: Option<String>,
    /// Directory of static UI assets.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Default threshold for precision statistics.
    #[arg(long)]
    threshold: Option<f64>,
    /// Exactly four labels, grade 0 first.
    #[arg(long = "scale-label")]
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    scale_labels: Vec<String>,
}

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

pub fn serve(a: &ServeArgs, ctx: &mut RunContext) -> CliResult<()> {
    let (s, snap) = resolve(a, a.config.as_ref(), &["store", "static_dir"])?;
    ctx.config = snap;
    let store_path = input_path(&required(&s.store, "store")?)?;
    let listen = a
        .listen
        .clone()
        .or_else(|| std::env::var("CTI_LISTEN").ok().filter(|v| !v.is_empty()))
        .or(s.listen.clone())
        .unwrap_or_else(|| DEFAULT_LISTEN.to_string());
    ctx.config["listen"] = json!(listen);
    let mut config = ServiceConfig::default();
    if !s.scale_labels.is_empty() {
        config.scale_labels = s
            .scale_labels
            .clone()
            .try_into()
            .map_err(|v: Vec<String>| {
                CliError::Invalid(format!("expected 4 scale labels, got {}", v.len()))
            })?;
    }
    if let Some(t) = s.threshold {
        config.threshold = t;
    }
    if let Some(dir) = &s.static_dir {
        config.static_dir = Some(input_path(dir)?);
    }
    let store = existing_store(&store_path, ctx)?;
    let addr: std::net::SocketAddr = listen
        .parse()
        .map_err(|e| CliError::Invalid(format!("listen address {listen:?}: {e}")))?;
    if ctx.dry_run {
        dry_run_report(ctx);
        return Ok(());
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting runtime")?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        let bound = listener.local_addr().context("reading bound address")?;
        print_json(&json!({ "listening": bound.to_string() }));
        let state = AppState::new(Arc::new(store), config, ctx.seed);
        cti_core::service::serve(listener, state, shutdown_signal())
            .await
            .context("serving")?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(())
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("signal handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = tokio::signal::ctrl_c().await;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExportWhat {
    Documents,
    Judgments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long, value_enum)]
    what: Option<ExportWhat>,
    #[arg(long, value_enum)]
    format: Option<ExportFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn export(a: &ExportArgs, ctx: &mut RunContext) -> CliResult<()> {
    let (s, snap) = resolve(a, a.config.as_ref(), &["store", "out"])?;
    ctx.config = snap;
    let store_path = input_path(&required(&s.store, "store")?)?;
    let what = required(&s.what, "what")?;
    let format = s.format.unwrap_or(ExportFormat::Jsonl);
    if what == ExportWhat::Documents && format == ExportFormat::Csv {
        return Err(CliError::Invalid(
            "documents export only supports jsonl".into(),
        ));
    }
    let store = existing_store(&store_path, ctx)?;
    if ctx.dry_run {
        dry_run_report(ctx);
        return Ok(());
    }
    let mut w = sink(s.out.as_ref(), ctx)?;
    let n = match (what, format) {
        (ExportWhat::Documents, _) => store.export_documents_jsonl(&mut w),
        (ExportWhat::Judgments, ExportFormat::Jsonl) => store.export_judgments_jsonl(&mut w),
        (ExportWhat::Judgments, ExportFormat::Csv) => store.export_judgments_csv(&mut w),
    }
    .map_err(runtime_err)?;
    w.flush().context("writing export")?;
    drop(w);
    log::info!("exported {n} records");
    Ok(())
}
