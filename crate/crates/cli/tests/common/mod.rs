#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use cti_core::classifier::write_examples_jsonl;
use cti_core::fixtures::{crawl_training_examples, forum_dump_posts_xml, DUMP_COMMENTS_XML};
use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_cti");

/// Runs `cti` with manifests going to `runs`.
pub fn cti(runs: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("CTI_RUNS_DIR", runs)
        .env_remove("CTI_LISTEN")
        .output()
        .expect("spawn cti")
}

pub fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.trim_start().starts_with('{'))
        .unwrap_or("null");
    serde_json::from_str(line).unwrap_or(Value::Null)
}

pub fn manifests(runs: &Path) -> Vec<Value> {
    let Ok(entries) = std::fs::read_dir(runs) else {
        return Vec::new();
    };
    let mut paths: Vec<PathBuf> = entries.map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
        .iter()
        .map(|p| serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap())
        .collect()
}

/// Input fixtures written to disk: a forum dump and classifier examples.
pub struct Inputs {
    pub dir: tempfile::TempDir,
    pub dump: PathBuf,
    pub examples: PathBuf,
}

impl Inputs {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let dump = dir.path().join("dump");
        std::fs::create_dir_all(&dump).unwrap();
        std::fs::write(dump.join("Posts.xml"), forum_dump_posts_xml(400, 11)).unwrap();
        std::fs::write(dump.join("Comments.xml"), DUMP_COMMENTS_XML).unwrap();
        let examples = dir.path().join("examples.jsonl");
        let mut f = std::fs::File::create(&examples).unwrap();
        write_examples_jsonl(&crawl_training_examples(), &mut f).unwrap();
        Self {
            dir,
            dump,
            examples,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub struct Stage {
    pub name: &'static str,
    pub code: Option<i32>,
    pub elapsed: Duration,
    pub outputs: Vec<String>,
    pub stdout: String,
    pub stderr: String,
}

/// Runs one stage, reading its manifest to learn the artifacts it wrote.
pub fn stage(runs: &Path, name: &'static str, args: &[&str]) -> Stage {
    let before = manifests(runs).len();
    let t0 = Instant::now();
    let out = cti(runs, args);
    let elapsed = t0.elapsed();
    let all = manifests(runs);
    // Run ids start with the start time, so the newest sorts last.
    let outputs = match all.last() {
        Some(m) if all.len() == before + 1 => m["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap().to_string())
            .collect(),
        _ => Vec::new(),
    };
    Stage {
        name,
        code: out.status.code(),
        elapsed,
        outputs,
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn find<'a>(outputs: &'a [String], suffix: &str) -> Option<&'a str> {
    outputs
        .iter()
        .map(String::as_str)
        .find(|o| o.ends_with(suffix))
}

pub struct Pipeline {
    pub stages: Vec<Stage>,
    pub ranked: Option<PathBuf>,
    pub selected: Option<PathBuf>,
    pub store: Option<PathBuf>,
}

/// preprocess, train-embeddings, build-vocab, train-classifier, crawl,
/// parse, rank and select; each stage takes its inputs from the manifests
/// of the earlier ones. Stops at the first failing stage.
pub fn run_pipeline(inputs: &Inputs, runs: &Path, seed_url: &str) -> Pipeline {
    let mut p = Pipeline {
        stages: Vec::new(),
        ranked: None,
        selected: None,
        store: None,
    };
    let work = inputs.path("work");
    let w = |n: &str| work.join(n).display().to_string();
    macro_rules! run {
        ($name:literal, $args:expr) => {{
            let s = stage(runs, $name, &$args);
            let ok = s.code == Some(0);
            let outputs = s.outputs.clone();
            p.stages.push(s);
            if !ok {
                return p;
            }
            outputs
        }};
    }

    let pre = run!(
        "preprocess",
        [
            "preprocess",
            "--dump",
            inputs.dump.to_str().unwrap(),
            "--corpus-out",
            &w("corpus.txt"),
            "--tags-out",
            &w("tags.txt"),
            "--phrases-out",
            &w("phrases.tsv"),
        ]
    );
    let corpus = find(&pre, "corpus.txt").unwrap().to_string();
    let tags = find(&pre, "tags.txt").unwrap().to_string();
    let phrases = find(&pre, "phrases.tsv").unwrap().to_string();

    let emb = run!(
        "train-embeddings",
        [
            "--seed",
            "7",
            "train-embeddings",
            "--corpus",
            &corpus,
            "--out",
            &w("model.bin"),
            "--dim",
            "32",
            "--epochs",
            "5",
            "--min-count",
            "2",
            "--threads",
            "1",
        ]
    );
    let model = find(&emb, "model.bin").unwrap().to_string();

    let voc = run!(
        "build-vocab",
        [
            "build-vocab",
            "--model",
            &model,
            "--tags",
            &tags,
            "--n",
            "5",
            "--name",
            "security",
            "--out",
            &w("vocab.json"),
        ]
    );
    let vocab = find(&voc, "vocab.json").unwrap().to_string();

    let clf = run!(
        "train-classifier",
        [
            "train-classifier",
            "--examples",
            inputs.examples.to_str().unwrap(),
            "--out",
            &w("classifier.bin"),
        ]
    );
    let classifier = find(&clf, "classifier.bin").unwrap().to_string();

    let crawl_toml = work.join("crawl.toml");
    std::fs::write(
        &crawl_toml,
        format!(
            "profile = \"focused\"\nseeds = [\"{seed_url}\"]\nmodel_path = \"{classifier}\"\n\
             politeness_ms = 20\nmax_depth = 10\nmax_pages = 100\n"
        ),
    )
    .unwrap();
    let cr = run!(
        "crawl",
        [
            "crawl",
            "--config",
            crawl_toml.to_str().unwrap(),
            "--store",
            &w("store.db"),
            "--report",
            &w("report.json"),
        ]
    );
    let store = find(&cr, "store.db").unwrap().to_string();
    p.store = Some(store.clone().into());

    run!("parse", ["parse", "--store", &store]);

    let rk = run!(
        "rank",
        [
            "rank",
            "--store",
            &store,
            "--vocab",
            &vocab,
            "--model",
            &model,
            "--phrases",
            &phrases,
            "--out",
            &w("ranked.jsonl"),
        ]
    );
    let ranked = find(&rk, "ranked.jsonl").unwrap().to_string();
    p.ranked = Some(ranked.clone().into());

    let sel = run!(
        "select",
        [
            "select",
            "--ranked",
            &ranked,
            "--top-k",
            "5",
            "--out",
            &w("selected.jsonl")
        ]
    );
    p.selected = find(&sel, "selected.jsonl").map(PathBuf::from);
    p
}
