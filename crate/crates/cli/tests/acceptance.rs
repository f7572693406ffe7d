//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::AssertUnwindSafe;
use std::sync::Arc;
use std::time::{Duration, Instant};

use cti_core::classifier::{
    seed_find, train_model, Label, LabeledExample, LocalIndex, SeedLimits, TrainParams,
};
use cti_core::crawler::{
    apply_filters, run_crawl, CrawlConfig, LinkFilterRule, Profile, SessionCookieJar,
};
use cti_core::embeddings::{cosine, sgns_gradient, train_skipgram, EmbeddingModel, Hyperparams};
use cti_core::fixtures::{
    crawl_site, crawl_training_examples, forum_site, fourteen_page_examples, phrase_corpus,
    search_pages, separable_examples, synonym_corpus, toy_model, toy_vocab, FakeSocksProxy,
    FixtureResponse, FixtureServer,
};
use cti_core::parser::{parse_html, ParsedPage};
use cti_core::preprocess::{build_phrase_table, normalize, tokenize_mwe, ForcedPhrases};
use cti_core::ranker::relevance;
use cti_core::service::{AppState, ServiceConfig};
use cti_core::store::{DocumentFilter, DocumentRecord, SourceClass, Store};
use cti_core::vocab::{build_vocabulary, write_vocabulary, TopicVocabulary};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use url::Url;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const TOL: f64 = 1e-9;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .unwrap()
}

fn ranking_identity() -> Check {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let dim = r.random_range(1..20);
        let v: Vec<f64> = (0..dim).map(|_| r.random_range(-5.0..5.0)).collect();
        if v.iter().all(|x| *x == 0.0) {
            continue;
        }
        let other: Vec<f64> = (0..dim).map(|_| r.random_range(-5.0..5.0)).collect();
        let model = EmbeddingModel::from_vectors(dim, [("t", v), ("u", other)]).unwrap();
        let vocab = TopicVocabulary::from_terms("single", ["t"]);
        let got = relevance(&["t"], &vocab, &model)
            .map_err(|e| e.to_string())?
            .r;
        worst = worst.max((got - 1.0).abs());
        ensure!((got - 1.0).abs() <= TOL, "case {case}: r = {got}");
    }
    Ok(format!("100 single-term models, max |r - 1| = {worst:.1e}"))
}

/// Independent arithmetic over the toy model's hand-set vectors.
fn toy_oracle(tokens: &[&str]) -> f64 {
    let vecs: [(&str, [f64; 3]); 3] = [
        ("botnet", [1.0, 0.5, 0.0]),
        ("ddos", [0.2, 1.0, 0.3]),
        ("exploit", [-0.4, 0.1, 1.0]),
    ];
    let t = [0.8, 1.6, 1.3];
    let tn = (0.64f64 + 2.56 + 1.69).sqrt();
    let mut p = [0.0; 3];
    for tok in tokens {
        if let Some((_, w)) = vecs.iter().find(|(n, _)| n == tok) {
            let wn = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
            let c = (w[0] * t[0] + w[1] * t[1] + w[2] * t[2]) / (wn * tn);
            (0..3).for_each(|k| p[k] += c * w[k]);
        }
    }
    let pn = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if pn == 0.0 {
        0.0
    } else {
        (p[0] * t[0] + p[1] * t[1] + p[2] * t[2]) / (pn * tn)
    }
}

fn ranking_oracle() -> Check {
    let (model, vocab) = (toy_model(), toy_vocab());
    let pool = ["botnet", "ddos", "exploit", "weather", "the", "of"];
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for case in 0..40 {
        let len = r.random_range(1..20);
        let post: Vec<&str> = (0..len)
            .map(|_| pool[r.random_range(0..pool.len())])
            .collect();
        let got = relevance(&post, &vocab, &model)
            .map_err(|e| e.to_string())?
            .r;
        let want = toy_oracle(&post);
        worst = worst.max((got - want).abs());
        ensure!(
            (got - want).abs() <= TOL,
            "case {case} {post:?}: {got} vs {want}"
        );
    }
    Ok(format!("40 random posts, max deviation {worst:.1e}"))
}

fn random_setup(r: &mut ChaCha8Rng) -> (EmbeddingModel, TopicVocabulary, Vec<String>) {
    let dim = r.random_range(2..10);
    let n = r.random_range(3..15);
    let terms: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    let model = EmbeddingModel::from_vectors(
        dim,
        terms.iter().map(|t| {
            (
                t.clone(),
                (0..dim)
                    .map(|_| r.random_range(-1.0..1.0))
                    .collect::<Vec<f64>>(),
            )
        }),
    )
    .unwrap();
    let k = r.random_range(1..=n);
    let vocab = TopicVocabulary::from_terms("rand", terms[..k].iter());
    let len = r.random_range(1..30);
    let mut pool = terms;
    pool.push("oov".into());
    let post = (0..len)
        .map(|_| pool[r.random_range(0..pool.len())].clone())
        .collect();
    (model, vocab, post)
}

fn ranking_invariances() -> Check {
    let mut r = rng(3);
    let mut counts = [0usize; 3];
    while counts.iter().any(|&c| c < 100) {
        let (model, vocab, post) = random_setup(&mut r);
        let Ok(base) = relevance(&post, &vocab, &model) else {
            continue;
        };
        let mut shuffled = post.clone();
        shuffled.shuffle(&mut r);
        let perm = relevance(&shuffled, &vocab, &model).unwrap().r;
        ensure!(
            (perm - base.r).abs() <= TOL,
            "permutation: {perm} vs {}",
            base.r
        );
        counts[0] += 1;
        let doubled: Vec<String> = post.iter().chain(&post).cloned().collect();
        let dup = relevance(&doubled, &vocab, &model).unwrap().r;
        ensure!(
            (dup - base.r).abs() <= TOL,
            "duplication: {dup} vs {}",
            base.r
        );
        counts[1] += 1;
        let c = 10f64.powf(r.random_range(-3.0..3.0));
        let scaled = relevance(&post, &vocab, &model.scaled(c)).unwrap().r;
        ensure!(
            (scaled - base.r).abs() <= TOL,
            "scale {c}: {scaled} vs {}",
            base.r
        );
        counts[2] += 1;
    }
    Ok(format!(
        "permutation {}, duplication {}, scale {} cases",
        counts[0], counts[1], counts[2]
    ))
}

fn sgns_gradient_check() -> Check {
    const EPS: f64 = 1e-5;
    let d = 10;
    let mut r = rng(4);
    let mut v = || -> Vec<f64> { (0..d).map(|_| r.random_range(-0.8..0.8)).collect() };
    let (center, context) = (v(), v());
    let negs: Vec<Vec<f64>> = (0..5).map(|_| v()).collect();
    let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
    let g = sgns_gradient(&center, &context, &refs);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let ls = |x: f64| -(1.0 + (-x).exp()).ln();
    let loss = |c: &[f64], o: &[f64], n: &[Vec<f64>]| {
        -ls(dot(c, o)) - n.iter().map(|u| ls(-dot(c, u))).sum::<f64>()
    };
    let mut worst: f64 = 0.0;
    let mut params = 0;
    for block in 0..2 + negs.len() {
        for i in 0..d {
            let eval = |delta: f64| {
                let (mut c, mut o, mut n) = (center.clone(), context.clone(), negs.clone());
                match block {
                    0 => c[i] += delta,
                    1 => o[i] += delta,
                    k => n[k - 2][i] += delta,
                }
                loss(&c, &o, &n)
            };
            let numeric = (eval(EPS) - eval(-EPS)) / (2.0 * EPS);
            let analytic = match block {
                0 => g.center[i],
                1 => g.context[i],
                k => g.negatives[k - 2][i],
            };
            worst =
                worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7));
            params += 1;
        }
    }
    ensure!(worst <= 1e-4, "max relative error {worst:.2e}");
    Ok(format!(
        "{params} parameters, max relative error {worst:.2e}"
    ))
}

fn embedding_sanity() -> Check {
    let corpus = synonym_corpus(5000, 11);
    let hyper = Hyperparams {
        dim: 50,
        window: 4,
        epochs: 10,
        threads: 1,
        subsample: 0.0,
        seed: 3,
        ..Hyperparams::default()
    };
    let t0 = Instant::now();
    let (model, _) = train_skipgram(&corpus.sentences, &hyper).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let v1 = model.vector(&corpus.syn1).ok_or("syn1 missing")?;
    let target = cosine(v1, model.vector(&corpus.syn2).ok_or("syn2 missing")?);
    let others: Vec<&String> = model
        .terms()
        .iter()
        .filter(|w| **w != corpus.syn1 && **w != corpus.syn2)
        .collect();
    let beaten = others
        .iter()
        .filter(|w| cosine(v1, model.vector(w).unwrap()) < target)
        .count();
    let share = beaten as f64 / others.len() as f64;
    let nearest = model.nearest_to_term(&corpus.syn1, 1).unwrap();
    ensure!(
        elapsed < Duration::from_secs(60),
        "training took {elapsed:?}"
    );
    ensure!(
        share >= 0.95,
        "cos(syn1, syn2) beats only {beaten}/{}",
        others.len()
    );
    ensure!(
        nearest[0].0 == corpus.syn2,
        "nearest(syn1) = {}",
        nearest[0].0
    );
    Ok(format!(
        "{} sentences, {elapsed:.1?}, cos {target:.3} beats {beaten}/{} words, nearest = {}",
        corpus.sentences.len(),
        others.len(),
        nearest[0].0
    ))
}

fn vocabulary_expansion() -> Check {
    let mut r = rng(6);
    for case in 0..100 {
        let n_terms = 40;
        let model = EmbeddingModel::from_vectors(
            8,
            (0..n_terms).map(|i| {
                (
                    format!("t{i}"),
                    (0..8)
                        .map(|_| r.random_range(-1.0..1.0))
                        .collect::<Vec<f64>>(),
                )
            }),
        )
        .unwrap();
        let k = r.random_range(1..6);
        let tags: Vec<String> = (0..k)
            .map(|_| format!("t{}", r.random_range(0..n_terms + 5)))
            .collect();
        let distinct: BTreeSet<&str> = tags.iter().map(String::as_str).collect();
        let n = r.random_range(0..10);
        let v = build_vocabulary("p", &tags, &model, n)
            .map_err(|e| e.to_string())?
            .vocabulary;
        ensure!(
            v.len() <= distinct.len() * (n + 1),
            "case {case}: {} > {}·{}",
            v.len(),
            distinct.len(),
            n + 1
        );
        let zero = build_vocabulary("p", &tags, &model, 0).unwrap().vocabulary;
        ensure!(
            zero.terms().collect::<BTreeSet<_>>() == distinct,
            "case {case}: N=0 differs from tags"
        );
        let again = build_vocabulary("p", &tags, &model, n).unwrap().vocabulary;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_vocabulary(&v, &mut a).unwrap();
        write_vocabulary(&again, &mut b).unwrap();
        ensure!(a == b, "case {case}: rebuild differs");
    }
    Ok("100 random tag sets: size bound, N=0 and byte-identical rebuild hold".into())
}

fn filter_table() -> Check {
    let cases = [
        (
            LinkFilterRule::whitelist("https://www.wilderssecurity.com/threads/*"),
            "https://www.wilderssecurity.com/threads/abc",
            true,
            "https://www.wilderssecurity.com/forums/",
            false,
        ),
        (
            LinkFilterRule::whitelist("https://blogs.oracle.com/security/*"),
            "https://blogs.oracle.com/security/some-article",
            true,
            "https://blogs.oracle.com/java/",
            false,
        ),
        (
            LinkFilterRule::blacklist("https://www.wilderssecurity.com/members/*"),
            "https://www.wilderssecurity.com/members/john",
            false,
            "https://www.wilderssecurity.com/threads/abc",
            true,
        ),
        (
            LinkFilterRule::blacklist("https://www.securityforum.org/events/*"),
            "https://www.securityforum.org/events/congress",
            false,
            "https://www.securityforum.org/research/",
            true,
        ),
    ];
    for (rule, inside, inside_want, outside, outside_want) in cases {
        let rules = [rule.map_err(|e| e.to_string())?];
        ensure!(
            apply_filters(inside, &rules) == inside_want,
            "{} on {inside}",
            rules[0].pattern()
        );
        ensure!(
            apply_filters(outside, &rules) == outside_want,
            "{} on {outside}",
            rules[0].pattern()
        );
    }
    Ok("4 rules x (in-scope, out-of-scope) URL".into())
}

fn focused_crawl() -> Check {
    const DELAY: Duration = Duration::from_millis(50);
    let site = crawl_site(42);
    let (model, _) = train_model(&crawl_training_examples(), &TrainParams::default())
        .map_err(|e| e.to_string())?;
    // Direct classification of every content page fixes the expected harvest.
    let mut direct = BTreeSet::new();
    for path in site.relevant.iter().chain(&site.irrelevant) {
        let FixtureResponse::Html(html) = &site.pages[path] else {
            continue;
        };
        let page = parse_html(html.as_bytes(), &Url::parse("http://x.example/").unwrap());
        if model
            .classify(&format!("{}\n{}", page.title, page.text))
            .relevant
        {
            direct.insert(path.clone());
        }
    }
    let expected: BTreeSet<String> = site.relevant.iter().cloned().collect();
    ensure!(direct == expected, "classifier accepts {direct:?}");

    let server = FixtureServer::start(site.pages.clone()).map_err(|e| e.to_string())?;
    let mut config = CrawlConfig::new(Profile::Focused, vec![server.url("/r0")]);
    config.classifier = Some(Arc::new(model));
    config.politeness_delay = DELAY;
    config.max_depth = 10;
    let store = Store::open_in_memory().unwrap();
    let t0 = Instant::now();
    let report = runtime()
        .block_on(run_crawl(&config, &store))
        .map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();

    let stored: BTreeSet<String> = store
        .query_documents(&DocumentFilter::default())
        .unwrap()
        .iter()
        .map(|d| Url::parse(&d.url).unwrap().path().to_string())
        .collect();
    ensure!(
        report.pages_harvested == 10 && stored == expected,
        "harvested {stored:?}"
    );
    let log = server.requests();
    let pages: Vec<&str> = log
        .iter()
        .map(|r| r.path.as_str())
        .filter(|p| *p != "/robots.txt")
        .collect();
    let distinct: HashSet<&str> = pages.iter().copied().collect();
    ensure!(distinct.len() == pages.len(), "duplicate fetches");
    // Every fetched page is a seed or an outlink of a relevant page.
    let mut allowed: HashSet<String> = HashSet::from(["/r0".to_string()]);
    for i in 0..10 {
        allowed.extend([
            format!("/r{}", i + 1),
            format!("/n{}", 2 * i),
            format!("/n{}", 2 * i + 1),
        ]);
    }
    ensure!(
        pages.iter().all(|p| allowed.contains(*p)),
        "fetched outside relevant outlinks: {pages:?}"
    );
    let mut times: Vec<Instant> = log.iter().map(|r| r.at).collect();
    times.sort();
    let min_gap = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .min()
        .unwrap_or(Duration::MAX);
    ensure!(min_gap >= DELAY, "politeness gap {min_gap:?}");
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "10/10 harvested, {} fetches, 0 duplicates, min gap {min_gap:.1?}, {elapsed:.1?}",
        pages.len()
    ))
}

fn seed_finder() -> Check {
    let pages = search_pages();
    let (model, _) = train_model(&separable_examples(100, 5), &TrainParams::default())
        .map_err(|e| e.to_string())?;
    let relevant: HashSet<&Url> = pages
        .iter()
        .filter(|(_, t, _)| model.classify(t).relevant)
        .map(|(u, _, _)| u)
        .collect();
    let index =
        LocalIndex::new(pages.iter().map(|(u, t, _)| (u.clone(), t.clone()))).with_max_results(100);
    let limits = SeedLimits {
        max_seeds: 21,
        ..SeedLimits::default()
    };
    let out = seed_find("attack report", &model, &index, &index, limits);
    ensure!(out.seeds.len() <= 21, "{} seeds", out.seeds.len());
    ensure!(!out.seeds.is_empty(), "no seeds");
    ensure!(
        out.seeds.iter().all(|u| relevant.contains(u)),
        "irrelevant seed returned"
    );
    Ok(format!(
        "{} seeds (cap 21), all among {} relevant of {} pages",
        out.seeds.len(),
        relevant.len(),
        pages.len()
    ))
}

fn training_accuracy(examples: &[LabeledExample]) -> Result<f64, String> {
    let (model, _) = train_model(examples, &TrainParams::default()).map_err(|e| e.to_string())?;
    let correct = examples
        .iter()
        .filter(|e| model.classify(&e.text).relevant == (e.label == Label::Positive))
        .count();
    Ok(correct as f64 / examples.len() as f64)
}

fn classifier() -> Check {
    let separable = separable_examples(200, 1);
    let a = training_accuracy(&separable)?;
    ensure!(a == 1.0, "separable accuracy {a}");
    let fourteen = fourteen_page_examples();
    let b = training_accuracy(&fourteen)?;
    ensure!(fourteen.len() == 14 && b == 1.0, "14-example accuracy {b}");
    Ok(format!(
        "separable {} examples 100%, {} examples 100%",
        separable.len(),
        fourteen.len()
    ))
}

fn preprocess() -> Check {
    let pieces = [
        "Mirai",
        "BOTNET",
        "!!",
        " ",
        "\t",
        "@alice",
        "user12345",
        "http://x.y/z",
        "<b>",
        "&amp;",
        "ip-spoofing",
        "--",
        "_",
        "Ünï",
        "42",
        ",",
        "e-mail",
    ];
    let mut r = rng(8);
    for _ in 0..1000 {
        let s: String = (0..r.random_range(0..12))
            .map(|_| pieces[r.random_range(0..pieces.len())])
            .collect();
        let once = normalize(&s);
        ensure!(normalize(&once) == once, "not idempotent on {s:?}");
    }
    // Hand counts: 30 distinct tokens; (pair, count(ab), count(a), count(b)).
    let hand = [
        ("mirai", "botnet", 6.0, 6.0, 7.0),
        ("sql", "injection", 5.0, 6.0, 5.0),
        ("login", "page", 2.0, 3.0, 2.0),
    ];
    let corpus = phrase_corpus();
    let table = build_phrase_table(&corpus, 0.0, 1.0);
    ensure!(table.len() == hand.len(), "{} pairs retained", table.len());
    for (a, b, ab, ca, cb) in hand {
        let want = (ab - 1.0) * 30.0 / (ca * cb);
        let got = table.score(a, b).ok_or(format!("{a} {b} missing"))?;
        ensure!((got - want).abs() <= 1e-12, "{a} {b}: {got} vs {want}");
    }
    let forced = ForcedPhrases::new(["blind sql injection"]);
    for sentence in &corpus {
        let text = sentence.join(" ");
        let back = tokenize_mwe(&text, &table, &forced)
            .join(" ")
            .replace('_', " ");
        ensure!(back == text, "round trip broke on {text:?}");
    }
    Ok("1000 strings idempotent, 3 phrase scores exact, 20 sentences round-trip".into())
}

fn cli_pipeline() -> Check {
    let runs = tempfile::tempdir().unwrap();
    let inputs = common::Inputs::new();
    let server = FixtureServer::start(crawl_site(42).pages).map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let p = common::run_pipeline(&inputs, runs.path(), server.url("/r0").as_str());
    let elapsed = t0.elapsed();
    for s in &p.stages {
        ensure!(
            s.code == Some(0),
            "{} exited {:?}: {}",
            s.name,
            s.code,
            s.stderr.trim()
        );
    }
    ensure!(p.stages.len() == 8, "only {} stages ran", p.stages.len());
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    let selected = std::fs::read_to_string(p.selected.unwrap()).map_err(|e| e.to_string())?;
    let stages: Vec<String> = p
        .stages
        .iter()
        .map(|s| format!("{} {:.1?}", s.name, s.elapsed))
        .collect();
    Ok(format!(
        "8 stages exit 0 in {elapsed:.1?} ({}); {} selected",
        stages.join(", "),
        selected.lines().count()
    ))
}

fn dark_profile() -> Check {
    let server = FixtureServer::start(forum_site()).map_err(|e| e.to_string())?;
    let proxy = FakeSocksProxy::start(server.addr(), ".onion").map_err(|e| e.to_string())?;
    let (jar, _) =
        SessionCookieJar::parse("alphaforumxyz.onion\tFALSE\t/\tFALSE\t0\tsid\ts3cr3t\n");
    let mut config = CrawlConfig::new(
        Profile::Dark,
        vec![
            Url::parse("http://alphaforumxyz.onion/threads/1").unwrap(),
            Url::parse("http://betaboardqrs.onion/threads/4").unwrap(),
        ],
    );
    config.proxy = Some(proxy.addr().to_string());
    config.cookie_jar = jar;
    config.politeness_delay = Duration::from_millis(20);
    let store = Store::open_in_memory().unwrap();
    let report = runtime()
        .block_on(run_crawl(&config, &store))
        .map_err(|e| e.to_string())?;
    let conns = proxy.connections();
    let upstream: HashSet<_> = conns.iter().filter_map(|c| c.upstream_local).collect();
    let log = server.requests();
    ensure!(!log.is_empty(), "no requests reached the site");
    let mut with_cookie = 0;
    for r in &log {
        ensure!(upstream.contains(&r.peer), "{} bypassed the proxy", r.path);
        match r.host.as_deref() {
            Some("alphaforumxyz.onion") => {
                ensure!(
                    r.cookie.as_deref() == Some("sid=s3cr3t"),
                    "{} lacks the session cookie",
                    r.path
                );
                with_cookie += 1;
            }
            Some(h) => ensure!(r.cookie.is_none(), "cookie leaked to {h}"),
            None => return Err("request without Host".into()),
        }
    }
    Ok(format!(
        "{} requests, all via proxy ({} tunnels); cookie on {with_cookie} same-domain requests only; {} harvested",
        log.len(),
        conns.len(),
        report.pages_harvested
    ))
}

fn service_api() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("store.db");
    let store = Arc::new(Store::open(&db).map_err(|e| e.to_string())?);
    let mut ids = Vec::new();
    for n in 0..50 {
        let rec = DocumentRecord::fetched(
            &format!("http://docs.example/{n}"),
            SourceClass::Clear,
            chrono::Utc::now(),
            vec![],
        )
        .unwrap();
        let id = store.put_document(&rec).unwrap();
        store
            .set_parsed(
                &id,
                &ParsedPage {
                    text: format!("doc {n}"),
                    ..Default::default()
                },
            )
            .unwrap();
        store.set_ranking(&id, n as f64 / 50.0, &[]).unwrap();
        ids.push(id);
    }
    let rt = runtime();
    let (sent, rejected, stats) = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn(cti_core::service::serve(
            listener,
            AppState::new(store.clone(), ServiceConfig::default(), 1),
            async {
                let _ = rx.await;
            },
        ));
        let client = reqwest::Client::new();
        let post = |body: Value| {
            let req = client.post(format!("{base}/api/judgments")).json(&body);
            async move {
                let resp = req.send().await.unwrap();
                (
                    resp.status().as_u16(),
                    resp.json::<Value>().await.unwrap_or(Value::Null),
                )
            }
        };
        let mut r = rng(14);
        let mut sent = Vec::new();
        for _ in 0..1000 {
            let (doc, judge, grade) = (
                ids[r.random_range(0..ids.len())].clone(),
                format!("j{}", r.random_range(0..7)),
                r.random_range(0..4u8),
            );
            let (status, ack) =
                post(json!({ "doc_id": doc, "judge_id": judge, "grade": grade })).await;
            if status != 200 {
                return Err(format!("judgment rejected with {status}: {ack}"));
            }
            sent.push((doc, judge, grade));
        }
        let mut rejected = 0;
        for bad in [
            json!(-1),
            json!(4),
            json!(5),
            json!(255),
            json!(1000),
            json!(1.5),
            json!("2"),
            json!(null),
            json!([1]),
        ] {
            let (status, err) =
                post(json!({ "doc_id": ids[0], "judge_id": "x", "grade": bad })).await;
            if status != 422 || err["field"] != "grade" {
                return Err(format!("grade {bad} answered {status}"));
            }
            rejected += 1;
        }
        let stats: Value = client
            .get(format!("{base}/api/stats"))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        let _ = tx.send(());
        let _ = server.await;
        Ok((sent, rejected, stats))
    })?;

    // Export through the CLI and compare.
    let runs = tempfile::tempdir().unwrap();
    let out = common::cti(
        runs.path(),
        &[
            "export",
            "--store",
            db.to_str().unwrap(),
            "--what",
            "judgments",
        ],
    );
    ensure!(
        out.status.code() == Some(0),
        "export failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut exported: Vec<(String, String, u8)> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            (
                v["doc_id"].as_str().unwrap().into(),
                v["judge_id"].as_str().unwrap().into(),
                v["grade"].as_u64().unwrap() as u8,
            )
        })
        .collect();
    let mut sent = sent;
    sent.sort();
    exported.sort();
    ensure!(
        exported == sent,
        "export differs from posted judgments ({} vs {})",
        exported.len(),
        sent.len()
    );
    let hist: Vec<u64> = stats["grade_histogram"]
        .as_array()
        .ok_or("no histogram")?
        .iter()
        .filter_map(Value::as_u64)
        .collect();
    let total = stats["judgments_total"].as_u64().unwrap_or(0);
    ensure!(
        hist.iter().sum::<u64>() == total && total == 1000,
        "histogram {hist:?} vs total {total}"
    );
    Ok(format!("1000 judgments exported losslessly, {rejected} bad grades rejected, histogram {hist:?} sums to {total}"))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Check)> = vec![
        ("ranking identity", ranking_identity),
        ("ranking oracle", ranking_oracle),
        ("ranking invariances", ranking_invariances),
        ("sgns gradient check", sgns_gradient_check),
        ("embedding sanity", embedding_sanity),
        ("vocabulary expansion", vocabulary_expansion),
        ("link filter table", filter_table),
        ("focused crawl", focused_crawl),
        ("seed finder", seed_finder),
        ("classifier", classifier),
        ("preprocess", preprocess),
        ("cli pipeline", cli_pipeline),
        ("dark profile", dark_profile),
        ("service api", service_api),
    ];
    let mut results = BTreeMap::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match &outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => println!("FAIL [{}] {name}: {detail}", i + 1),
        }
        results.insert(i, outcome.is_ok());
    }
    let failed = results.values().filter(|ok| !**ok).count();
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
