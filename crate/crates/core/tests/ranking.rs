use cti_core::embeddings::EmbeddingModel;
use cti_core::fixtures::{toy_model, toy_vocab};
use cti_core::ranker::{relevance, Scorer};
use cti_core::store::Store;
use cti_core::vocab::TopicVocabulary;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

/// Plain-loop arithmetic, written without the ranker's helpers.
fn brute_force(tokens: &[&str], vocab: &[(&str, [f64; 3])]) -> f64 {
    let mut t = [0.0; 3];
    for (_, v) in vocab {
        for k in 0..3 {
            t[k] += v[k];
        }
    }
    let tn = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
    let mut p = [0.0; 3];
    for tok in tokens {
        if let Some((_, w)) = vocab.iter().find(|(name, _)| name == tok) {
            let wn = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
            let c = (w[0] * t[0] + w[1] * t[1] + w[2] * t[2]) / (wn * tn);
            for k in 0..3 {
                p[k] += c * w[k];
            }
        }
    }
    let pn = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if pn == 0.0 {
        return 0.0;
    }
    (p[0] * t[0] + p[1] * t[1] + p[2] * t[2]) / (pn * tn)
}

const TOY: [(&str, [f64; 3]); 3] = [
    ("botnet", [1.0, 0.5, 0.0]),
    ("ddos", [0.2, 1.0, 0.3]),
    ("exploit", [-0.4, 0.1, 1.0]),
];

#[test]
fn single_term_post_scores_one() {
    for (term, v) in [
        ("botnet", vec![3.0, -1.0]),
        ("x", vec![1e-3, 7.0]),
        ("y", vec![-2.0, -2.0]),
    ] {
        let model =
            EmbeddingModel::from_vectors(2, [(term, v), ("other", vec![1.0, 1.0])]).unwrap();
        let vocab = TopicVocabulary::from_terms("one", [term]);
        let r = relevance(&[term], &vocab, &model).unwrap().r;
        assert!((r - 1.0).abs() <= TOL, "{term}: {r}");
    }
}

#[test]
fn toy_model_matches_brute_force() {
    let model = toy_model();
    let vocab = toy_vocab();
    let pool = ["botnet", "ddos", "exploit", "weather", "the", "report"];
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for case in 0..50 {
        let len = rng.random_range(1..15);
        let tokens: Vec<&str> = (0..len)
            .map(|_| pool[rng.random_range(0..pool.len())])
            .collect();
        let got = relevance(&tokens, &vocab, &model).unwrap().r;
        let want = brute_force(&tokens, &TOY);
        assert!(
            (got - want).abs() <= TOL,
            "case {case} {tokens:?}: {got} vs {want}"
        );
    }
}

#[test]
fn toy_model_hand_values() {
    // T = (0.8, 1.6, 1.3); a post holding only `botnet` points along botnet.
    let model = toy_model();
    let vocab = toy_vocab();
    let r = relevance(&["botnet"], &vocab, &model).unwrap().r;
    let want =
        (0.8 * 1.0 + 1.6 * 0.5) / ((0.8f64 * 0.8 + 1.6 * 1.6 + 1.3 * 1.3).sqrt() * 1.25f64.sqrt());
    assert!((r - want).abs() <= TOL);
    assert_eq!(
        relevance(&["weather", "rain"], &vocab, &model).unwrap().r,
        0.0
    );
}

#[test]
fn matched_terms_count_vocabulary_hits() {
    let model = toy_model();
    let vocab = toy_vocab();
    let res = relevance(&["botnet", "weather", "botnet", "ddos"], &vocab, &model).unwrap();
    let counts: Vec<(&str, usize)> = res
        .matched_terms
        .iter()
        .map(|m| (m.term.as_str(), m.count))
        .collect();
    assert_eq!(counts, vec![("botnet", 2), ("ddos", 1)]);
    assert_eq!((res.vocab_token_count, res.total_token_count), (3, 4));
}

#[test]
fn rich_document_ranks_first() {
    use cti_core::parser::ParsedPage;
    use cti_core::store::{DocumentRecord, SourceClass};
    let store = Store::open_in_memory().unwrap();
    let mut ids = Vec::new();
    for (n, text) in [
        "Botnet and DDoS exploit wave, botnet again",
        "Lovely weather and rain today",
    ]
    .iter()
    .enumerate()
    {
        let rec = DocumentRecord::fetched(
            &format!("http://r.example/{n}"),
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
                    text: text.to_string(),
                    ..Default::default()
                },
            )
            .unwrap();
        ids.push(id);
    }
    let (model, vocab) = (toy_model(), toy_vocab());
    let scorer = Scorer::new(&vocab, &model).unwrap();
    let out = cti_core::ranker::rank_corpus(&store, &ids, &scorer).unwrap();
    assert_eq!(out.results[0].doc_id, ids[0]);
    assert!(out.results[0].r > 0.0);
    assert_eq!(out.results[1].r, 0.0);
    assert_eq!(
        store
            .get_document(&ids[1])
            .unwrap()
            .unwrap()
            .relevance_score,
        Some(0.0)
    );
}

fn random_model(seed: u64) -> (EmbeddingModel, TopicVocabulary, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(2..8);
    let n_terms = rng.random_range(3..12);
    let terms: Vec<String> = (0..n_terms).map(|i| format!("w{i}")).collect();
    let rows: Vec<(String, Vec<f64>)> = terms
        .iter()
        .map(|t| {
            (
                t.clone(),
                (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    let model = EmbeddingModel::from_vectors(dim, rows).unwrap();
    let k = rng.random_range(1..=n_terms);
    let vocab = TopicVocabulary::from_terms("rand", terms[..k].iter());
    let mut pool = terms.clone();
    pool.push("oov".into());
    (model, vocab, pool)
}

fn random_post(seed: u64, pool: &[String]) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let len = rng.random_range(0..25);
    (0..len)
        .map(|_| pool[rng.random_range(0..pool.len())].clone())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn permutation_invariant(seed in any::<u64>()) {
        let (model, vocab, pool) = random_model(seed);
        let post = random_post(seed, &pool);
        let Ok(base) = relevance(&post, &vocab, &model) else { return Ok(()) };
        let mut shuffled = post.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)));
        let r = relevance(&shuffled, &vocab, &model).unwrap().r;
        prop_assert!((r - base.r).abs() <= TOL);
    }

    #[test]
    fn duplication_invariant(seed in any::<u64>()) {
        let (model, vocab, pool) = random_model(seed);
        let post = random_post(seed, &pool);
        let Ok(base) = relevance(&post, &vocab, &model) else { return Ok(()) };
        let doubled: Vec<String> = post.iter().chain(post.iter()).cloned().collect();
        let r = relevance(&doubled, &vocab, &model).unwrap().r;
        prop_assert!((r - base.r).abs() <= TOL);
    }

    #[test]
    fn positive_scale_invariant(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let (model, vocab, pool) = random_model(seed);
        let post = random_post(seed, &pool);
        let Ok(base) = relevance(&post, &vocab, &model) else { return Ok(()) };
        let r = relevance(&post, &vocab, &model.scaled(c)).unwrap().r;
        prop_assert!((r - base.r).abs() <= TOL);
    }

    #[test]
    fn score_is_bounded(seed in any::<u64>()) {
        let (model, vocab, pool) = random_model(seed);
        let post = random_post(seed, &pool);
        if let Ok(res) = relevance(&post, &vocab, &model) {
            prop_assert!((-1.0..=1.0).contains(&res.r));
        }
    }
}
