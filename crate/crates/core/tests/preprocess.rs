use cti_core::fixtures::{phrase_corpus, DUMP_COMMENTS_XML, DUMP_POSTS_XML};
use cti_core::preprocess::{
    build_phrase_table, normalize, parse_dump_dir, tokenize_mwe, ForcedPhrases, PhraseTable,
    DEFAULT_DELTA, DEFAULT_THRESHOLD,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_string(rng: &mut ChaCha8Rng) -> String {
    const PIECES: &[&str] = &[
        "Mirai",
        "BOTNET",
        "!!",
        " ",
        "  ",
        "\t",
        "@alice",
        "user12345",
        "http://x.y/z?q=1",
        "www.evil.example",
        "<b>",
        "</p>",
        "&amp;",
        "ip-spoofing",
        "--",
        "_",
        "Ünïcødé",
        "数据",
        "42",
        "3.14",
        ",",
        "e-mail",
        "-x-",
    ];
    let n = rng.random_range(0..12);
    (0..n)
        .map(|_| PIECES[rng.random_range(0..PIECES.len())])
        .collect::<Vec<_>>()
        .concat()
}

#[test]
fn normalize_is_idempotent_on_1k_strings() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let s = random_string(&mut rng);
        let once = normalize(&s);
        assert_eq!(normalize(&once), once, "input {s:?}");
        assert!(once
            .chars()
            .all(|c| (c.is_alphabetic() && !c.is_uppercase())
                || c.is_numeric()
                || "-_ ".contains(c)));
    }
}

#[test]
fn phrase_scores_match_hand_counts() {
    // Counted by hand over the twenty fixture sentences: 30 distinct tokens;
    // "mirai" 6, "botnet" 7, "sql" 6, "injection" 5, "login" 3, "page" 2.
    let v = 30.0;
    let hand = [
        ("mirai", "botnet", 6.0, 6.0, 7.0),
        ("sql", "injection", 5.0, 6.0, 5.0),
        ("login", "page", 2.0, 3.0, 2.0),
    ];
    let corpus = phrase_corpus();

    let delta = 1.0;
    let loose = build_phrase_table(&corpus, 0.0, delta);
    assert_eq!(loose.len(), 3);
    for (a, b, ab, ca, cb) in hand {
        let want = (ab - delta) * v / (ca * cb);
        let got = loose.score(a, b).unwrap();
        assert!((got - want).abs() <= 1e-12, "{a} {b}: {got} vs {want}");
    }

    let tight = build_phrase_table(&corpus, 3.6, delta);
    assert!(tight.contains("sql", "injection") && tight.contains("login", "page"));
    assert!(!tight.contains("mirai", "botnet"));

    // Default discount: (6 - 5) * 30 / 42 is far below the default threshold.
    assert!(build_phrase_table(&corpus, DEFAULT_THRESHOLD, DEFAULT_DELTA).is_empty());
    let low = build_phrase_table(&corpus, 0.7, DEFAULT_DELTA);
    assert!((low.score("mirai", "botnet").unwrap() - 30.0 / 42.0).abs() <= 1e-12);
    assert_eq!(low.len(), 1);
}

#[test]
fn phrase_table_ignores_sentence_order() {
    let mut corpus = phrase_corpus();
    let a = build_phrase_table(&corpus, 0.0, 1.0);
    corpus.reverse();
    assert_eq!(a, build_phrase_table(&corpus, 0.0, 1.0));
}

#[test]
fn tokenize_round_trip_over_corpus() {
    let table = build_phrase_table(&phrase_corpus(), 0.0, 1.0);
    let forced = ForcedPhrases::new(["blind sql injection", "new variant"]);
    for sentence in phrase_corpus() {
        let text = sentence.join(" ");
        let tokens = tokenize_mwe(&text, &table, &forced);
        assert_eq!(tokens.join(" ").replace('_', " "), text);
    }
}

#[test]
fn tsv_round_trip() {
    let table = build_phrase_table(&phrase_corpus(), 0.0, 1.0);
    let mut buf = Vec::new();
    table.write_tsv(&mut buf).unwrap();
    assert_eq!(PhraseTable::read_tsv(buf.as_slice()).unwrap(), table);
}

#[test]
fn dump_fixture_yields_five_posts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("Posts.xml"), DUMP_POSTS_XML).unwrap();
    std::fs::write(dir.path().join("Comments.xml"), DUMP_COMMENTS_XML).unwrap();
    let parsed = parse_dump_dir(dir.path()).unwrap();
    assert_eq!(parsed.posts.len(), 5);
    assert_eq!(
        parsed.tag_set(),
        vec!["botnet", "ddos", "iot", "sql-injection", "web"]
    );
}

proptest! {
    #[test]
    fn tokenize_never_drops_tokens(words in proptest::collection::vec("[a-d]{1,2}", 0..30)) {
        let corpus = vec![words.clone()];
        let table = build_phrase_table(&corpus, -1e9, 0.0);
        let text = words.join(" ");
        let out = tokenize_mwe(&text, &table, &ForcedPhrases::new(["a b", "c d a"]));
        prop_assert_eq!(out.join(" ").replace('_', " "), text);
    }

    #[test]
    fn normalize_idempotent(s in "\\PC{0,60}") {
        let once = normalize(&s);
        prop_assert_eq!(normalize(&once), once);
    }
}
