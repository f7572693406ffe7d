use cti_core::embeddings::EmbeddingModel;
use cti_core::vocab::{build_vocabulary, read_vocabulary, write_vocabulary, Provenance};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(seed: u64, n_terms: usize) -> EmbeddingModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EmbeddingModel::from_vectors(
        6,
        (0..n_terms).map(|i| {
            (
                format!("t{i}"),
                (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
        }),
    )
    .unwrap()
}

fn tags(seed: u64, n_terms: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 77);
    let k = rng.random_range(1..6);
    // Some tags fall outside the model.
    (0..k)
        .map(|_| format!("t{}", rng.random_range(0..n_terms + 3)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn size_is_bounded(seed in any::<u64>(), n in 0usize..8) {
        let m = model(seed, 30);
        let tags = tags(seed, 30);
        let distinct: std::collections::BTreeSet<&String> = tags.iter().collect();
        let v = build_vocabulary("p", &tags, &m, n).unwrap().vocabulary;
        prop_assert!(v.len() <= distinct.len() * (n + 1));
        for t in &distinct {
            prop_assert!(v.contains(t));
        }
    }

    #[test]
    fn zero_neighbours_gives_tags(seed in any::<u64>()) {
        let m = model(seed, 30);
        let tags = tags(seed, 30);
        let v = build_vocabulary("p", &tags, &m, 0).unwrap().vocabulary;
        let got: std::collections::BTreeSet<&str> = v.terms().collect();
        let want: std::collections::BTreeSet<&str> = tags.iter().map(String::as_str).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn rebuild_is_identical(seed in any::<u64>(), n in 0usize..8) {
        let tags = tags(seed, 30);
        let mut outs = Vec::new();
        for _ in 0..2 {
            let v = build_vocabulary("p", &tags, &model(seed, 30), n).unwrap().vocabulary;
            let mut buf = Vec::new();
            write_vocabulary(&v, &mut buf).unwrap();
            outs.push(buf);
        }
        prop_assert_eq!(&outs[0], &outs[1]);
    }
}

#[test]
fn provenance_round_trips() {
    let m = model(1, 20);
    let build = build_vocabulary("p", &["t1", "missing tag"], &m, 3).unwrap();
    assert_eq!(build.oov_tags, vec!["missing_tag".to_string()]);
    let v = build.vocabulary;
    assert_eq!(v.provenance("t1"), Some(&Provenance::Seed));
    let neighbours: Vec<_> = v
        .entries()
        .filter(|(_, p)| matches!(p, Provenance::Neighbor { .. }))
        .map(|(t, _)| t.to_string())
        .collect();
    assert_eq!(neighbours.len(), 3);
    let mut buf = Vec::new();
    write_vocabulary(&v, &mut buf).unwrap();
    assert_eq!(read_vocabulary(buf.as_slice()).unwrap(), v);
}

#[test]
fn neighbours_follow_similarity() {
    let m = model(2, 20);
    let v = build_vocabulary("p", &["t0"], &m, 4).unwrap().vocabulary;
    let expected = m.nearest_to_term("t0", 4).unwrap();
    for (rank, (term, _)) in expected.iter().enumerate() {
        assert_eq!(
            v.provenance(term),
            Some(&Provenance::Neighbor {
                source_tag: "t0".into(),
                rank: rank + 1
            })
        );
    }
}
