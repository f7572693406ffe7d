use cti_core::embeddings::{sgns_gradient, train_skipgram, EmbeddingModel, Hyperparams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;

fn log_sigmoid(x: f64) -> f64 {
    -(1.0 + (-x).exp()).ln()
}

/// Negative-sampling loss for one triple, written out directly.
fn loss(center: &[f64], context: &[f64], negatives: &[Vec<f64>]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    -log_sigmoid(dot(center, context))
        - negatives
            .iter()
            .map(|n| log_sigmoid(-dot(center, n)))
            .sum::<f64>()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let d = 10;
    for trial in 0..5 {
        let mut v =
            |scale: f64| -> Vec<f64> { (0..d).map(|_| rng.random_range(-scale..scale)).collect() };
        let center = v(0.8);
        let context = v(0.8);
        let negs: Vec<Vec<f64>> = (0..5).map(|_| v(0.8)).collect();
        let neg_refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        let g = sgns_gradient(&center, &context, &neg_refs);
        assert!((g.loss - loss(&center, &context, &negs)).abs() < 1e-12);

        let mut worst: f64 = 0.0;
        // Parameter blocks: 0 = center, 1 = context, 2.. = negatives.
        for block in 0..2 + negs.len() {
            for i in 0..d {
                let analytic = match block {
                    0 => g.center[i],
                    1 => g.context[i],
                    k => g.negatives[k - 2][i],
                };
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
                worst = worst.max(rel_err(analytic, numeric));
            }
        }
        assert!(worst <= 1e-4, "trial {trial}: worst relative error {worst}");
    }
}

#[test]
fn f32_gradient_agrees_with_f64() {
    let c = [0.1f32, -0.2, 0.3];
    let o = [0.5f32, 0.1, -0.4];
    let n = [-0.3f32, 0.2, 0.2];
    let g32 = sgns_gradient(&c, &o, &[&n]);
    let g64 = sgns_gradient(&c.map(f64::from), &o.map(f64::from), &[&n.map(f64::from)]);
    for (a, b) in g32.center.iter().zip(&g64.center) {
        assert!((*a as f64 - b).abs() < 1e-6);
    }
}

fn tiny_corpus() -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let words = [
        "alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta",
    ];
    (0..300)
        .map(|_| {
            (0..8)
                .map(|_| words[rng.random_range(0..words.len())].to_string())
                .collect()
        })
        .collect()
}

#[test]
fn single_thread_training_is_reproducible() {
    let hyper = Hyperparams {
        dim: 16,
        epochs: 2,
        threads: 1,
        min_count: 1,
        seed: 5,
        ..Hyperparams::default()
    };
    let (a, _) = train_skipgram(&tiny_corpus(), &hyper).unwrap();
    let (b, _) = train_skipgram(&tiny_corpus(), &hyper).unwrap();
    for t in a.terms() {
        assert_eq!(a.vector(t), b.vector(t));
    }
    let other = Hyperparams { seed: 6, ..hyper };
    let (c, _) = train_skipgram(&tiny_corpus(), &other).unwrap();
    assert_ne!(a.vector("alpha"), c.vector("alpha"));
}

#[test]
fn nearest_excludes_query_and_sorts() {
    let m = EmbeddingModel::from_vectors(
        2,
        [
            ("a", vec![1.0, 0.0]),
            ("b", vec![0.9, 0.1]),
            ("c", vec![0.0, 1.0]),
            ("d", vec![-1.0, 0.0]),
        ],
    )
    .unwrap();
    let near = m.nearest_to_term("a", 3).unwrap();
    let names: Vec<&str> = near.iter().map(|(t, _)| t.as_str()).collect();
    assert_eq!(names, vec!["b", "c", "d"]);
    assert!(near.windows(2).all(|w| w[0].1 >= w[1].1));
    assert!(m.nearest_to_term("zzz", 3).is_none());
}
