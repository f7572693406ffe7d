//! Skip-gram with negative sampling.
//!
//! For a center term `c` and a context term `o` the per-pair loss is
//! `-log s(u_o . v_c) - sum_k log s(-u_nk . v_c)` with negatives drawn from
//! the unigram distribution raised to 3/4. Workers share the parameter
//! matrices without locks (Hogwild); cells are `AtomicU32`-backed `f32`s
//! accessed with relaxed ordering, so concurrent updates may be lost but
//! never tear. One worker gives bit-reproducible training.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbeddingError, EmbeddingModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub dim: usize,
    pub window: usize,
    pub min_count: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Subsampling threshold `t`; a term with relative frequency `f` is kept
    /// with probability `min(1, sqrt(t / f))`. Zero disables subsampling.
    pub subsample: f64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            dim: 150,
            window: 5,
            min_count: 1,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            subsample: 1e-3,
            seed: 1,
            threads: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingReport {
    /// Mean per-pair loss for each epoch.
    pub epoch_losses: Vec<f64>,
    pub words_processed: u64,
    pub vocab_size: usize,
}

fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// `log(1 + e^x)` without overflow.
fn softplus<F: Float>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of the pair loss with respect to the dot product:
/// `s(dot) - 1` for the observed context, `s(dot)` for a negative.
pub fn pair_coefficient<F: Float>(dot: F, positive: bool) -> F {
    let s = sigmoid(dot);
    if positive {
        s - F::one()
    } else {
        s
    }
}

/// `-log s(dot)` for the observed context, `-log s(-dot)` for a negative.
pub fn pair_loss<F: Float>(dot: F, positive: bool) -> F {
    if positive {
        softplus(-dot)
    } else {
        softplus(dot)
    }
}

/// Loss gradient for one (center, context, negatives) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradient<F> {
    pub loss: F,
    pub center: Vec<F>,
    pub context: Vec<F>,
    pub negatives: Vec<Vec<F>>,
}

fn dot_generic<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn sgns_gradient<F: Float>(center: &[F], context: &[F], negatives: &[&[F]]) -> SgnsGradient<F> {
    let d = center.len();
    let mut grad_center = vec![F::zero(); d];
    let mut loss = F::zero();
    let mut target = |u: &[F], positive: bool| -> Vec<F> {
        let x = dot_generic(u, center);
        loss = loss + pair_loss(x, positive);
        let g = pair_coefficient(x, positive);
        for (gc, &ui) in grad_center.iter_mut().zip(u) {
            *gc = *gc + g * ui;
        }
        center.iter().map(|&vi| g * vi).collect()
    };
    let grad_context = target(context, true);
    let grad_negs: Vec<Vec<F>> = negatives.iter().map(|u| target(u, false)).collect();
    SgnsGradient {
        loss,
        center: grad_center,
        context: grad_context,
        negatives: grad_negs,
    }
}

struct SharedMatrix {
    cells: Vec<AtomicU32>,
    dim: usize,
}

impl SharedMatrix {
    fn new(rows: usize, dim: usize, mut init: impl FnMut() -> f32) -> Self {
        Self {
            cells: (0..rows * dim)
                .map(|_| AtomicU32::new(init().to_bits()))
                .collect(),
            dim,
        }
    }

    fn load(&self, row: usize, out: &mut [f32]) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f32::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn add(&self, row: usize, delta: &[f32]) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (c, &d) in cells.iter().zip(delta) {
            let v = f32::from_bits(c.load(Ordering::Relaxed)) + d;
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_f64(self) -> Vec<f64> {
        self.cells
            .into_iter()
            .map(|c| f32::from_bits(c.into_inner()) as f64)
            .collect()
    }
}

struct Vocab {
    terms: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

fn build_vocab(corpus: &[Vec<String>], min_count: usize) -> Vocab {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for sentence in corpus {
        for tok in sentence {
            *counts.entry(tok.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count.max(1) as u64)
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let terms: Vec<String> = entries.iter().map(|(t, _)| t.to_string()).collect();
    let index = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Vocab {
        terms,
        counts: entries.iter().map(|e| e.1).collect(),
        index,
    }
}

/// Cumulative unigram^0.75 distribution for negative sampling.
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        for c in &mut cumulative {
            *c /= acc;
        }
        Self { cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let x: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= x)
            .min(self.cumulative.len() - 1)
    }
}

struct Shared<'a> {
    input: SharedMatrix,
    output: SharedMatrix,
    noise: NoiseTable,
    keep_prob: Vec<f64>,
    hyper: &'a Hyperparams,
    processed: AtomicU64,
    total_work: u64,
}

/// Trains input vectors over tokenized sentences.
pub fn train_skipgram(
    corpus: &[Vec<String>],
    hyper: &Hyperparams,
) -> Result<(EmbeddingModel, TrainingReport), EmbeddingError> {
    if hyper.dim == 0 {
        return Err(EmbeddingError::Config("dim must be positive".into()));
    }
    if hyper.window == 0 {
        return Err(EmbeddingError::Config("window must be positive".into()));
    }
    if !(hyper.learning_rate > 0.0 && hyper.learning_rate.is_finite()) {
        return Err(EmbeddingError::Config(
            "learning rate must be positive".into(),
        ));
    }
    let vocab = build_vocab(corpus, hyper.min_count);
    if vocab.terms.is_empty() {
        return Err(EmbeddingError::EmptyCorpus);
    }
    let encoded: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| {
            s.iter()
                .filter_map(|t| vocab.index.get(t.as_str()).copied())
                .collect()
        })
        .collect();
    let total_words: u64 = vocab.counts.iter().sum();

    let mut init_rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let scale = 0.5 / hyper.dim as f32;
    let input = SharedMatrix::new(vocab.terms.len(), hyper.dim, || {
        init_rng.random_range(-scale..scale)
    });
    let output = SharedMatrix::new(vocab.terms.len(), hyper.dim, || 0.0);
    let keep_prob = vocab
        .counts
        .iter()
        .map(|&c| {
            if hyper.subsample <= 0.0 {
                1.0
            } else {
                (hyper.subsample / (c as f64 / total_words as f64))
                    .sqrt()
                    .min(1.0)
            }
        })
        .collect();
    let shared = Shared {
        input,
        output,
        noise: NoiseTable::new(&vocab.counts),
        keep_prob,
        hyper,
        processed: AtomicU64::new(0),
        total_work: total_words * hyper.epochs as u64 + 1,
    };

    let threads = hyper.threads.max(1).min(encoded.len().max(1));
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        let chunk = encoded.len().div_ceil(threads).max(1);
        let sums: Vec<(f64, u64)> = std::thread::scope(|scope| {
            let handles: Vec<_> = encoded
                .chunks(chunk)
                .enumerate()
                .map(|(worker, sentences)| {
                    let shared = &shared;
                    let seed = hyper
                        .seed
                        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                        .wrapping_add((epoch as u64) << 32 | worker as u64);
                    scope.spawn(move || run_worker(shared, sentences, seed))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training worker panicked"))
                .collect()
        });
        let (loss, pairs) = sums.iter().fold((0.0, 0u64), |a, b| (a.0 + b.0, a.1 + b.1));
        let mean = if pairs > 0 { loss / pairs as f64 } else { 0.0 };
        if !mean.is_finite() {
            return Err(EmbeddingError::NonFinite(format!("epoch {epoch} loss")));
        }
        epoch_losses.push(mean);
    }

    let words_processed = shared.processed.load(Ordering::Relaxed);
    let vectors = shared.input.into_f64();
    let rows = vocab
        .terms
        .iter()
        .cloned()
        .zip(vectors.chunks(hyper.dim).map(<[f64]>::to_vec));
    let model = EmbeddingModel::from_vectors(hyper.dim, rows)?.with_hyper(hyper.clone());
    Ok((
        model,
        TrainingReport {
            epoch_losses,
            words_processed,
            vocab_size: vocab.terms.len(),
        },
    ))
}

/// One pass over a slice of sentences; returns (summed loss, pair count).
fn run_worker(shared: &Shared<'_>, sentences: &[Vec<usize>], seed: u64) -> (f64, u64) {
    let hyper = shared.hyper;
    let d = hyper.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut center = vec![0f32; d];
    let mut target = vec![0f32; d];
    let mut center_grad = vec![0f32; d];
    let mut delta = vec![0f32; d];
    let mut kept = Vec::new();
    let (mut loss_sum, mut pairs) = (0f64, 0u64);

    for sentence in sentences {
        let done = shared
            .processed
            .fetch_add(sentence.len() as u64, Ordering::Relaxed);
        let progress = done as f64 / shared.total_work as f64;
        let lr = (hyper.learning_rate * (1.0 - progress).max(1e-4)) as f32;

        kept.clear();
        for &w in sentence {
            let p = shared.keep_prob[w];
            if p >= 1.0 || rng.random::<f64>() < p {
                kept.push(w);
            }
        }
        for (pos, &c) in kept.iter().enumerate() {
            let reach = rng.random_range(1..=hyper.window);
            let lo = pos.saturating_sub(reach);
            let hi = (pos + reach).min(kept.len() - 1);
            for (ctx_pos, &o) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                if ctx_pos == pos {
                    continue;
                }
                shared.input.load(c, &mut center);
                center_grad.iter_mut().for_each(|g| *g = 0.0);
                for k in 0..=hyper.negatives {
                    let (t, positive) = if k == 0 {
                        (o, true)
                    } else {
                        let n = shared.noise.sample(&mut rng);
                        if n == o {
                            continue;
                        }
                        (n, false)
                    };
                    shared.output.load(t, &mut target);
                    let x: f32 = center.iter().zip(&target).map(|(a, b)| a * b).sum();
                    loss_sum += pair_loss(x as f64, positive);
                    let g = pair_coefficient(x, positive) * lr;
                    for i in 0..d {
                        center_grad[i] += g * target[i];
                        delta[i] = -g * center[i];
                    }
                    shared.output.add(t, &delta);
                }
                for g in center_grad.iter_mut() {
                    *g = -*g;
                }
                shared.input.add(c, &center_grad);
                pairs += 1;
            }
        }
    }
    (loss_sum, pairs)
}
