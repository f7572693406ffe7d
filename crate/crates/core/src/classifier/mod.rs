//! Linear page-relevance classifier over hashed TF-IDF features, trained
//! with the Pegasos stochastic subgradient method.

mod features;
mod seeds;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use features::{
    featurize_with, fnv1a, tokenize, FeatureHasher, Fnv1a, Idf, SparseVector, BUCKETS, HASH_BITS,
};
pub use seeds::{
    seed_find, HttpPageSource, HttpSearchBackend, LocalIndex, PageSource, SearchBackend,
    SearchError, SeedFindOutcome, SeedLimits,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    fn y(self) -> f64 {
        match self {
            Self::Positive => 1.0,
            Self::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub url: String,
    pub text: String,
    pub label: Label,
}

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("training needs at least one positive and one negative example (got {n_pos} positive, {n_neg} negative)")]
    SingleClass { n_pos: usize, n_neg: usize },
    #[error("example {0:?} has empty text")]
    EmptyText(String),
    #[error("training diverged: non-finite objective {objective} after epoch {epoch} (|w|={weight_norm})")]
    NonFinite {
        epoch: usize,
        objective: f64,
        weight_norm: f64,
    },
    #[error("invalid hyperparameter: {0}")]
    Config(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("bad training data: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 20,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    /// Sorted by bucket; zero weights omitted.
    pub weights: SparseVector,
    pub bias: f64,
    pub idf: Idf,
    pub threshold: f64,
    pub trained_at: DateTime<Utc>,
    pub n_pos: u32,
    pub n_neg: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub score: f64,
    pub relevant: bool,
}

impl ClassifierModel {
    pub fn featurize(&self, text: &str) -> SparseVector {
        featurize_with(&Fnv1a, &self.idf, text)
    }

    /// `w . x + b`, relevant iff the score reaches the threshold.
    pub fn classify(&self, text: &str) -> Classification {
        let score = self.weights.dot(&self.featurize(text)) + self.bias;
        Classification {
            score,
            relevant: score >= self.threshold,
        }
    }

    /// All weights and the bias multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.weights.entries.iter_mut().for_each(|e| e.1 *= c);
        m.bias *= c;
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Regularized hinge objective on the training set after each epoch.
    pub epoch_objectives: Vec<f64>,
    pub training_accuracy: f64,
}

/// Pegasos: at step `t` with `eta = 1 / (lambda t)`, shrink `w` by
/// `1 - eta lambda`, add `eta y x` on a margin violation, then project onto
/// the ball of radius `1 / sqrt(lambda)`. The bias is a constant feature.
/// The returned weights average the iterates of the second half of the
/// steps (sampled with a stride on large problems).
pub fn train_model(
    examples: &[LabeledExample],
    params: &TrainParams,
) -> Result<(ClassifierModel, TrainReport), ClassifierError> {
    if !(params.lambda > 0.0 && params.lambda.is_finite()) {
        return Err(ClassifierError::Config(format!(
            "lambda must be positive, got {}",
            params.lambda
        )));
    }
    if params.epochs == 0 {
        return Err(ClassifierError::Config("epochs must be at least 1".into()));
    }
    let n_pos = examples
        .iter()
        .filter(|e| e.label == Label::Positive)
        .count();
    let n_neg = examples.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ClassifierError::SingleClass { n_pos, n_neg });
    }
    if let Some(e) = examples.iter().find(|e| e.text.trim().is_empty()) {
        return Err(ClassifierError::EmptyText(e.url.clone()));
    }

    let texts: Vec<&str> = examples.iter().map(|e| e.text.as_str()).collect();
    let idf = Idf::fit(&Fnv1a, &texts);
    // Compact coordinates: only buckets seen in training can get weight.
    let mut coord: HashMap<u32, usize> = HashMap::new();
    let data: Vec<(Vec<(usize, f64)>, f64)> = examples
        .iter()
        .map(|e| {
            let x = featurize_with(&Fnv1a, &idf, &e.text);
            let mut row: Vec<(usize, f64)> = x
                .entries
                .iter()
                .map(|&(b, v)| {
                    let next = coord.len();
                    (*coord.entry(b).or_insert(next), v)
                })
                .collect();
            row.push((usize::MAX, 1.0));
            (row, e.label.y())
        })
        .collect();
    let dim = coord.len() + 1;
    let bias_ix = dim - 1;
    let fix = |i: usize| if i == usize::MAX { bias_ix } else { i };
    let data: Vec<(Vec<(usize, f64)>, f64)> = data
        .into_iter()
        .map(|(row, y)| (row.into_iter().map(|(i, v)| (fix(i), v)).collect(), y))
        .collect();

    let lambda = params.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut v = vec![0.0f64; dim];
    let mut scale = 1.0f64;
    let mut sq_norm_v = 0.0f64;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut t: u64 = 0;
    let mut avg = vec![0.0f64; dim];
    let mut averaged = 0usize;
    let total_steps = (params.epochs * data.len()) as u64;
    let suffix_start = total_steps / 2;
    let stride = ((dim as u64 * (total_steps - suffix_start)) / 200_000_000).max(1);
    let mut objectives = Vec::with_capacity(params.epochs);

    let objective = |w: &[f64]| -> f64 {
        let reg = 0.5 * lambda * w.iter().map(|x| x * x).sum::<f64>();
        let hinge: f64 = data
            .iter()
            .map(|(row, y)| (1.0 - y * row.iter().map(|&(i, x)| w[i] * x).sum::<f64>()).max(0.0))
            .sum::<f64>()
            / data.len() as f64;
        reg + hinge
    };

    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            t += 1;
            let (row, y) = &data[k];
            let eta = 1.0 / (lambda * t as f64);
            let margin = y * scale * row.iter().map(|&(i, x)| v[i] * x).sum::<f64>();
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|x| *x = 0.0);
                scale = 1.0;
                sq_norm_v = 0.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let a = eta * y / scale;
                let vx: f64 = row.iter().map(|&(i, x)| v[i] * x).sum();
                let xx: f64 = row.iter().map(|&(_, x)| x * x).sum();
                for &(i, x) in row {
                    v[i] += a * x;
                }
                sq_norm_v += 2.0 * a * vx + a * a * xx;
            }
            let w_norm = scale.abs() * sq_norm_v.max(0.0).sqrt();
            if w_norm > radius {
                scale *= radius / w_norm;
            }
            if scale.abs() < 1e-12 {
                v.iter_mut().for_each(|x| *x *= scale);
                sq_norm_v = v.iter().map(|x| x * x).sum();
                scale = 1.0;
            }
            if t > suffix_start && (t - suffix_start).is_multiple_of(stride) {
                avg.iter_mut().zip(&v).for_each(|(a, b)| *a += b * scale);
                averaged += 1;
            }
        }
        let w: Vec<f64> = v.iter().map(|x| x * scale).collect();
        let obj = objective(&w);
        if !obj.is_finite() {
            let weight_norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            return Err(ClassifierError::NonFinite {
                epoch,
                objective: obj,
                weight_norm,
            });
        }
        objectives.push(obj);
    }
    avg.iter_mut().for_each(|a| *a /= averaged as f64);

    let mut weights = HashMap::new();
    for (&b, &i) in &coord {
        weights.insert(b, avg[i]);
    }
    let model = ClassifierModel {
        weights: SparseVector::from_map(weights),
        bias: avg[bias_ix],
        idf,
        threshold: 0.0,
        trained_at: Utc::now(),
        n_pos: n_pos as u32,
        n_neg: n_neg as u32,
    };
    let correct = examples
        .iter()
        .filter(|e| model.classify(&e.text).relevant == (e.label == Label::Positive))
        .count();
    let report = TrainReport {
        epoch_objectives: objectives,
        training_accuracy: correct as f64 / examples.len() as f64,
    };
    Ok((model, report))
}

pub const MODEL_MAGIC: &[u8; 5] = b"CTIM1";

/// Little-endian layout: magic, `u32` bucket count, `u32` weight count,
/// `(u32 bucket, f64 weight)` pairs, then `f64` bias, `f64` threshold,
/// `i64` trained-at seconds, `u32` n_pos, `u32` n_neg, `u32` idf document
/// count, `u32` idf entry count and `(u32, f64)` idf pairs.
pub fn write_classifier<W: Write>(m: &ClassifierModel, mut out: W) -> Result<(), ClassifierError> {
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&BUCKETS.to_le_bytes())?;
    out.write_all(&(m.weights.entries.len() as u32).to_le_bytes())?;
    for &(b, w) in &m.weights.entries {
        out.write_all(&b.to_le_bytes())?;
        out.write_all(&w.to_le_bytes())?;
    }
    out.write_all(&m.bias.to_le_bytes())?;
    out.write_all(&m.threshold.to_le_bytes())?;
    out.write_all(&m.trained_at.timestamp().to_le_bytes())?;
    out.write_all(&m.n_pos.to_le_bytes())?;
    out.write_all(&m.n_neg.to_le_bytes())?;
    out.write_all(&m.idf.n_docs.to_le_bytes())?;
    let mut idf: Vec<(u32, f64)> = m.idf.table.iter().map(|(&b, &v)| (b, v)).collect();
    idf.sort_unstable_by_key(|e| e.0);
    out.write_all(&(idf.len() as u32).to_le_bytes())?;
    for (b, v) in idf {
        out.write_all(&b.to_le_bytes())?;
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

struct LeReader<R>(R);

impl<R: Read> LeReader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], ClassifierError> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => {
                ClassifierError::Format("file is truncated".into())
            }
            _ => ClassifierError::Io(e),
        })?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32, ClassifierError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64, ClassifierError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn read_classifier<R: Read>(input: R) -> Result<ClassifierModel, ClassifierError> {
    let mut r = LeReader(input);
    let magic: [u8; 5] = r.bytes()?;
    if &magic != MODEL_MAGIC {
        return Err(ClassifierError::Format(format!("bad magic {magic:?}")));
    }
    let buckets = r.u32()?;
    if buckets != BUCKETS {
        return Err(ClassifierError::Format(format!(
            "model has {buckets} buckets, expected {BUCKETS}"
        )));
    }
    let n = r.u32()? as usize;
    let mut entries = Vec::with_capacity(n.min(BUCKETS as usize));
    for _ in 0..n {
        let b = r.u32()?;
        let w = r.f64()?;
        if b >= BUCKETS || !w.is_finite() {
            return Err(ClassifierError::Format(format!(
                "bad weight entry ({b}, {w})"
            )));
        }
        if entries.last().is_some_and(|&(prev, _)| prev >= b) {
            return Err(ClassifierError::Format(
                "weight buckets not strictly increasing".into(),
            ));
        }
        entries.push((b, w));
    }
    let bias = r.f64()?;
    let threshold = r.f64()?;
    let secs = i64::from_le_bytes(r.bytes()?);
    let n_pos = r.u32()?;
    let n_neg = r.u32()?;
    if !bias.is_finite() || !threshold.is_finite() || n_pos == 0 || n_neg == 0 {
        return Err(ClassifierError::Format("invalid header values".into()));
    }
    let n_docs = r.u32()?;
    let n_idf = r.u32()? as usize;
    let mut table = HashMap::with_capacity(n_idf.min(BUCKETS as usize));
    for _ in 0..n_idf {
        let b = r.u32()?;
        table.insert(b, r.f64()?);
    }
    let mut rest = [0u8; 1];
    if r.0.read(&mut rest)? != 0 {
        return Err(ClassifierError::Format("trailing bytes".into()));
    }
    let trained_at = Utc
        .timestamp_opt(secs, 0)
        .single()
        .ok_or_else(|| ClassifierError::Format(format!("bad timestamp {secs}")))?;
    Ok(ClassifierModel {
        weights: SparseVector { entries },
        bias,
        idf: Idf { n_docs, table },
        threshold,
        trained_at,
        n_pos,
        n_neg,
    })
}

pub fn save_classifier(m: &ClassifierModel, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    write_classifier(m, BufWriter::new(File::create(path)?))
}

pub fn load_classifier(path: impl AsRef<Path>) -> Result<ClassifierModel, ClassifierError> {
    read_classifier(BufReader::new(File::open(path)?))
}

/// Reads `pos/*.txt` and `neg/*.txt` from a directory (sorted by file name)
/// or a JSON-lines file of `{url, text, label}` objects.
pub fn load_examples(path: &Path) -> Result<Vec<LabeledExample>, ClassifierError> {
    if path.is_dir() {
        let mut out = Vec::new();
        for (sub, label) in [("pos", Label::Positive), ("neg", Label::Negative)] {
            let dir = path.join(sub);
            let mut files: Vec<_> = std::fs::read_dir(&dir)
                .map_err(|e| ClassifierError::Data(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            files.sort();
            for f in files {
                let text = std::fs::read_to_string(&f)?;
                out.push(LabeledExample {
                    url: f.display().to_string(),
                    text,
                    label,
                });
            }
        }
        return Ok(out);
    }
    let file = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: LabeledExample = serde_json::from_str(&line)
            .map_err(|e| ClassifierError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(ex);
    }
    Ok(out)
}

pub fn write_examples_jsonl<W: Write>(
    examples: &[LabeledExample],
    mut out: W,
) -> std::io::Result<()> {
    for e in examples {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
