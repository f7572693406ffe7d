//! Distributional term vectors: skip-gram training, lookup, cosine
//! similarity and nearest-neighbour queries.

mod io;
mod train;

use std::collections::HashMap;

pub use io::{load_model, read_model, save_model, write_model, write_text, MAGIC};
pub use train::{
    pair_coefficient, pair_loss, sgns_gradient, train_skipgram, Hyperparams, SgnsGradient,
    TrainingReport,
};

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("corpus has no tokens meeting min_count")]
    EmptyCorpus,
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("non-finite value in vector for {0:?}")]
    NonFinite(String),
    #[error("vector for {term:?} has {got} dimensions, expected {expected}")]
    Dimension {
        term: String,
        got: usize,
        expected: usize,
    },
    #[error("duplicate term {0:?}")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermVector {
    pub term: String,
    pub values: Vec<f64>,
}

/// Term table plus a `|V| x d` row-major matrix of input vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    terms: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    norms: Vec<f64>,
    hyper: Hyperparams,
}

pub enum Query<'a> {
    Term(&'a str),
    Vector(&'a [f64]),
}

impl EmbeddingModel {
    /// Builds a model from explicit vectors (toy models, loaded files).
    pub fn from_vectors<I, S>(dim: usize, rows: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        if dim == 0 {
            return Err(EmbeddingError::Config("dimension must be positive".into()));
        }
        let mut terms = Vec::new();
        let mut index = HashMap::new();
        let mut vectors = Vec::new();
        for (term, values) in rows {
            let term = term.into();
            if values.len() != dim {
                return Err(EmbeddingError::Dimension {
                    term,
                    got: values.len(),
                    expected: dim,
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::NonFinite(term));
            }
            if index.insert(term.clone(), terms.len()).is_some() {
                return Err(EmbeddingError::Duplicate(term));
            }
            terms.push(term);
            vectors.extend(values);
        }
        let norms = vectors.chunks(dim).map(norm).collect();
        Ok(Self {
            dim,
            terms,
            index,
            vectors,
            norms,
            hyper: Hyperparams {
                dim,
                ..Hyperparams::default()
            },
        })
    }

    pub(crate) fn with_hyper(mut self, hyper: Hyperparams) -> Self {
        self.hyper = hyper;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    /// Input vector of an in-vocabulary term; `None` for anything else.
    pub fn vector(&self, term: &str) -> Option<&[f64]> {
        self.index.get(term).map(|&i| self.row(i))
    }

    pub fn term_vector(&self, term: &str) -> Option<TermVector> {
        self.vector(term).map(|v| TermVector {
            term: term.to_string(),
            values: v.to_vec(),
        })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Every vector multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let vectors: Vec<f64> = self.vectors.iter().map(|v| v * c).collect();
        let norms = vectors.chunks(self.dim).map(norm).collect();
        Self {
            vectors,
            norms,
            ..self.clone()
        }
    }

    /// The `n` most similar terms by cosine, best first, ties broken by term.
    /// Querying by term excludes the term itself; an unknown term gives `None`.
    pub fn nearest(&self, query: Query<'_>, n: usize) -> Option<Vec<(String, f64)>> {
        let (q, skip) = match query {
            Query::Term(t) => {
                let i = *self.index.get(t)?;
                (self.row(i), Some(i))
            }
            Query::Vector(v) => (v, None),
        };
        let qn = norm(q);
        let mut scored: Vec<(usize, f64)> = (0..self.terms.len())
            .filter(|&i| Some(i) != skip)
            .map(|i| {
                let denom = qn * self.norms[i];
                let sim = if denom > 0.0 {
                    (dot(q, self.row(i)) / denom).clamp(-1.0, 1.0)
                } else {
                    0.0
                };
                (i, sim)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.terms[a.0].cmp(&self.terms[b.0]))
        });
        scored.truncate(n);
        Some(
            scored
                .into_iter()
                .map(|(i, s)| (self.terms[i].clone(), s))
                .collect(),
        )
    }

    pub fn nearest_to_term(&self, term: &str, n: usize) -> Option<Vec<(String, f64)>> {
        self.nearest(Query::Term(term), n)
    }

    pub(crate) fn raw_vectors(&self) -> &[f64] {
        &self.vectors
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity together with whether an operand was the zero vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine {
    pub value: f64,
    pub degenerate: bool,
}

/// `a.b / (|a||b|)`, clamped to [-1, 1]. A zero operand yields 0 with
/// `degenerate` set.
pub fn cosine_checked(a: &[f64], b: &[f64]) -> Cosine {
    assert_eq!(
        a.len(),
        b.len(),
        "cosine of vectors with different dimensions"
    );
    let denom = norm(a) * norm(b);
    if denom == 0.0 || !denom.is_finite() {
        return Cosine {
            value: 0.0,
            degenerate: true,
        };
    }
    Cosine {
        value: (dot(a, b) / denom).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    cosine_checked(a, b).value
}
