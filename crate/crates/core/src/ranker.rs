//! Relevance of documents to a topic vocabulary in embedding space.
//!
//! The topic vector `T` is the plain sum of the vocabulary vectors. A post
//! vector `P` sums the vectors of the post's vocabulary tokens (every
//! occurrence), each weighted by its cosine to `T`. The score is
//! `r = cos(T, P)`, with `r = 0` when `P` is the zero vector.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::classifier::{Label, LabeledExample};
use crate::embeddings::{cosine_checked, EmbeddingModel};
use crate::preprocess::{normalize, split_phrase, tokenize_mwe, ForcedPhrases, PhraseTable};
use crate::store::{DocStatus, Store, StoreError};
use crate::vocab::TopicVocabulary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedTerm {
    pub term: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceResult {
    pub doc_id: String,
    #[serde(default)]
    pub url: String,
    pub r: f64,
    pub matched_terms: Vec<MatchedTerm>,
    pub vocab_token_count: usize,
    pub total_token_count: usize,
}

/// The JSON-lines shape of a ranked document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedLine {
    pub doc_id: String,
    pub url: String,
    pub r: f64,
    pub matched_terms: Vec<MatchedTerm>,
}

impl From<&RelevanceResult> for RankedLine {
    fn from(r: &RelevanceResult) -> Self {
        Self {
            doc_id: r.doc_id.clone(),
            url: r.url.clone(),
            r: r.r,
            matched_terms: r.matched_terms.clone(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RankError {
    #[error("no vocabulary term has a vector in the model")]
    NoTermsInModel,
    #[error("topic vector is zero; vocabulary vectors cancel out")]
    ZeroTopic,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// `T = sum of vector(t)` over vocabulary terms in the model. Terms without
/// a vector are skipped with a warning.
pub fn topic_vector(
    vocab: &TopicVocabulary,
    model: &EmbeddingModel,
) -> Result<Vec<f64>, RankError> {
    let mut t = vec![0.0; model.dim()];
    let mut found = 0;
    for term in vocab.terms() {
        match model.vector(term) {
            Some(v) => {
                found += 1;
                t.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            }
            None => log::warn!("vocabulary term {term:?} has no vector; skipped"),
        }
    }
    if found == 0 {
        return Err(RankError::NoTermsInModel);
    }
    Ok(t)
}

/// `P = sum of cos(w, T) * w` over token occurrences in the vocabulary and
/// the model.
pub fn post_vector<S: AsRef<str>>(
    tokens: &[S],
    vocab: &TopicVocabulary,
    model: &EmbeddingModel,
    topic: &[f64],
) -> Result<Vec<f64>, RankError> {
    if topic.iter().all(|&x| x == 0.0) {
        return Err(RankError::ZeroTopic);
    }
    let mut p = vec![0.0; model.dim()];
    for tok in tokens {
        let tok = tok.as_ref();
        if !vocab.contains(tok) {
            continue;
        }
        if let Some(w) = model.vector(tok) {
            let weight = cosine_checked(w, topic).value;
            p.iter_mut().zip(w).for_each(|(a, b)| *a += weight * b);
        }
    }
    Ok(p)
}

/// Scores one token sequence against a vocabulary.
pub fn relevance<S: AsRef<str>>(
    tokens: &[S],
    vocab: &TopicVocabulary,
    model: &EmbeddingModel,
) -> Result<RelevanceResult, RankError> {
    Ok(Scorer::new(vocab, model)?.score("", "", tokens))
}

/// Topic state precomputed once for scoring many documents.
pub struct Scorer<'a> {
    vocab: &'a TopicVocabulary,
    model: &'a EmbeddingModel,
    topic: Vec<f64>,
    weights: HashMap<&'a str, f64>,
    phrases: PhraseTable,
    forced: ForcedPhrases,
}

impl<'a> Scorer<'a> {
    pub fn new(vocab: &'a TopicVocabulary, model: &'a EmbeddingModel) -> Result<Self, RankError> {
        let topic = topic_vector(vocab, model)?;
        if topic.iter().all(|&x| x == 0.0) {
            return Err(RankError::ZeroTopic);
        }
        let weights = vocab
            .terms()
            .filter_map(|t| {
                model
                    .vector(t)
                    .map(|w| (t, cosine_checked(w, &topic).value))
            })
            .collect();
        let forced = ForcedPhrases::new(vocab.terms().filter(|t| t.contains('_')));
        Ok(Self {
            vocab,
            model,
            topic,
            weights,
            phrases: PhraseTable::empty(),
            forced,
        })
    }

    /// Phrase table used when tokenizing raw document text.
    pub fn with_phrases(mut self, phrases: PhraseTable) -> Self {
        self.phrases = phrases;
        self
    }

    pub fn topic(&self) -> &[f64] {
        &self.topic
    }

    /// Normalization followed by MWE merging; multi-word vocabulary terms
    /// are always merged.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        tokenize_mwe(&normalize(text), &self.phrases, &self.forced)
    }

    pub fn score<S: AsRef<str>>(&self, doc_id: &str, url: &str, tokens: &[S]) -> RelevanceResult {
        let mut p = vec![0.0; self.model.dim()];
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for tok in tokens {
            let Some((&term, &weight)) = self.weights.get_key_value(tok.as_ref()) else {
                continue;
            };
            let w = self
                .model
                .vector(term)
                .expect("weighted terms have vectors");
            p.iter_mut().zip(w).for_each(|(a, b)| *a += weight * b);
            *counts.entry(term).or_default() += 1;
        }
        debug_assert!(counts.keys().all(|t| self.vocab.contains(t)));
        let r = cosine_checked(&self.topic, &p).value;
        let vocab_token_count = counts.values().sum();
        RelevanceResult {
            doc_id: doc_id.to_string(),
            url: url.to_string(),
            r,
            matched_terms: counts
                .into_iter()
                .map(|(term, count)| MatchedTerm {
                    term: term.to_string(),
                    count,
                })
                .collect(),
            vocab_token_count,
            total_token_count: tokens.len(),
        }
    }

    pub fn score_text(&self, doc_id: &str, url: &str, text: &str) -> RelevanceResult {
        self.score(doc_id, url, &self.tokenize(text))
    }
}

/// Sorts by `r` descending, ties by `doc_id`.
pub fn sort_results(results: &mut [RelevanceResult]) {
    results.sort_by(|a, b| b.r.total_cmp(&a.r).then_with(|| a.doc_id.cmp(&b.doc_id)));
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct RankOutcome {
    pub results: Vec<RelevanceResult>,
    /// Requested ids with no stored document.
    pub missing: Vec<String>,
}

/// Scores stored documents, persists each score (status becomes `ranked`)
/// and returns the results in rank order.
pub fn rank_corpus(
    store: &Store,
    doc_ids: &[String],
    scorer: &Scorer<'_>,
) -> Result<RankOutcome, RankError> {
    let mut out = RankOutcome::default();
    for id in doc_ids {
        let Some(doc) = store.get_document(id)? else {
            log::warn!("document {id} not found; skipped");
            out.missing.push(id.clone());
            continue;
        };
        if doc.status < DocStatus::Parsed {
            log::warn!("document {id} is not parsed yet; scoring empty text");
        }
        let result = scorer.score_text(&doc.doc_id, &doc.url, &doc.text);
        store.set_ranking(&doc.doc_id, result.r, &result.matched_terms)?;
        out.results.push(result);
    }
    sort_results(&mut out.results);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Threshold(f64),
    TopK(usize),
}

/// Anything carrying a document id and a relevance score.
pub trait Scored {
    fn doc_id(&self) -> &str;
    fn r(&self) -> f64;
}

impl Scored for RelevanceResult {
    fn doc_id(&self) -> &str {
        &self.doc_id
    }
    fn r(&self) -> f64 {
        self.r
    }
}

impl Scored for RankedLine {
    fn doc_id(&self) -> &str {
        &self.doc_id
    }
    fn r(&self) -> f64 {
        self.r
    }
}

/// Threshold keeps `r >= t`; top-k keeps the first `k` of the given
/// (ranked) order.
pub fn select<T: Scored + Clone>(results: &[T], mode: Selection) -> Vec<T> {
    match mode {
        Selection::Threshold(t) => results.iter().filter(|r| r.r() >= t).cloned().collect(),
        Selection::TopK(k) => results.iter().take(k).cloned().collect(),
    }
}

/// Classifier training examples from a ranked list: the first `top`
/// documents as positives, the last `bottom` as negatives. Documents with
/// empty text are skipped; a document is never used twice.
pub fn feedback_examples<T: Scored>(
    store: &Store,
    ranked: &[T],
    top: usize,
    bottom: usize,
) -> Result<Vec<LabeledExample>, RankError> {
    let top = top.min(ranked.len());
    let bottom = bottom.min(ranked.len() - top);
    let picks = ranked[..top].iter().map(|r| (r, Label::Positive)).chain(
        ranked[ranked.len() - bottom..]
            .iter()
            .map(|r| (r, Label::Negative)),
    );
    let mut out = Vec::new();
    for (r, label) in picks {
        let Some(doc) = store.get_document(r.doc_id())? else {
            continue;
        };
        if doc.text.trim().is_empty() {
            continue;
        }
        out.push(LabeledExample {
            url: doc.url,
            text: doc.text,
            label,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighlightSpan {
    pub start: usize,
    pub end: usize,
    pub term: String,
}

/// Case-insensitive whole-word occurrences of vocabulary terms in `text`.
/// Offsets count Unicode scalar values, `end` exclusive. Multi-word terms
/// match their words separated by whitespace or hyphens. Scanning is left
/// to right and the longest term starting at a word wins.
pub fn highlight<'a, I>(text: &str, terms: I) -> Vec<HighlightSpan>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut by_first: HashMap<String, Vec<(Vec<String>, &'a str)>> = HashMap::new();
    for term in terms {
        let words = split_phrase(term);
        if let Some(first) = words.first() {
            by_first
                .entry(first.clone())
                .or_default()
                .push((words, term));
        }
    }
    for list in by_first.values_mut() {
        list.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(b.1)));
    }

    let chars: Vec<char> = text.chars().collect();
    // Words as (start, end, lowercase); maximal alphanumeric runs.
    let mut words: Vec<(usize, usize, String)> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_alphanumeric() {
            let s = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            words.push((s, i, chars[s..i].iter().collect::<String>().to_lowercase()));
        } else {
            i += 1;
        }
    }
    let joinable =
        |a: usize, b: usize| a < b && chars[a..b].iter().all(|c| c.is_whitespace() || *c == '-');

    let mut spans = Vec::new();
    let mut w = 0;
    while w < words.len() {
        let found = by_first.get(&words[w].2).and_then(|cands| {
            cands.iter().find(|(parts, _)| {
                w + parts.len() <= words.len()
                    && parts.iter().enumerate().all(|(k, p)| {
                        *p == words[w + k].2
                            && (k == 0 || joinable(words[w + k - 1].1, words[w + k].0))
                    })
            })
        });
        match found {
            Some((parts, term)) => {
                let last = w + parts.len() - 1;
                spans.push(HighlightSpan {
                    start: words[w].0,
                    end: words[last].1,
                    term: term.to_string(),
                });
                w = last + 1;
            }
            None => w += 1,
        }
    }
    spans
}
