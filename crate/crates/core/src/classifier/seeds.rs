//! Seed discovery: search, classify the hits, refine the query from what
//! was accepted.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Duration;

use url::Url;

use super::features::{featurize_with, tokenize, Fnv1a, Idf, SparseVector};
use super::ClassifierModel;
use crate::canonical::canonical;

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("search backend failed: {0}")]
    Backend(String),
    #[error("could not fetch {url}: {reason}")]
    Fetch { url: String, reason: String },
}

/// `(query) -> ranked URL list`.
pub trait SearchBackend {
    fn search(&self, query: &str) -> Result<Vec<Url>, SearchError>;
}

/// Text of a search hit.
pub trait PageSource {
    fn fetch_text(&self, url: &Url) -> Result<String, SearchError>;
}

/// In-memory TF-IDF index over a fixed set of pages. Serves both as a
/// search backend and as the page source for its own hits.
#[derive(Clone)]
pub struct LocalIndex {
    docs: Vec<(Url, String, SparseVector)>,
    idf: Idf,
    max_results: usize,
}

impl LocalIndex {
    pub fn new(pages: impl IntoIterator<Item = (Url, String)>) -> Self {
        let pages: Vec<(Url, String)> = pages.into_iter().map(|(u, t)| (canonical(u), t)).collect();
        let texts: Vec<&str> = pages.iter().map(|(_, t)| t.as_str()).collect();
        let idf = Idf::fit(&Fnv1a, &texts);
        let docs = pages
            .into_iter()
            .map(|(u, t)| {
                let v = featurize_with(&Fnv1a, &idf, &t);
                (u, t, v)
            })
            .collect();
        Self {
            docs,
            idf,
            max_results: 50,
        }
    }

    pub fn with_max_results(mut self, n: usize) -> Self {
        self.max_results = n;
        self
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

impl SearchBackend for LocalIndex {
    /// Pages with positive cosine to the query, best first, ties by URL.
    fn search(&self, query: &str) -> Result<Vec<Url>, SearchError> {
        let q = featurize_with(&Fnv1a, &self.idf, query);
        let mut hits: Vec<(f64, &Url)> = self
            .docs
            .iter()
            .map(|(u, _, v)| (v.dot(&q), u))
            .filter(|(s, _)| *s > 0.0)
            .collect();
        hits.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| a.1.as_str().cmp(b.1.as_str()))
        });
        Ok(hits
            .into_iter()
            .take(self.max_results)
            .map(|(_, u)| u.clone())
            .collect())
    }
}

impl PageSource for LocalIndex {
    fn fetch_text(&self, url: &Url) -> Result<String, SearchError> {
        let url = canonical(url.clone());
        self.docs
            .iter()
            .find(|(u, _, _)| *u == url)
            .map(|(_, t, _)| t.clone())
            .ok_or_else(|| SearchError::Fetch {
                url: url.to_string(),
                reason: "not in index".into(),
            })
    }
}

/// Operator-configured web search endpoint. `template` contains `{query}`,
/// replaced by the URL-encoded query. The response is JSON: either a list
/// of URL strings or `{"results": [...]}` whose items are URL strings or
/// objects with a `url` field.
pub struct HttpSearchBackend {
    template: String,
    client: reqwest::blocking::Client,
}

impl HttpSearchBackend {
    pub fn new(template: &str, user_agent: &str) -> Result<Self, SearchError> {
        if !template.contains("{query}") {
            return Err(SearchError::Backend(format!(
                "endpoint template {template:?} lacks {{query}}"
            )));
        }
        let client = reqwest::blocking::Client::builder()
            .user_agent(user_agent)
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| SearchError::Backend(e.to_string()))?;
        Ok(Self {
            template: template.to_string(),
            client,
        })
    }
}

fn encode_query(q: &str) -> String {
    url::form_urlencoded::byte_serialize(q.as_bytes()).collect()
}

pub(crate) fn urls_from_json(value: &serde_json::Value) -> Vec<Url> {
    let items = match value {
        serde_json::Value::Array(a) => a.as_slice(),
        serde_json::Value::Object(o) => o
            .get("results")
            .and_then(|r| r.as_array())
            .map(Vec::as_slice)
            .unwrap_or(&[]),
        _ => &[],
    };
    items
        .iter()
        .filter_map(|i| match i {
            serde_json::Value::String(s) => Some(s.as_str()),
            serde_json::Value::Object(o) => o.get("url").and_then(|u| u.as_str()),
            _ => None,
        })
        .filter_map(|s| crate::canonical::canonicalize(s).ok())
        .collect()
}

impl SearchBackend for HttpSearchBackend {
    fn search(&self, query: &str) -> Result<Vec<Url>, SearchError> {
        let url = self.template.replace("{query}", &encode_query(query));
        let resp = self
            .client
            .get(&url)
            .send()
            .map_err(|e| SearchError::Backend(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(SearchError::Backend(format!("HTTP {}", resp.status())));
        }
        let value: serde_json::Value = resp
            .json()
            .map_err(|e| SearchError::Backend(e.to_string()))?;
        Ok(urls_from_json(&value))
    }
}

/// Fetches hits over HTTP and extracts their text.
pub struct HttpPageSource {
    client: reqwest::blocking::Client,
}

impl HttpPageSource {
    pub fn new(user_agent: &str) -> Result<Self, SearchError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(user_agent)
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| SearchError::Backend(e.to_string()))?;
        Ok(Self { client })
    }
}

impl PageSource for HttpPageSource {
    fn fetch_text(&self, url: &Url) -> Result<String, SearchError> {
        let fail = |reason: String| SearchError::Fetch {
            url: url.to_string(),
            reason,
        };
        let resp = self
            .client
            .get(url.as_str())
            .send()
            .map_err(|e| fail(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(fail(format!("HTTP {}", resp.status())));
        }
        let body = resp.bytes().map_err(|e| fail(e.to_string()))?;
        Ok(crate::parser::parse_html(&body, url).text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedLimits {
    pub max_seeds: usize,
    pub max_iters: usize,
    /// Terms in each refined query.
    pub query_terms: usize,
}

impl Default for SeedLimits {
    fn default() -> Self {
        Self {
            max_seeds: 21,
            max_iters: 5,
            query_terms: 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeedFindOutcome {
    pub seeds: Vec<Url>,
    pub queries: Vec<String>,
    pub warnings: Vec<String>,
    /// Every distinct hit examined.
    pub examined: usize,
}

/// Iterative seed search. Each round submits the current query, classifies
/// unseen hits and keeps the relevant ones; the next query is made of the
/// top TF-IDF terms of the pages accepted in that round (IDF over every
/// page examined so far). Stops at `max_seeds`, `max_iters`, a round with
/// no new seeds, or a repeated query. Backend failures end the search with
/// the seeds found so far and a warning.
pub fn seed_find(
    query: &str,
    model: &ClassifierModel,
    backend: &dyn SearchBackend,
    pages: &dyn PageSource,
    limits: SeedLimits,
) -> SeedFindOutcome {
    let mut out = SeedFindOutcome::default();
    let mut seen: HashSet<Url> = HashSet::new();
    let mut tried: HashSet<String> = HashSet::new();
    let mut doc_freq: HashMap<String, usize> = HashMap::new();
    let mut n_docs = 0usize;
    let mut query = query.trim().to_string();
    if limits.max_seeds == 0 {
        return out;
    }
    for _ in 0..limits.max_iters {
        if !tried.insert(query.clone()) {
            break;
        }
        out.queries.push(query.clone());
        let hits = match backend.search(&query) {
            Ok(h) => h,
            Err(e) => {
                log::warn!("{e}");
                out.warnings.push(e.to_string());
                break;
            }
        };
        let mut accepted: Vec<Vec<String>> = Vec::new();
        for url in hits {
            if !seen.insert(url.clone()) {
                continue;
            }
            out.examined += 1;
            let text = match pages.fetch_text(&url) {
                Ok(t) => t,
                Err(e) => {
                    log::warn!("{e}");
                    out.warnings.push(e.to_string());
                    continue;
                }
            };
            let tokens = tokenize(&text);
            n_docs += 1;
            let unique: HashSet<&String> = tokens.iter().collect();
            for t in unique {
                *doc_freq.entry(t.clone()).or_default() += 1;
            }
            if model.classify(&text).relevant {
                out.seeds.push(url);
                accepted.push(tokens);
                if out.seeds.len() >= limits.max_seeds {
                    return out;
                }
            }
        }
        if accepted.is_empty() {
            break;
        }
        query = top_terms(&accepted, &doc_freq, n_docs, limits.query_terms).join(" ");
        if query.is_empty() {
            break;
        }
    }
    out
}

fn top_terms(
    docs: &[Vec<String>],
    doc_freq: &HashMap<String, usize>,
    n_docs: usize,
    k: usize,
) -> Vec<String> {
    let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs {
        for t in d {
            if t.chars().count() >= 3 && !t.chars().all(|c| c.is_ascii_digit()) {
                *tf.entry(t.as_str()).or_default() += 1;
            }
        }
    }
    let mut scored: Vec<(f64, &str)> = tf
        .into_iter()
        .map(|(t, c)| {
            let df = doc_freq.get(t).copied().unwrap_or(0);
            (
                c as f64 * (((1 + n_docs) as f64 / (1 + df) as f64).ln() + 1.0),
                t,
            )
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored
        .into_iter()
        .take(k)
        .map(|(_, t)| t.to_string())
        .collect()
}
