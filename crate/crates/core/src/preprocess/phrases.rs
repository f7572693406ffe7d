//! Bigram collocations scored with the word2phrase count formula.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseTable {
    pairs: BTreeMap<(String, String), f64>,
    pub threshold: f64,
    pub delta: f64,
}

pub const DEFAULT_THRESHOLD: f64 = 10.0;
pub const DEFAULT_DELTA: f64 = 5.0;

impl PhraseTable {
    pub fn empty() -> Self {
        Self {
            pairs: BTreeMap::new(),
            threshold: DEFAULT_THRESHOLD,
            delta: DEFAULT_DELTA,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn score(&self, a: &str, b: &str) -> Option<f64> {
        self.pairs.get(&(a.to_string(), b.to_string())).copied()
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        self.pairs.contains_key(&(a.to_string(), b.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.pairs
            .iter()
            .map(|((a, b), s)| (a.as_str(), b.as_str(), *s))
    }

    pub fn insert(&mut self, a: &str, b: &str, score: f64) {
        self.pairs.insert((a.to_string(), b.to_string()), score);
    }

    /// `token_a\ttoken_b\tscore` lines, preceded by a `#` line with the
    /// threshold and discount.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# threshold={} delta={}", self.threshold, self.delta)?;
        for ((a, b), s) in &self.pairs {
            writeln!(out, "{a}\t{b}\t{s}")?;
        }
        out.flush()
    }

    pub fn read_tsv<R: BufRead>(input: R) -> std::io::Result<Self> {
        let bad = |line: &str| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("bad phrase line {line:?}"),
            )
        };
        let mut table = Self::empty();
        for line in input.lines() {
            let line = line?;
            if let Some(header) = line.strip_prefix('#') {
                for kv in header.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("threshold", v)) => {
                            table.threshold = v.parse().map_err(|_| bad(&line))?
                        }
                        Some(("delta", v)) => table.delta = v.parse().map_err(|_| bad(&line))?,
                        _ => {}
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(s), None) => {
                    table.insert(a, b, s.parse().map_err(|_| bad(&line))?);
                }
                _ => return Err(bad(&line)),
            }
        }
        Ok(table)
    }
}

/// Scores every adjacent pair inside each sentence:
/// `(count(ab) - delta) * V / (count(a) * count(b))`, where `V` is the number
/// of distinct tokens, and keeps pairs scoring strictly above `threshold`.
pub fn build_phrase_table(corpus: &[Vec<String>], threshold: f64, delta: f64) -> PhraseTable {
    let mut unigrams: HashMap<&str, u64> = HashMap::new();
    let mut bigrams: HashMap<(&str, &str), u64> = HashMap::new();
    for sentence in corpus {
        for tok in sentence {
            *unigrams.entry(tok.as_str()).or_default() += 1;
        }
        for w in sentence.windows(2) {
            *bigrams.entry((w[0].as_str(), w[1].as_str())).or_default() += 1;
        }
    }
    let vocab = unigrams.len() as f64;
    let mut pairs = BTreeMap::new();
    for ((a, b), ab) in bigrams {
        let score = (ab as f64 - delta) * vocab / (unigrams[a] as f64 * unigrams[b] as f64);
        if score > threshold {
            pairs.insert((a.to_string(), b.to_string()), score);
        }
    }
    PhraseTable {
        pairs,
        threshold,
        delta,
    }
}

/// Forced multi-word phrases (user tags such as `ip spoofing`), longest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForcedPhrases {
    phrases: Vec<Vec<String>>,
}

impl ForcedPhrases {
    pub fn new<I, S>(phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut phrases: Vec<Vec<String>> = phrases
            .into_iter()
            .map(|p| split_phrase(p.as_ref()))
            .filter(|p| p.len() >= 2)
            .collect();
        phrases.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        phrases.dedup();
        Self { phrases }
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    fn longest_at(&self, tokens: &[&str]) -> Option<usize> {
        self.phrases
            .iter()
            .find(|p| p.len() <= tokens.len() && p.iter().zip(tokens).all(|(a, b)| a == b))
            .map(Vec::len)
    }
}

/// Splits a tag or vocabulary term into its words: `ip-spoofing`,
/// `ip_spoofing` and `ip spoofing` all give `[ip, spoofing]`.
pub fn split_phrase(p: &str) -> Vec<String> {
    p.split(|c: char| c.is_whitespace() || c == '_' || c == '-')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Joined MWE token for a phrase (`ip spoofing` -> `ip_spoofing`).
pub fn mwe_token(p: &str) -> String {
    split_phrase(p).join("_")
}

/// Single greedy left-to-right merging pass over whitespace tokens. A forced
/// phrase starting at the current position wins (longest first); otherwise an
/// adjacent pair in the table is merged as `a_b`. Merged tokens are not
/// merged again.
pub fn tokenize_mwe(text: &str, table: &PhraseTable, forced: &ForcedPhrases) -> Vec<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if let Some(n) = forced.longest_at(&tokens[i..]) {
            out.push(tokens[i..i + n].join("_"));
            i += n;
        } else if i + 1 < tokens.len() && table.contains(tokens[i], tokens[i + 1]) {
            out.push(format!("{}_{}", tokens[i], tokens[i + 1]));
            i += 2;
        } else {
            out.push(tokens[i].to_string());
            i += 1;
        }
    }
    out
}
