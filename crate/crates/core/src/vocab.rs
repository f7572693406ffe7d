//! Topic vocabulary: user tags expanded with their nearest latent-space terms.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingModel;
use crate::preprocess::mwe_token;

pub const VOCAB_VERSION: u32 = 1;
pub const DEFAULT_NEIGHBORS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Seed,
    Neighbor { source_tag: String, rank: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicVocabulary {
    pub topic_name: String,
    pub n: usize,
    seed_tags: Vec<String>,
    terms: BTreeMap<String, Provenance>,
}

#[derive(Debug, thiserror::Error)]
pub enum VocabError {
    #[error("no tags given; a topic needs at least one")]
    NoTags,
    #[error("unsupported vocabulary version {found} (expected {VOCAB_VERSION})")]
    Version { found: u32 },
    #[error("invalid vocabulary file: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TopicVocabulary {
    /// A vocabulary of seed terms only (`N = 0`).
    pub fn from_terms<I, S>(topic_name: &str, terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Self {
            topic_name: topic_name.to_string(),
            n: 0,
            seed_tags: Vec::new(),
            terms: BTreeMap::new(),
        };
        for t in terms {
            v.add_seed(mwe_token(t.as_ref()));
        }
        v
    }

    fn add_seed(&mut self, tag: String) {
        if tag.is_empty() || self.terms.contains_key(&tag) {
            return;
        }
        self.terms.insert(tag.clone(), Provenance::Seed);
        self.seed_tags.push(tag);
    }

    pub fn seed_tags(&self) -> &[String] {
        &self.seed_tags
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains_key(term)
    }

    pub fn provenance(&self, term: &str) -> Option<&Provenance> {
        self.terms.get(term)
    }

    /// Terms in canonical (sorted) order.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Provenance)> {
        self.terms.iter().map(|(k, v)| (k.as_str(), v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocabBuild {
    pub vocabulary: TopicVocabulary,
    /// Tags absent from the model; kept as seeds without neighbours.
    pub oov_tags: Vec<String>,
}

/// Tags plus each tag's `n` nearest terms. Multi-word tags are looked up
/// as their merged token (`ip spoofing` -> `ip_spoofing`). A term reached
/// twice keeps its first provenance: seeds first, then tags in input order,
/// neighbours by rank.
pub fn build_vocabulary<S: AsRef<str>>(
    topic_name: &str,
    tags: &[S],
    model: &EmbeddingModel,
    n: usize,
) -> Result<VocabBuild, VocabError> {
    let mut vocab = TopicVocabulary::from_terms(topic_name, tags);
    if vocab.is_empty() {
        return Err(VocabError::NoTags);
    }
    vocab.n = n;
    let mut oov_tags = Vec::new();
    for tag in vocab.seed_tags.clone() {
        let Some(neighbours) = model.nearest_to_term(&tag, n) else {
            log::warn!("tag {tag:?} is not in the embedding model; no neighbours added");
            oov_tags.push(tag);
            continue;
        };
        for (i, (term, _)) in neighbours.into_iter().enumerate() {
            vocab
                .terms
                .entry(term)
                .or_insert_with(|| Provenance::Neighbor {
                    source_tag: tag.clone(),
                    rank: i + 1,
                });
        }
    }
    Ok(VocabBuild {
        vocabulary: vocab,
        oov_tags,
    })
}

#[derive(Serialize, Deserialize)]
struct FileTerm {
    term: String,
    provenance: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    source_tag: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    rank: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct FileVocab {
    version: u32,
    topic_name: String,
    #[serde(rename = "N")]
    n: usize,
    #[serde(default)]
    seed_tags: Vec<String>,
    terms: Vec<FileTerm>,
}

pub fn write_vocabulary<W: Write>(v: &TopicVocabulary, mut out: W) -> Result<(), VocabError> {
    let file = FileVocab {
        version: VOCAB_VERSION,
        topic_name: v.topic_name.clone(),
        n: v.n,
        seed_tags: v.seed_tags.clone(),
        terms: v
            .terms
            .iter()
            .map(|(term, p)| match p {
                Provenance::Seed => FileTerm {
                    term: term.clone(),
                    provenance: "seed".into(),
                    source_tag: None,
                    rank: None,
                },
                Provenance::Neighbor { source_tag, rank } => FileTerm {
                    term: term.clone(),
                    provenance: "neighbor".into(),
                    source_tag: Some(source_tag.clone()),
                    rank: Some(*rank),
                },
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut out, &file)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_vocabulary<R: Read>(input: R) -> Result<TopicVocabulary, VocabError> {
    let value: serde_json::Value = serde_json::from_reader(input)?;
    let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != VOCAB_VERSION {
        return Err(VocabError::Version { found });
    }
    let file: FileVocab = serde_json::from_value(value)?;
    let mut terms = BTreeMap::new();
    for t in file.terms {
        let p = match (t.provenance.as_str(), t.source_tag, t.rank) {
            ("seed", _, _) => Provenance::Seed,
            ("neighbor", Some(source_tag), Some(rank)) => {
                if rank == 0 || rank > file.n {
                    return Err(VocabError::Invalid(format!(
                        "rank {rank} of {:?} outside 1..={}",
                        t.term, file.n
                    )));
                }
                Provenance::Neighbor { source_tag, rank }
            }
            (other, _, _) => {
                return Err(VocabError::Invalid(format!(
                    "bad provenance {other:?} for {:?}",
                    t.term
                )));
            }
        };
        if terms.insert(t.term.clone(), p).is_some() {
            return Err(VocabError::Invalid(format!("duplicate term {:?}", t.term)));
        }
    }
    let mut seed_tags = file.seed_tags;
    if seed_tags.is_empty() {
        seed_tags = terms
            .iter()
            .filter(|(_, p)| **p == Provenance::Seed)
            .map(|(t, _)| t.clone())
            .collect();
    }
    if let Some(missing) = seed_tags
        .iter()
        .find(|s| terms.get(*s) != Some(&Provenance::Seed))
    {
        return Err(VocabError::Invalid(format!(
            "seed tag {missing:?} has no seed entry"
        )));
    }
    Ok(TopicVocabulary {
        topic_name: file.topic_name,
        n: file.n,
        seed_tags,
        terms,
    })
}

pub fn save_vocabulary(v: &TopicVocabulary, path: impl AsRef<Path>) -> Result<(), VocabError> {
    write_vocabulary(v, BufWriter::new(File::create(path)?))
}

pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<TopicVocabulary, VocabError> {
    read_vocabulary(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> EmbeddingModel {
        EmbeddingModel::from_vectors(
            2,
            vec![
                ("ddos", vec![1.0, 0.0]),
                ("dos", vec![0.9, 0.1]),
                ("flood", vec![0.8, 0.3]),
                ("botnet", vec![0.5, 0.5]),
                ("mirai", vec![0.3, 0.8]),
                ("ip_spoofing", vec![0.7, -0.2]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn n_zero_is_tags() {
        let v = build_vocabulary("t", &["ddos", "IP Spoofing"], &model(), 0)
            .unwrap()
            .vocabulary;
        assert_eq!(v.terms().collect::<Vec<_>>(), vec!["ddos", "ip_spoofing"]);
    }

    #[test]
    fn shared_neighbour_once_with_first_provenance() {
        let b = build_vocabulary("t", &["ddos", "mirai"], &model(), 3).unwrap();
        let v = b.vocabulary;
        assert!(v.len() <= 2 * 4);
        assert_eq!(
            v.provenance("dos"),
            Some(&Provenance::Neighbor {
                source_tag: "ddos".into(),
                rank: 1
            })
        );
        assert_eq!(v.provenance("mirai"), Some(&Provenance::Seed));
        assert!(b.oov_tags.is_empty());
    }

    #[test]
    fn oov_and_empty_tags() {
        let b = build_vocabulary("t", &["ransomware"], &model(), 5).unwrap();
        assert_eq!(b.oov_tags, vec!["ransomware"]);
        assert_eq!(b.vocabulary.len(), 1);
        let none: [&str; 0] = [];
        assert!(matches!(
            build_vocabulary("t", &none, &model(), 5),
            Err(VocabError::NoTags)
        ));
    }

    #[test]
    fn round_trip_and_canonical_bytes() {
        let v = build_vocabulary("ddos", &["ddos", "mirai"], &model(), 2)
            .unwrap()
            .vocabulary;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_vocabulary(&v, &mut a).unwrap();
        write_vocabulary(&v, &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(read_vocabulary(a.as_slice()).unwrap(), v);
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.contains("\"N\": 2"));
        assert!(read_vocabulary(&a[..a.len() / 2]).is_err());
        let bumped = text.replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            read_vocabulary(bumped.as_bytes()),
            Err(VocabError::Version { found: 9 })
        ));
    }
}
