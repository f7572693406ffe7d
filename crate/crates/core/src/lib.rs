//! Threat-intelligence harvesting: a focused crawler with a page
//! classifier, an embedding-based relevance ranker, and a judgment service.

pub mod canonical;
pub mod classifier;
pub mod crawler;
pub mod embeddings;
pub mod fixtures;
pub mod parser;
pub mod preprocess;
pub mod ranker;
pub mod service;
pub mod store;
pub mod vocab;

pub use classifier::{ClassifierModel, Label, LabeledExample};
pub use embeddings::{EmbeddingModel, TermVector};
pub use parser::{MetadataRule, ParsedPage};
pub use preprocess::{CorpusPost, PhraseTable};
pub use ranker::{HighlightSpan, MatchedTerm, RelevanceResult};
pub use store::{DocumentRecord, JudgmentRecord, SourceClass, Store};
pub use vocab::TopicVocabulary;
