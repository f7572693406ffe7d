//! Q&A dump ingestion, text normalization and multi-word expression merging.

mod dump;
mod normalize;
mod phrases;

pub use dump::{
    parse_dump, parse_dump_dir, split_tags, CorpusPost, DumpError, DumpParse, PostKind,
};
pub use normalize::{normalize, URL_TOKEN, USER_TOKEN};
pub use phrases::{
    build_phrase_table, mwe_token, split_phrase, tokenize_mwe, ForcedPhrases, PhraseTable,
    DEFAULT_DELTA, DEFAULT_THRESHOLD,
};
