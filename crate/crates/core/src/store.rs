//! Embedded document store for harvested pages, ranking results and human
//! judgments.
//!
//! Backed by a single SQLite file (or an in-memory database in tests). Raw
//! HTML is deflate-compressed; the codec is recorded per row. All access goes
//! through one connection behind a mutex, which gives per-record
//! last-write-wins semantics for concurrent crawl workers and API handlers
//! sharing an `Arc<Store>`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canonical::{canonicalize, UrlError};
use crate::parser::ParsedPage;
use crate::ranker::MatchedTerm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceClass {
    Clear,
    Social,
    Dark,
}

impl SourceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Clear => "clear",
            Self::Social => "social",
            Self::Dark => "dark",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "clear" => Self::Clear,
            "social" => Self::Social,
            "dark" => Self::Dark,
            _ => return None,
        })
    }
}

/// Processing stage; only ever moves forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocStatus {
    Fetched,
    Parsed,
    Ranked,
}

impl DocStatus {
    fn code(self) -> i64 {
        self as i64
    }

    fn from_code(c: i64) -> Option<Self> {
        Some(match c {
            0 => Self::Fetched,
            1 => Self::Parsed,
            2 => Self::Ranked,
            _ => return None,
        })
    }
}

mod base64_bytes {
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        base64::engine::general_purpose::STANDARD
            .decode(s)
            .map_err(serde::de::Error::custom)
    }
}

/// One harvested page. `raw_html` is exported as base64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub url: String,
    pub source_class: SourceClass,
    pub fetched_at: DateTime<Utc>,
    #[serde(with = "base64_bytes")]
    pub raw_html: Vec<u8>,
    pub text: String,
    pub title: String,
    pub metadata: BTreeMap<String, String>,
    pub classifier_score: Option<f64>,
    pub relevance_score: Option<f64>,
    pub status: DocStatus,
}

impl DocumentRecord {
    /// A freshly fetched page with its id derived from URL and timestamp.
    pub fn fetched(
        url: &str,
        source_class: SourceClass,
        fetched_at: DateTime<Utc>,
        raw_html: Vec<u8>,
    ) -> std::result::Result<Self, UrlError> {
        let canonical = canonicalize(url)?;
        Ok(Self {
            doc_id: doc_id_for(canonical.as_str(), fetched_at),
            url: canonical.to_string(),
            source_class,
            fetched_at,
            raw_html,
            text: String::new(),
            title: String::new(),
            metadata: BTreeMap::new(),
            classifier_score: None,
            relevance_score: None,
            status: DocStatus::Fetched,
        })
    }
}

pub fn timestamp_string(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Lowercase hex SHA-256 over canonical URL followed by the RFC 3339 fetch time.
pub fn doc_id_for(canonical_url: &str, fetched_at: DateTime<Utc>) -> String {
    let mut h = Sha256::new();
    h.update(canonical_url.as_bytes());
    h.update(timestamp_string(fetched_at).as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub doc_id: String,
    pub judge_id: String,
    pub grade: u8,
    pub judged_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    MalformedUrl(#[from] UrlError),
    #[error("storage failure: {0}")]
    Storage(#[from] rusqlite::Error),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error("grade {0} outside 0..=3")]
    InvalidGrade(i64),
    #[error("status of {doc_id} cannot move from {from:?} to {to:?}")]
    StatusRegression {
        doc_id: String,
        from: DocStatus,
        to: DocStatus,
    },
    #[error("judgment by {judge_id} on {doc_id} is not later than the previous one")]
    StaleJudgment { doc_id: String, judge_id: String },
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("corrupt row: {0}")]
    Corrupt(String),
    #[error("serialization failure: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
}

impl StoreError {
    /// Storage-level failures (busy database, disk) are worth retrying.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Storage(_) | Self::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, StoreError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryOrder {
    Random,
    RelevanceDesc,
    #[default]
    FetchedAtDesc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentFilter {
    pub source_class: Option<SourceClass>,
    pub status: Option<DocStatus>,
    /// Inclusive bounds on `relevance_score`; unranked documents never match.
    pub score_range: Option<(f64, f64)>,
    pub limit: usize,
    pub order: QueryOrder,
}

impl Default for DocumentFilter {
    fn default() -> Self {
        Self {
            source_class: None,
            status: None,
            score_range: None,
            limit: usize::MAX,
            order: QueryOrder::default(),
        }
    }
}

impl DocumentFilter {
    pub fn matches(&self, d: &DocumentRecord) -> bool {
        self.source_class.is_none_or(|c| c == d.source_class)
            && self.status.is_none_or(|s| s == d.status)
            && self
                .score_range
                .is_none_or(|(lo, hi)| d.relevance_score.is_some_and(|r| r >= lo && r <= hi))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JudgmentFilter {
    pub doc_id: Option<String>,
    pub judge_id: Option<String>,
    /// Only the most recent judgment per (doc, judge).
    pub latest_only: bool,
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS documents (
    doc_id TEXT PRIMARY KEY,
    url TEXT NOT NULL,
    source_class TEXT NOT NULL,
    fetched_at TEXT NOT NULL,
    fetched_at_ns INTEGER NOT NULL,
    html_codec TEXT NOT NULL,
    raw_html BLOB NOT NULL,
    text TEXT NOT NULL,
    title TEXT NOT NULL,
    metadata TEXT NOT NULL,
    classifier_score REAL,
    relevance_score REAL,
    status INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS documents_status ON documents(status);
CREATE TABLE IF NOT EXISTS rankings (
    doc_id TEXT PRIMARY KEY REFERENCES documents(doc_id),
    matched_terms TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS judgments (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    doc_id TEXT NOT NULL REFERENCES documents(doc_id),
    judge_id TEXT NOT NULL,
    grade INTEGER NOT NULL CHECK (grade BETWEEN 0 AND 3),
    judged_at TEXT NOT NULL,
    judged_at_ns INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS judgments_pair ON judgments(doc_id, judge_id);
";

const CODEC_DEFLATE: &str = "deflate";
const CODEC_IDENTITY: &str = "identity";

const DOC_COLUMNS: &str =
    "doc_id, url, source_class, fetched_at, html_codec, raw_html, text, title, \
                           metadata, classifier_score, relevance_score, status";

pub struct Store {
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").finish_non_exhaustive()
    }
}

fn nanos(t: DateTime<Utc>) -> i64 {
    t.timestamp_nanos_opt().unwrap_or(i64::MAX)
}

fn compress(raw: &[u8]) -> std::io::Result<Vec<u8>> {
    let mut enc = flate2::write::DeflateEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(raw)?;
    enc.finish()
}

fn decompress(codec: &str, blob: Vec<u8>) -> Result<Vec<u8>> {
    match codec {
        CODEC_IDENTITY => Ok(blob),
        CODEC_DEFLATE => {
            let mut out = Vec::new();
            flate2::read::DeflateDecoder::new(blob.as_slice()).read_to_end(&mut out)?;
            Ok(out)
        }
        other => Err(StoreError::Corrupt(format!("unknown codec {other}"))),
    }
}

fn parse_time(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| StoreError::Corrupt(format!("bad timestamp {s:?}: {e}")))
}

struct RawDoc {
    doc_id: String,
    url: String,
    source_class: String,
    fetched_at: String,
    codec: String,
    blob: Vec<u8>,
    text: String,
    title: String,
    metadata: String,
    classifier_score: Option<f64>,
    relevance_score: Option<f64>,
    status: i64,
}

impl RawDoc {
    fn from_row(row: &rusqlite::Row<'_>) -> rusqlite::Result<Self> {
        Ok(Self {
            doc_id: row.get(0)?,
            url: row.get(1)?,
            source_class: row.get(2)?,
            fetched_at: row.get(3)?,
            codec: row.get(4)?,
            blob: row.get(5)?,
            text: row.get(6)?,
            title: row.get(7)?,
            metadata: row.get(8)?,
            classifier_score: row.get(9)?,
            relevance_score: row.get(10)?,
            status: row.get(11)?,
        })
    }

    fn decode(self) -> Result<DocumentRecord> {
        Ok(DocumentRecord {
            source_class: SourceClass::parse(&self.source_class).ok_or_else(|| {
                StoreError::Corrupt(format!("source class {:?}", self.source_class))
            })?,
            fetched_at: parse_time(&self.fetched_at)?,
            raw_html: decompress(&self.codec, self.blob)?,
            metadata: serde_json::from_str(&self.metadata)?,
            status: DocStatus::from_code(self.status)
                .ok_or_else(|| StoreError::Corrupt(format!("status {}", self.status)))?,
            doc_id: self.doc_id,
            url: self.url,
            text: self.text,
            title: self.title,
            classifier_score: self.classifier_score,
            relevance_score: self.relevance_score,
        })
    }
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self> {
        conn.busy_timeout(std::time::Duration::from_secs(10))?;
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            conn: Mutex::new(conn),
        })
    }

    fn conn(&self) -> std::sync::MutexGuard<'_, Connection> {
        // A panicking writer cannot leave SQLite half-written; keep serving.
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Inserts or replaces a document. The id is recomputed from the canonical
    /// URL and timestamp, so storing the same fetch twice is idempotent.
    pub fn put_document(&self, record: &DocumentRecord) -> Result<String> {
        let canonical = canonicalize(&record.url)?;
        let doc_id = doc_id_for(canonical.as_str(), record.fetched_at);
        if record.relevance_score.is_some() && record.status != DocStatus::Ranked {
            return Err(StoreError::Invalid(
                "relevance score on an unranked document".into(),
            ));
        }
        if let Some(r) = record.relevance_score {
            if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&r) {
                return Err(StoreError::Invalid(format!(
                    "relevance score {r} outside [-1, 1]"
                )));
            }
        }
        let blob = compress(&record.raw_html)?;
        let metadata = serde_json::to_string(&record.metadata)?;
        let conn = self.conn();
        let existing: Option<i64> = conn
            .query_row(
                "SELECT status FROM documents WHERE doc_id = ?1",
                [&doc_id],
                |r| r.get(0),
            )
            .optional()?;
        if let Some(from) = existing.and_then(DocStatus::from_code) {
            if from > record.status {
                return Err(StoreError::StatusRegression {
                    doc_id,
                    from,
                    to: record.status,
                });
            }
        }
        conn.execute(
            "INSERT OR REPLACE INTO documents (doc_id, url, source_class, fetched_at, fetched_at_ns, \
             html_codec, raw_html, text, title, metadata, classifier_score, relevance_score, status) \
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12, ?13)",
            params![
                doc_id,
                canonical.as_str(),
                record.source_class.as_str(),
                timestamp_string(record.fetched_at),
                nanos(record.fetched_at),
                CODEC_DEFLATE,
                blob,
                record.text,
                record.title,
                metadata,
                record.classifier_score,
                record.relevance_score,
                record.status.code(),
            ],
        )?;
        Ok(doc_id)
    }

    pub fn get_document(&self, doc_id: &str) -> Result<Option<DocumentRecord>> {
        let raw = self
            .conn()
            .query_row(
                &format!("SELECT {DOC_COLUMNS} FROM documents WHERE doc_id = ?1"),
                [doc_id],
                RawDoc::from_row,
            )
            .optional()?;
        raw.map(RawDoc::decode).transpose()
    }

    pub fn contains(&self, doc_id: &str) -> Result<bool> {
        Ok(self
            .conn()
            .query_row(
                "SELECT 1 FROM documents WHERE doc_id = ?1",
                [doc_id],
                |_| Ok(()),
            )
            .optional()?
            .is_some())
    }

    fn current_status(conn: &Connection, doc_id: &str) -> Result<DocStatus> {
        let code: Option<i64> = conn
            .query_row(
                "SELECT status FROM documents WHERE doc_id = ?1",
                [doc_id],
                |r| r.get(0),
            )
            .optional()?;
        let code = code.ok_or_else(|| StoreError::UnknownDocument(doc_id.to_string()))?;
        DocStatus::from_code(code).ok_or_else(|| StoreError::Corrupt(format!("status {code}")))
    }

    pub fn update_status(&self, doc_id: &str, status: DocStatus) -> Result<()> {
        let conn = self.conn();
        let from = Self::current_status(&conn, doc_id)?;
        if from > status {
            return Err(StoreError::StatusRegression {
                doc_id: doc_id.to_string(),
                from,
                to: status,
            });
        }
        if status != DocStatus::Ranked {
            conn.execute(
                "UPDATE documents SET status = ?2, relevance_score = NULL WHERE doc_id = ?1",
                params![doc_id, status.code()],
            )?;
        } else {
            conn.execute(
                "UPDATE documents SET status = ?2 WHERE doc_id = ?1",
                params![doc_id, status.code()],
            )?;
        }
        Ok(())
    }

    /// Records parser output and moves a fetched document to `parsed`.
    /// Already-ranked documents keep their status.
    pub fn set_parsed(&self, doc_id: &str, page: &ParsedPage) -> Result<()> {
        let conn = self.conn();
        let from = Self::current_status(&conn, doc_id)?;
        let status = from.max(DocStatus::Parsed);
        conn.execute(
            "UPDATE documents SET text = ?2, title = ?3, metadata = ?4, status = ?5 WHERE doc_id = ?1",
            params![doc_id, page.text, page.title, serde_json::to_string(&page.metadata)?, status.code()],
        )?;
        Ok(())
    }

    /// Persists a relevance score and its matched terms; status becomes `ranked`.
    pub fn set_ranking(&self, doc_id: &str, score: f64, matched: &[MatchedTerm]) -> Result<()> {
        if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&score) || score.is_nan() {
            return Err(StoreError::Invalid(format!(
                "relevance score {score} outside [-1, 1]"
            )));
        }
        let mut conn = self.conn();
        Self::current_status(&conn, doc_id)?;
        let tx = conn.transaction()?;
        tx.execute(
            "UPDATE documents SET relevance_score = ?2, status = ?3 WHERE doc_id = ?1",
            params![doc_id, score, DocStatus::Ranked.code()],
        )?;
        tx.execute(
            "INSERT OR REPLACE INTO rankings (doc_id, matched_terms) VALUES (?1, ?2)",
            params![doc_id, serde_json::to_string(matched)?],
        )?;
        tx.commit()?;
        Ok(())
    }

    pub fn matched_terms(&self, doc_id: &str) -> Result<Option<Vec<MatchedTerm>>> {
        let raw: Option<String> = self
            .conn()
            .query_row(
                "SELECT matched_terms FROM rankings WHERE doc_id = ?1",
                [doc_id],
                |r| r.get(0),
            )
            .optional()?;
        Ok(raw.map(|s| serde_json::from_str(&s)).transpose()?)
    }

    pub fn query_documents(&self, filter: &DocumentFilter) -> Result<Vec<DocumentRecord>> {
        if filter.limit == 0 {
            return Err(StoreError::Invalid("query limit must be at least 1".into()));
        }
        let mut clauses = Vec::new();
        let mut args: Vec<rusqlite::types::Value> = Vec::new();
        if let Some(c) = filter.source_class {
            clauses.push(format!("source_class = ?{}", args.len() + 1));
            args.push(c.as_str().to_string().into());
        }
        if let Some(s) = filter.status {
            clauses.push(format!("status = ?{}", args.len() + 1));
            args.push(s.code().into());
        }
        if let Some((lo, hi)) = filter.score_range {
            clauses.push(format!(
                "relevance_score IS NOT NULL AND relevance_score >= ?{} AND relevance_score <= ?{}",
                args.len() + 1,
                args.len() + 2
            ));
            args.push(lo.into());
            args.push(hi.into());
        }
        let mut sql = format!("SELECT {DOC_COLUMNS} FROM documents");
        if !clauses.is_empty() {
            sql.push_str(" WHERE ");
            sql.push_str(&clauses.join(" AND "));
        }
        sql.push_str(match filter.order {
            QueryOrder::Random => " ORDER BY RANDOM()",
            QueryOrder::RelevanceDesc => {
                " ORDER BY relevance_score IS NULL, relevance_score DESC, doc_id"
            }
            QueryOrder::FetchedAtDesc => " ORDER BY fetched_at_ns DESC, doc_id",
        });
        let limit = i64::try_from(filter.limit).unwrap_or(i64::MAX);
        sql.push_str(&format!(" LIMIT {limit}"));
        let conn = self.conn();
        let mut stmt = conn.prepare(&sql)?;
        let rows = stmt
            .query_map(rusqlite::params_from_iter(args), RawDoc::from_row)?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        drop(stmt);
        drop(conn);
        rows.into_iter().map(RawDoc::decode).collect()
    }

    pub fn document_ids(&self, status: Option<DocStatus>) -> Result<Vec<String>> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT doc_id FROM documents WHERE (?1 IS NULL OR status = ?1) ORDER BY fetched_at_ns, doc_id",
        )?;
        let ids = stmt
            .query_map([status.map(DocStatus::code)], |r| r.get(0))?
            .collect::<rusqlite::Result<Vec<String>>>()?;
        Ok(ids)
    }

    pub fn count_documents(&self, status: Option<DocStatus>) -> Result<usize> {
        let n: i64 = self.conn().query_row(
            "SELECT COUNT(*) FROM documents WHERE (?1 IS NULL OR status = ?1)",
            [status.map(DocStatus::code)],
            |r| r.get(0),
        )?;
        Ok(n as usize)
    }

    pub fn relevance_scores(&self) -> Result<Vec<(String, f64)>> {
        let conn = self.conn();
        let mut stmt = conn.prepare(
            "SELECT doc_id, relevance_score FROM documents WHERE relevance_score IS NOT NULL",
        )?;
        let rows = stmt
            .query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(rows)
    }

    pub fn put_judgment(&self, j: &JudgmentRecord) -> Result<()> {
        if j.grade > 3 {
            return Err(StoreError::InvalidGrade(j.grade.into()));
        }
        let conn = self.conn();
        Self::current_status(&conn, &j.doc_id)?;
        let latest: Option<i64> = conn.query_row(
            "SELECT MAX(judged_at_ns) FROM judgments WHERE doc_id = ?1 AND judge_id = ?2",
            params![j.doc_id, j.judge_id],
            |r| r.get(0),
        )?;
        if latest.is_some_and(|l| l >= nanos(j.judged_at)) {
            return Err(StoreError::StaleJudgment {
                doc_id: j.doc_id.clone(),
                judge_id: j.judge_id.clone(),
            });
        }
        conn.execute(
            "INSERT INTO judgments (doc_id, judge_id, grade, judged_at, judged_at_ns) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![j.doc_id, j.judge_id, j.grade, timestamp_string(j.judged_at), nanos(j.judged_at)],
        )?;
        Ok(())
    }

    /// Latest judgment timestamp for a (doc, judge) pair.
    pub fn latest_judgment_time(
        &self,
        doc_id: &str,
        judge_id: &str,
    ) -> Result<Option<DateTime<Utc>>> {
        let s: Option<String> = self
            .conn()
            .query_row(
                "SELECT judged_at FROM judgments WHERE doc_id = ?1 AND judge_id = ?2 \
                 ORDER BY judged_at_ns DESC LIMIT 1",
                params![doc_id, judge_id],
                |r| r.get(0),
            )
            .optional()?;
        s.map(|s| parse_time(&s)).transpose()
    }

    pub fn list_judgments(&self, filter: &JudgmentFilter) -> Result<Vec<JudgmentRecord>> {
        let latest = if filter.latest_only {
            " AND j.judged_at_ns = (SELECT MAX(k.judged_at_ns) FROM judgments k \
               WHERE k.doc_id = j.doc_id AND k.judge_id = j.judge_id)"
        } else {
            ""
        };
        let sql = format!(
            "SELECT j.doc_id, j.judge_id, j.grade, j.judged_at FROM judgments j \
             WHERE (?1 IS NULL OR j.doc_id = ?1) AND (?2 IS NULL OR j.judge_id = ?2){latest} ORDER BY j.seq"
        );
        let conn = self.conn();
        let mut stmt = conn.prepare(&sql)?;
        let rows = stmt
            .query_map(params![filter.doc_id, filter.judge_id], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, i64>(2)?,
                    r.get::<_, String>(3)?,
                ))
            })?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        rows.into_iter()
            .map(|(doc_id, judge_id, grade, at)| {
                Ok(JudgmentRecord {
                    doc_id,
                    judge_id,
                    grade: u8::try_from(grade).map_err(|_| StoreError::InvalidGrade(grade))?,
                    judged_at: parse_time(&at)?,
                })
            })
            .collect()
    }

    /// Documents with at least one judgment.
    pub fn judged_doc_ids(&self) -> Result<std::collections::HashSet<String>> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT DISTINCT doc_id FROM judgments")?;
        let ids = stmt
            .query_map([], |r| r.get(0))?
            .collect::<rusqlite::Result<_>>()?;
        Ok(ids)
    }

    pub fn export_documents_jsonl<W: Write>(&self, mut out: W) -> Result<usize> {
        let ids = self.document_ids(None)?;
        for id in &ids {
            if let Some(doc) = self.get_document(id)? {
                serde_json::to_writer(&mut out, &doc)?;
                out.write_all(b"\n")?;
            }
        }
        out.flush()?;
        Ok(ids.len())
    }

    pub fn export_judgments_jsonl<W: Write>(&self, mut out: W) -> Result<usize> {
        let all = self.list_judgments(&JudgmentFilter::default())?;
        for j in &all {
            serde_json::to_writer(&mut out, j)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(all.len())
    }

    /// CSV with header `doc_id,judge_id,grade,judged_at`.
    pub fn export_judgments_csv<W: Write>(&self, out: W) -> Result<usize> {
        let all = self.list_judgments(&JudgmentFilter::default())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["doc_id", "judge_id", "grade", "judged_at"])?;
        for j in &all {
            w.write_record([
                &j.doc_id,
                &j.judge_id,
                &j.grade.to_string(),
                &timestamp_string(j.judged_at),
            ])?;
        }
        w.flush()?;
        Ok(all.len())
    }
}

/// Decodes one JSON-lines export back into records.
pub fn read_documents_jsonl<R: std::io::BufRead>(input: R) -> Result<Vec<DocumentRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
