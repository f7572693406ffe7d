//! Stack Exchange data dump reader (`Posts.xml`, `Comments.xml`).

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostKind {
    Question,
    Answer,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPost {
    /// Dump `Id`; comment ids carry a `c` prefix because they share the
    /// numeric space with posts.
    pub post_id: String,
    pub kind: PostKind,
    pub body_text: String,
    pub tags: Vec<String>,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct DumpParse {
    pub posts: Vec<CorpusPost>,
    /// Post rows with a `PostTypeId` other than question/answer.
    pub skipped_rows: usize,
}

impl DumpParse {
    /// Union of question tags, sorted.
    pub fn tag_set(&self) -> Vec<String> {
        let mut tags: Vec<String> = self
            .posts
            .iter()
            .flat_map(|p| p.tags.iter().cloned())
            .collect();
        tags.sort();
        tags.dedup();
        tags
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed XML: {message}")]
    Xml {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

static TAG_ANGLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<([^<>]+)>").unwrap());

/// Splits a `Tags` attribute: `<ddos><botnet>` or the newer `|ddos|botnet|`.
pub fn split_tags(raw: &str) -> Vec<String> {
    if raw.contains('<') {
        TAG_ANGLE
            .captures_iter(raw)
            .map(|c| c[1].trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect()
    } else {
        raw.split('|')
            .map(|t| t.trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect()
    }
}

fn line_of(path: &Path, offset: u64) -> usize {
    let Ok(file) = File::open(path) else { return 0 };
    let mut line = 1;
    let mut reader = BufReader::new(file).take(offset);
    let mut buf = Vec::new();
    while let Ok(n) = reader.read_until(b'\n', &mut buf) {
        if n == 0 {
            break;
        }
        if buf.last() == Some(&b'\n') {
            line += 1;
        }
        buf.clear();
    }
    line
}

/// Streams every `<row>` element of a dump file, handing its attributes to `f`.
fn for_each_row(path: &Path, mut f: impl FnMut(&[(String, String)])) -> Result<(), DumpError> {
    let file = File::open(path).map_err(|source| DumpError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = Reader::from_reader(BufReader::new(file));
    reader.config_mut().check_end_names = true;
    let mut buf = Vec::new();
    let mut attrs = Vec::new();
    let xml_err = |reader: &Reader<BufReader<File>>, message: String| DumpError::Xml {
        path: path.to_path_buf(),
        line: line_of(
            path,
            reader
                .error_position()
                .max(reader.buffer_position().saturating_sub(1)),
        ),
        message,
    };
    let mut depth = 0usize;
    let mut saw_root = false;
    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_err(&reader, e.to_string()))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                saw_root = true;
                if e.name().as_ref() == b"row" {
                    collect_attrs(e, &reader, &mut attrs).map_err(|m| xml_err(&reader, m))?;
                    f(&attrs);
                }
                if !is_empty {
                    depth += 1;
                }
            }
            Event::End(_) => depth = depth.saturating_sub(1),
            Event::Eof => {
                if depth != 0 {
                    return Err(xml_err(
                        &reader,
                        "unexpected end of file inside an element".into(),
                    ));
                }
                if !saw_root {
                    return Err(xml_err(&reader, "no root element".into()));
                }
                break;
            }
            _ => {}
        }
        buf.clear();
    }
    Ok(())
}

fn collect_attrs<R>(
    e: &BytesStart<'_>,
    reader: &Reader<R>,
    out: &mut Vec<(String, String)>,
) -> Result<(), String> {
    out.clear();
    for attr in e.attributes() {
        let attr = attr.map_err(|e| e.to_string())?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .decode_and_unescape_value(reader.decoder())
            .map_err(|e| e.to_string())?;
        out.push((key, value.into_owned()));
    }
    Ok(())
}

fn attr<'a>(attrs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    attrs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

/// Parses a posts file and an optional comments file into corpus posts.
/// `Body` and `Text` are HTML fragments; they are normalized here.
pub fn parse_dump(posts_xml: &Path, comments_xml: Option<&Path>) -> Result<DumpParse, DumpError> {
    let mut out = DumpParse::default();
    for_each_row(posts_xml, |attrs| {
        let kind = match attr(attrs, "PostTypeId") {
            Some("1") => PostKind::Question,
            Some("2") => PostKind::Answer,
            _ => {
                out.skipped_rows += 1;
                return;
            }
        };
        let mut body = attr(attrs, "Body").unwrap_or_default().to_string();
        if kind == PostKind::Question {
            if let Some(title) = attr(attrs, "Title") {
                body = format!("{title}\n{body}");
            }
        }
        let tags = match kind {
            PostKind::Question => attr(attrs, "Tags").map(split_tags).unwrap_or_default(),
            _ => Vec::new(),
        };
        out.posts.push(CorpusPost {
            post_id: attr(attrs, "Id").unwrap_or_default().to_string(),
            kind,
            body_text: normalize(&body),
            tags,
        });
    })?;
    if let Some(comments) = comments_xml {
        for_each_row(comments, |attrs| {
            out.posts.push(CorpusPost {
                post_id: format!("c{}", attr(attrs, "Id").unwrap_or_default()),
                kind: PostKind::Comment,
                body_text: normalize(attr(attrs, "Text").unwrap_or_default()),
                tags: Vec::new(),
            });
        })?;
    }
    Ok(out)
}

/// Parses a dump directory holding `Posts.xml` and, when present,
/// `Comments.xml`.
pub fn parse_dump_dir(dir: &Path) -> Result<DumpParse, DumpError> {
    let comments = dir.join("Comments.xml");
    parse_dump(
        &dir.join("Posts.xml"),
        comments.exists().then_some(comments.as_path()),
    )
}
