//! Content parser: plain text, title, outlinks and forum/marketplace metadata
//! from raw HTML.
//!
//! Boilerplate removal is tag based. Subtrees rooted at `script`, `style`,
//! `nav`, `header`, `footer`, `aside`, `noscript`, `template` and `head` never
//! contribute text. Block-level elements break paragraphs; the resulting text
//! has one paragraph per line.

use std::collections::{BTreeMap, HashSet};

use ego_tree::NodeRef;
use regex::Regex;
use scraper::{Html, Node, Selector};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::canonical::{canonical, is_http};

const SKIPPED: &[&str] = &[
    "script", "style", "nav", "header", "footer", "aside", "noscript", "template", "head", "svg",
    "iframe", "object",
];

const BLOCKS: &[&str] = &[
    "p",
    "div",
    "br",
    "li",
    "ul",
    "ol",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "tr",
    "td",
    "th",
    "table",
    "section",
    "article",
    "main",
    "blockquote",
    "pre",
    "dd",
    "dt",
    "dl",
    "form",
    "fieldset",
    "figure",
    "figcaption",
    "hr",
    "body",
    "address",
    "details",
    "summary",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedPage {
    pub title: String,
    pub text: String,
    pub links: Vec<Url>,
    pub metadata: BTreeMap<String, String>,
    /// Set when the payload did not look like markup at all.
    pub binary: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("invalid domain pattern {0:?}: {1}")]
    Domain(String, regex::Error),
    #[error("invalid regex selector {0:?}: {1}")]
    Regex(String, regex::Error),
    #[error("invalid CSS selector {0:?}: {1}")]
    Css(String, String),
    #[error("unknown post-processing step {0:?}")]
    Post(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PostProcess {
    #[default]
    None,
    Number,
    Trimmed,
}

impl std::str::FromStr for PostProcess {
    type Err = RuleError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "" | "none" => Ok(Self::None),
            "number" => Ok(Self::Number),
            "trimmed" | "trim" => Ok(Self::Trimmed),
            other => Err(RuleError::Post(other.to_string())),
        }
    }
}

/// Config-file form of a metadata rule (`metadata_rules[]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataRuleSpec {
    pub domain: String,
    pub field: String,
    pub selector: String,
    #[serde(default)]
    pub post: PostProcess,
}

#[derive(Debug, Clone)]
enum Extractor {
    Css(Selector),
    Regex(Regex),
}

/// A compiled metadata rule. Selectors prefixed with `re:` are regular
/// expressions over the raw HTML (first capture group, or the whole match);
/// anything else is a CSS selector.
#[derive(Debug, Clone)]
pub struct MetadataRule {
    domain_pattern: Regex,
    field_name: String,
    extractor: Extractor,
    post_process: PostProcess,
}

impl MetadataRule {
    pub fn new(
        domain: &str,
        field: &str,
        selector: &str,
        post: PostProcess,
    ) -> Result<Self, RuleError> {
        let domain_pattern =
            Regex::new(domain).map_err(|e| RuleError::Domain(domain.to_string(), e))?;
        let extractor = match selector.strip_prefix("re:") {
            Some(re) => {
                Extractor::Regex(Regex::new(re).map_err(|e| RuleError::Regex(re.to_string(), e))?)
            }
            None => Extractor::Css(
                Selector::parse(selector)
                    .map_err(|e| RuleError::Css(selector.to_string(), e.to_string()))?,
            ),
        };
        Ok(Self {
            domain_pattern,
            field_name: field.to_string(),
            extractor,
            post_process: post,
        })
    }

    pub fn from_spec(spec: &MetadataRuleSpec) -> Result<Self, RuleError> {
        Self::new(&spec.domain, &spec.field, &spec.selector, spec.post)
    }

    pub fn field_name(&self) -> &str {
        &self.field_name
    }

    fn applies_to(&self, base_url: &Url) -> bool {
        base_url
            .host_str()
            .is_some_and(|h| self.domain_pattern.is_match(h))
    }

    fn extract(&self, doc: &Html, raw: &str) -> Option<String> {
        let value = match &self.extractor {
            Extractor::Css(sel) => {
                let el = doc.select(sel).next()?;
                collapse_ws(&el.text().collect::<Vec<_>>().join(" "))
            }
            Extractor::Regex(re) => {
                let caps = re.captures(raw)?;
                let m = caps.get(1).or_else(|| caps.get(0))?;
                let frag = Html::parse_fragment(m.as_str());
                collapse_ws(&frag.root_element().text().collect::<Vec<_>>().join(" "))
            }
        };
        let value = match self.post_process {
            PostProcess::None => value,
            PostProcess::Trimmed => value.trim().to_string(),
            PostProcess::Number => match first_number(&value) {
                Some(n) => n,
                None => {
                    log::warn!(
                        "metadata rule {:?}: no number in {:?}",
                        self.field_name,
                        value
                    );
                    return None;
                }
            },
        };
        (!value.is_empty()).then_some(value)
    }
}

fn first_number(s: &str) -> Option<String> {
    static NUM: std::sync::LazyLock<Regex> =
        std::sync::LazyLock::new(|| Regex::new(r"[-+]?\d+(?:[.,]\d+)*").unwrap());
    NUM.find(s).map(|m| {
        let n = m.as_str();
        // Commas before 3-digit groups separate thousands; a lone other comma is a decimal mark.
        let thousands = n
            .split(',')
            .skip(1)
            .all(|g| g.len() == 3 && g.bytes().all(|b| b.is_ascii_digit()));
        if n.contains('.') || thousands {
            n.replace(',', "")
        } else {
            n.replace(',', ".")
        }
    })
}

/// Heuristic for non-markup payloads: NUL bytes or many control characters in
/// the leading window.
fn looks_binary(raw: &[u8]) -> bool {
    let window = &raw[..raw.len().min(8192)];
    if window.contains(&0) {
        return true;
    }
    let controls = window
        .iter()
        .filter(|&&b| b < 0x20 && !matches!(b, b'\n' | b'\r' | b'\t' | 0x0c))
        .count();
    !window.is_empty() && controls * 10 > window.len()
}

pub fn parse_html(raw: &[u8], base_url: &Url) -> ParsedPage {
    parse_page(raw, base_url, &[])
}

/// Full parse including metadata rules.
pub fn parse_page(raw: &[u8], base_url: &Url, rules: &[MetadataRule]) -> ParsedPage {
    if looks_binary(raw) {
        log::warn!("{base_url}: payload is not HTML, skipping");
        return ParsedPage {
            binary: true,
            ..Default::default()
        };
    }
    let source = String::from_utf8_lossy(raw);
    let doc = Html::parse_document(&source);
    ParsedPage {
        title: title_of(&doc),
        text: visible_text(&doc),
        links: links_from_document(&doc, base_url),
        metadata: metadata_from_document(&doc, &source, base_url, rules),
        binary: false,
    }
}

pub fn extract_metadata(
    raw: &[u8],
    base_url: &Url,
    rules: &[MetadataRule],
) -> BTreeMap<String, String> {
    let source = String::from_utf8_lossy(raw);
    let doc = Html::parse_document(&source);
    metadata_from_document(&doc, &source, base_url, rules)
}

fn metadata_from_document(
    doc: &Html,
    source: &str,
    base_url: &Url,
    rules: &[MetadataRule],
) -> BTreeMap<String, String> {
    rules
        .iter()
        .filter(|r| r.applies_to(base_url))
        .filter_map(|r| r.extract(doc, source).map(|v| (r.field_name.clone(), v)))
        .collect()
}

/// Anchor targets resolved against `base_url` (or a `<base href>`),
/// canonicalized, restricted to http(s), deduplicated in document order.
pub fn extract_links(raw: &[u8], base_url: &Url) -> Vec<Url> {
    let doc = Html::parse_document(&String::from_utf8_lossy(raw));
    links_from_document(&doc, base_url)
}

fn links_from_document(doc: &Html, base_url: &Url) -> Vec<Url> {
    static ANCHOR: std::sync::LazyLock<Selector> =
        std::sync::LazyLock::new(|| Selector::parse("a[href], area[href]").unwrap());
    static BASE: std::sync::LazyLock<Selector> =
        std::sync::LazyLock::new(|| Selector::parse("base[href]").unwrap());

    let base = doc
        .select(&BASE)
        .next()
        .and_then(|b| b.value().attr("href"))
        .and_then(|h| base_url.join(h.trim()).ok())
        .unwrap_or_else(|| base_url.clone());

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for a in doc.select(&ANCHOR) {
        let Some(href) = a.value().attr("href") else {
            continue;
        };
        let Ok(url) = base.join(href.trim()) else {
            continue;
        };
        if !is_http(&url) || url.host_str().is_none() {
            continue;
        }
        let url = canonical(url);
        if seen.insert(url.as_str().to_string()) {
            out.push(url);
        }
    }
    out
}

fn title_of(doc: &Html) -> String {
    static TITLE: std::sync::LazyLock<Selector> =
        std::sync::LazyLock::new(|| Selector::parse("title").unwrap());
    static HEADING: std::sync::LazyLock<Selector> =
        std::sync::LazyLock::new(|| Selector::parse("h1, h2, h3, h4, h5, h6").unwrap());
    let from = |sel: &Selector| {
        doc.select(sel)
            .map(|e| sanitize(&collapse_ws(&e.text().collect::<String>())))
            .find(|t| !t.is_empty())
    };
    from(&TITLE).or_else(|| from(&HEADING)).unwrap_or_default()
}

fn visible_text(doc: &Html) -> String {
    let mut blocks: Vec<String> = Vec::new();
    let mut current = String::new();
    walk(doc.tree.root(), &mut blocks, &mut current);
    flush(&mut blocks, &mut current);
    blocks.join("\n")
}

fn flush(blocks: &mut Vec<String>, current: &mut String) {
    let block = sanitize(&collapse_ws(current));
    if !block.is_empty() {
        blocks.push(block);
    }
    current.clear();
}

fn walk(node: NodeRef<'_, Node>, blocks: &mut Vec<String>, current: &mut String) {
    match node.value() {
        Node::Text(t) => {
            current.push_str(t);
        }
        Node::Element(el) => {
            let name = el.name();
            if SKIPPED.contains(&name) {
                return;
            }
            let block = BLOCKS.contains(&name);
            if block {
                flush(blocks, current);
            }
            for child in node.children() {
                walk(child, blocks, current);
            }
            if block {
                flush(blocks, current);
            } else {
                // Inline elements still separate words visually in most layouts.
                if matches!(name, "span" | "a" | "td" | "label" | "button" | "img") {
                    current.push(' ');
                }
            }
        }
        Node::Document | Node::Fragment => {
            for child in node.children() {
                walk(child, blocks, current);
            }
        }
        _ => {}
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Text decoded from entities may spell out tags (`&lt;script&gt;`); the `<`
/// of any such sequence is dropped.
fn sanitize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '<' && chars.peek().is_some_and(|n| n.is_ascii_alphabetic()) {
            continue;
        }
        out.push(c);
    }
    out
}
