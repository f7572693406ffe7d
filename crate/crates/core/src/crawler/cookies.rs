//! Session cookies exported from a browser after a manual login, in the
//! Netscape `cookies.txt` format.

use std::path::Path;

use chrono::{DateTime, Utc};
use url::Url;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cookie {
    /// Lowercase, without a leading dot.
    pub domain: String,
    pub include_subdomains: bool,
    pub path: String,
    pub secure: bool,
    /// Unix seconds; `None` for session cookies.
    pub expires: Option<i64>,
    pub name: String,
    pub value: String,
}

impl Cookie {
    pub fn is_expired(&self, now: DateTime<Utc>) -> bool {
        self.expires.is_some_and(|e| e <= now.timestamp())
    }

    fn domain_matches(&self, host: &str) -> bool {
        let host = host.to_ascii_lowercase();
        host == self.domain
            || (self.include_subdomains
                && host.len() > self.domain.len()
                && host.ends_with(&self.domain)
                && host.as_bytes()[host.len() - self.domain.len() - 1] == b'.')
    }

    fn path_matches(&self, path: &str) -> bool {
        path == self.path
            || (path.starts_with(&self.path)
                && (self.path.ends_with('/') || path[self.path.len()..].starts_with('/')))
    }

    pub fn applies_to(&self, url: &Url, now: DateTime<Utc>) -> bool {
        !self.is_expired(now)
            && url.host_str().is_some_and(|h| self.domain_matches(h))
            && self.path_matches(url.path())
            && (!self.secure || url.scheme() == "https")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionCookieJar {
    cookies: Vec<Cookie>,
}

#[derive(Debug, thiserror::Error)]
pub enum CookieError {
    #[error("cannot read cookie file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("no valid cookies in {0}")]
    Empty(String),
}

impl SessionCookieJar {
    pub fn new(cookies: Vec<Cookie>) -> Self {
        Self { cookies }
    }

    pub fn len(&self) -> usize {
        self.cookies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cookies.is_empty()
    }

    pub fn cookies(&self) -> &[Cookie] {
        &self.cookies
    }

    /// `Cookie` header value for a request, longest path first.
    pub fn header_for(&self, url: &Url, now: DateTime<Utc>) -> Option<String> {
        let mut matching: Vec<&Cookie> = self
            .cookies
            .iter()
            .filter(|c| c.applies_to(url, now))
            .collect();
        if matching.is_empty() {
            return None;
        }
        matching.sort_by_key(|c| std::cmp::Reverse(c.path.len()));
        Some(
            matching
                .iter()
                .map(|c| format!("{}={}", c.name, c.value))
                .collect::<Vec<_>>()
                .join("; "),
        )
    }

    /// Parses cookies.txt content. Malformed lines are skipped with a
    /// warning; the count of skipped lines is returned alongside.
    pub fn parse(content: &str) -> (Self, usize) {
        let mut cookies = Vec::new();
        let mut skipped = 0;
        for (i, raw) in content.lines().enumerate() {
            let mut line = raw.trim_end_matches('\r');
            if let Some(rest) = line.strip_prefix("#HttpOnly_") {
                line = rest;
            } else if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            match parse_line(line) {
                Some(c) => cookies.push(c),
                None => {
                    log::warn!("cookie line {} is malformed; skipped", i + 1);
                    skipped += 1;
                }
            }
        }
        (Self { cookies }, skipped)
    }
}

fn parse_line(line: &str) -> Option<Cookie> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 7 {
        return None;
    }
    let flag = |s: &str| match s.to_ascii_uppercase().as_str() {
        "TRUE" => Some(true),
        "FALSE" => Some(false),
        _ => None,
    };
    let domain = f[0].trim().trim_start_matches('.').to_ascii_lowercase();
    if domain.is_empty() || f[5].is_empty() {
        return None;
    }
    let expiry: i64 = f[4].trim().parse().ok()?;
    let path = if f[2].is_empty() {
        "/".to_string()
    } else {
        f[2].to_string()
    };
    Some(Cookie {
        domain,
        include_subdomains: flag(f[1])?,
        path,
        secure: flag(f[3])?,
        expires: (expiry != 0).then_some(expiry),
        name: f[5].to_string(),
        value: f[6].to_string(),
    })
}

/// Loads a cookies.txt file; a file without a single valid cookie is an
/// error.
pub fn import_cookies(path: &Path) -> Result<SessionCookieJar, CookieError> {
    let content = std::fs::read_to_string(path).map_err(|source| CookieError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let (jar, _) = SessionCookieJar::parse(&content);
    if jar.is_empty() {
        return Err(CookieError::Empty(path.display().to_string()));
    }
    Ok(jar)
}
