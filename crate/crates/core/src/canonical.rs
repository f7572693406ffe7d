//! URL canonicalization shared by the store, the frontier and link extraction.
//!
//! The `url` crate already lowercases scheme and host and drops default ports
//! for special schemes; on top of that we strip the fragment.

use url::Url;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum UrlError {
    #[error("malformed URL {url:?}: {reason}")]
    Malformed { url: String, reason: String },
    #[error("URL {0:?} has no host")]
    NoHost(String),
}

/// Parses an absolute URL and returns its canonical form.
pub fn canonicalize(raw: &str) -> Result<Url, UrlError> {
    let url = Url::parse(raw.trim()).map_err(|e| UrlError::Malformed {
        url: raw.to_string(),
        reason: e.to_string(),
    })?;
    if url.cannot_be_a_base() || url.host_str().is_none() {
        return Err(UrlError::NoHost(raw.to_string()));
    }
    Ok(canonical(url))
}

pub fn canonical(mut url: Url) -> Url {
    url.set_fragment(None);
    url
}

pub fn is_http(url: &Url) -> bool {
    matches!(url.scheme(), "http" | "https")
}

/// Politeness key: host plus explicit port, if any.
pub fn host_key(url: &Url) -> String {
    match (url.host_str(), url.port()) {
        (Some(h), Some(p)) => format!("{h}:{p}"),
        (Some(h), None) => h.to_string(),
        _ => String::new(),
    }
}
