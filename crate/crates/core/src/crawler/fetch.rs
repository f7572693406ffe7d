use std::time::Duration;

use chrono::{DateTime, Utc};
use reqwest::header::{CONTENT_TYPE, COOKIE, LOCATION};
use url::Url;

use super::cookies::SessionCookieJar;
use crate::canonical::canonical;

pub const DEFAULT_BODY_CAP: usize = 2 * 1024 * 1024;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const MAX_REDIRECTS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct FetchOutcome {
    pub status_code: u16,
    pub final_url: Url,
    pub raw_html: Vec<u8>,
    pub fetched_at: DateTime<Utc>,
    pub content_type: Option<String>,
    pub redirects: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("body exceeds {cap} bytes")]
    TooLarge { cap: usize },
    #[error("HTTP status {code}")]
    Status { code: u16 },
    #[error("more than {max} redirects")]
    TooManyRedirects { max: usize },
    #[error("bad redirect: {0}")]
    BadRedirect(String),
    #[error("{0}")]
    Other(String),
}

impl FetchError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Timeout => "timeout",
            Self::Connect(_) => "connect",
            Self::TooLarge { .. } => "over_cap",
            Self::Status { .. } => "status",
            Self::TooManyRedirects { .. } => "too_many_redirects",
            Self::BadRedirect(_) => "bad_redirect",
            Self::Other(_) => "other",
        }
    }

    fn from_reqwest(e: reqwest::Error) -> Self {
        if e.is_timeout() {
            Self::Timeout
        } else if e.is_connect() {
            Self::Connect(error_chain(&e))
        } else {
            Self::Other(error_chain(&e))
        }
    }
}

fn error_chain(e: &dyn std::error::Error) -> String {
    let mut s = e.to_string();
    let mut cur = e.source();
    while let Some(c) = cur {
        s.push_str(": ");
        s.push_str(&c.to_string());
        cur = c.source();
    }
    s
}

#[derive(Debug, Clone)]
pub struct FetchSettings {
    pub user_agent: String,
    /// `host:port` of a SOCKS5 proxy; hostnames are resolved by the proxy.
    pub socks_proxy: Option<String>,
    pub timeout: Duration,
    pub body_cap: usize,
    pub max_redirects: usize,
}

impl Default for FetchSettings {
    fn default() -> Self {
        Self {
            user_agent: concat!("cti-crawler/", env!("CARGO_PKG_VERSION")).to_string(),
            socks_proxy: None,
            timeout: DEFAULT_TIMEOUT,
            body_cap: DEFAULT_BODY_CAP,
            max_redirects: MAX_REDIRECTS,
        }
    }
}

/// HTTP client with manual redirect handling, so the cookie jar is
/// consulted for every hop.
pub struct Fetcher {
    client: reqwest::Client,
    jar: SessionCookieJar,
    settings: FetchSettings,
}

impl Fetcher {
    pub fn new(settings: FetchSettings, jar: SessionCookieJar) -> Result<Self, FetchError> {
        let mut builder = reqwest::Client::builder()
            .redirect(reqwest::redirect::Policy::none())
            .timeout(settings.timeout)
            .user_agent(settings.user_agent.clone());
        builder = match &settings.socks_proxy {
            Some(p) => {
                let proxy_url = if p.contains("://") {
                    p.clone()
                } else {
                    format!("socks5h://{p}")
                };
                let proxy = reqwest::Proxy::all(&proxy_url)
                    .map_err(|e| FetchError::Other(error_chain(&e)))?;
                builder.proxy(proxy)
            }
            None => builder.no_proxy(),
        };
        let client = builder
            .build()
            .map_err(|e| FetchError::Other(error_chain(&e)))?;
        Ok(Self {
            client,
            jar,
            settings,
        })
    }

    pub fn settings(&self) -> &FetchSettings {
        &self.settings
    }

    pub async fn fetch(&self, url: &Url) -> Result<FetchOutcome, FetchError> {
        let mut current = url.clone();
        let mut redirects = 0;
        loop {
            let mut req = self.client.get(current.as_str());
            if let Some(h) = self.jar.header_for(&current, Utc::now()) {
                req = req.header(COOKIE, h);
            }
            let mut resp = req.send().await.map_err(FetchError::from_reqwest)?;
            let status = resp.status();
            if status.is_redirection() {
                if let Some(loc) = resp.headers().get(LOCATION) {
                    if redirects == self.settings.max_redirects {
                        return Err(FetchError::TooManyRedirects {
                            max: self.settings.max_redirects,
                        });
                    }
                    let loc = loc
                        .to_str()
                        .map_err(|e| FetchError::BadRedirect(e.to_string()))?;
                    let next = current
                        .join(loc)
                        .map_err(|e| FetchError::BadRedirect(format!("{loc:?}: {e}")))?;
                    if !crate::canonical::is_http(&next) {
                        return Err(FetchError::BadRedirect(format!("non-HTTP target {next}")));
                    }
                    current = next;
                    redirects += 1;
                    continue;
                }
            }
            if !status.is_success() {
                return Err(FetchError::Status {
                    code: status.as_u16(),
                });
            }
            let cap = self.settings.body_cap;
            if resp.content_length().is_some_and(|n| n as usize > cap) {
                return Err(FetchError::TooLarge { cap });
            }
            let content_type = resp
                .headers()
                .get(CONTENT_TYPE)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string);
            let mut body = Vec::new();
            while let Some(chunk) = resp.chunk().await.map_err(FetchError::from_reqwest)? {
                if body.len() + chunk.len() > cap {
                    return Err(FetchError::TooLarge { cap });
                }
                body.extend_from_slice(&chunk);
            }
            return Ok(FetchOutcome {
                status_code: status.as_u16(),
                final_url: canonical(current),
                raw_html: body,
                fetched_at: Utc::now(),
                content_type,
                redirects,
            });
        }
    }

    /// Fetches `/robots.txt` for the URL's origin; `None` when unavailable.
    pub async fn fetch_robots(&self, url: &Url) -> Option<String> {
        let mut robots = url.clone();
        robots.set_path("/robots.txt");
        robots.set_query(None);
        robots.set_fragment(None);
        match self.fetch(&robots).await {
            Ok(o) => Some(String::from_utf8_lossy(&o.raw_html).into_owned()),
            Err(_) => None,
        }
    }
}
