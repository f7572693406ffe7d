//! Frontier-driven crawler with three profiles: focused (clear web, pages
//! kept only when the classifier accepts them), in-depth (forums, every
//! filter-passing page kept) and dark (in-depth through a SOCKS proxy).

mod cookies;
mod fetch;
mod filters;
mod frontier;
mod robots;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use url::Url;

pub use cookies::{import_cookies, Cookie, CookieError, SessionCookieJar};
pub use fetch::{
    FetchError, FetchOutcome, FetchSettings, Fetcher, DEFAULT_BODY_CAP, DEFAULT_TIMEOUT,
    MAX_REDIRECTS,
};
pub use filters::{apply_filters, Category, LinkFilterRule};
pub use frontier::{Frontier, FrontierEntry, Next};
pub use robots::Robots;

use crate::canonical::{canonicalize, host_key, is_http};
use crate::classifier::{load_classifier, ClassifierError, ClassifierModel};
use crate::parser::{extract_links, parse_page, MetadataRule, MetadataRuleSpec, RuleError};
use crate::store::{DocStatus, DocumentRecord, SourceClass, Store, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Focused,
    InDepth,
    Dark,
}

impl Profile {
    pub fn source_class(self) -> SourceClass {
        match self {
            Self::Focused => SourceClass::Clear,
            Self::InDepth => SourceClass::Social,
            Self::Dark => SourceClass::Dark,
        }
    }
}

pub const DEFAULT_POLITENESS_MS: u64 = 1000;
pub const DEFAULT_MAX_DEPTH: u32 = 5;
pub const DEFAULT_MAX_PAGES: usize = 1000;
pub const DEFAULT_PARSE_BATCH: usize = 100;
pub const DEFAULT_WORKERS: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("missing config key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid config value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("cannot load classifier model: {0}")]
    Model(#[from] ClassifierError),
    #[error(transparent)]
    Cookies(#[from] CookieError),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// On-disk crawl configuration (TOML).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrawlConfigFile {
    pub profile: Option<Profile>,
    #[serde(default)]
    pub seeds: Vec<String>,
    #[serde(default)]
    pub whitelist: Vec<String>,
    #[serde(default)]
    pub blacklist: Vec<String>,
    pub model_path: Option<PathBuf>,
    pub politeness_ms: Option<u64>,
    pub max_depth: Option<u32>,
    pub max_pages: Option<usize>,
    pub socks_proxy: Option<String>,
    pub cookie_jar: Option<PathBuf>,
    pub user_agent: Option<String>,
    pub workers: Option<usize>,
    pub parse_batch: Option<usize>,
    /// Defaults to true for focused and in-depth crawls, false for dark.
    pub respect_robots: Option<bool>,
    #[serde(default)]
    pub metadata_rules: Vec<MetadataRuleSpec>,
}

impl CrawlConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut file = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(x) = p.as_mut() {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        rebase(&mut file.model_path);
        rebase(&mut file.cookie_jar);
        Ok(file)
    }

    /// Checks and loads everything the crawl needs (model, cookies, rules)
    /// without any network activity.
    pub fn resolve(&self) -> Result<CrawlConfig, ConfigError> {
        let profile = self.profile.ok_or(ConfigError::MissingKey("profile"))?;
        if self.seeds.is_empty() {
            return Err(ConfigError::MissingKey("seeds"));
        }
        let seeds = self
            .seeds
            .iter()
            .map(|s| match canonicalize(s) {
                Ok(u) if is_http(&u) => Ok(u),
                Ok(u) => Err(ConfigError::Invalid {
                    key: "seeds",
                    reason: format!("{u} is not HTTP(S)"),
                }),
                Err(e) => Err(ConfigError::Invalid {
                    key: "seeds",
                    reason: e.to_string(),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut filters = Vec::new();
        for (key, cat, pats) in [
            ("whitelist", Category::Whitelist, &self.whitelist),
            ("blacklist", Category::Blacklist, &self.blacklist),
        ] {
            for p in pats {
                filters.push(
                    LinkFilterRule::new(cat, p).map_err(|e| ConfigError::Invalid {
                        key,
                        reason: e.to_string(),
                    })?,
                );
            }
        }
        let classifier = match (&self.model_path, profile) {
            (Some(p), _) => Some(Arc::new(load_classifier(p)?)),
            (None, Profile::Focused) => return Err(ConfigError::MissingKey("model_path")),
            (None, _) => None,
        };
        if profile == Profile::Dark && self.socks_proxy.is_none() {
            return Err(ConfigError::MissingKey("socks_proxy"));
        }
        let cookie_jar = match &self.cookie_jar {
            Some(p) => import_cookies(p)?,
            None => SessionCookieJar::default(),
        };
        let metadata_rules = self
            .metadata_rules
            .iter()
            .map(MetadataRule::from_spec)
            .collect::<Result<Vec<_>, _>>()?;
        let positive = |key: &'static str, v: usize| {
            if v == 0 {
                Err(ConfigError::Invalid {
                    key,
                    reason: "must be at least 1".into(),
                })
            } else {
                Ok(v)
            }
        };
        let config = CrawlConfig {
            profile,
            seeds,
            filters,
            classifier,
            politeness_delay: Duration::from_millis(
                self.politeness_ms.unwrap_or(DEFAULT_POLITENESS_MS),
            ),
            max_depth: self.max_depth.unwrap_or(DEFAULT_MAX_DEPTH),
            max_pages: positive("max_pages", self.max_pages.unwrap_or(DEFAULT_MAX_PAGES))?,
            proxy: self.socks_proxy.clone(),
            cookie_jar,
            user_agent: self
                .user_agent
                .clone()
                .unwrap_or_else(|| FetchSettings::default().user_agent),
            workers: positive("workers", self.workers.unwrap_or(DEFAULT_WORKERS))?,
            parse_batch: positive(
                "parse_batch",
                self.parse_batch.unwrap_or(DEFAULT_PARSE_BATCH),
            )?,
            respect_robots: self.respect_robots.unwrap_or(profile != Profile::Dark),
            metadata_rules,
            timeout: DEFAULT_TIMEOUT,
            body_cap: DEFAULT_BODY_CAP,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone)]
pub struct CrawlConfig {
    pub profile: Profile,
    pub seeds: Vec<Url>,
    pub filters: Vec<LinkFilterRule>,
    pub classifier: Option<Arc<ClassifierModel>>,
    pub politeness_delay: Duration,
    pub max_depth: u32,
    pub max_pages: usize,
    /// SOCKS5 endpoint `host:port`.
    pub proxy: Option<String>,
    pub cookie_jar: SessionCookieJar,
    pub user_agent: String,
    pub workers: usize,
    /// In-depth and dark crawls parse stored pages every this many pages.
    pub parse_batch: usize,
    pub respect_robots: bool,
    pub metadata_rules: Vec<MetadataRule>,
    pub timeout: Duration,
    pub body_cap: usize,
}

impl CrawlConfig {
    pub fn new(profile: Profile, seeds: Vec<Url>) -> Self {
        Self {
            profile,
            seeds,
            filters: Vec::new(),
            classifier: None,
            politeness_delay: Duration::from_millis(DEFAULT_POLITENESS_MS),
            max_depth: DEFAULT_MAX_DEPTH,
            max_pages: DEFAULT_MAX_PAGES,
            proxy: None,
            cookie_jar: SessionCookieJar::default(),
            user_agent: FetchSettings::default().user_agent,
            workers: DEFAULT_WORKERS,
            parse_batch: DEFAULT_PARSE_BATCH,
            respect_robots: profile != Profile::Dark,
            metadata_rules: Vec::new(),
            timeout: DEFAULT_TIMEOUT,
            body_cap: DEFAULT_BODY_CAP,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::MissingKey("seeds"));
        }
        if self.profile == Profile::Focused && self.classifier.is_none() {
            return Err(ConfigError::MissingKey("model_path"));
        }
        if self.profile == Profile::Dark && self.proxy.is_none() {
            return Err(ConfigError::MissingKey("socks_proxy"));
        }
        if self.workers == 0 || self.max_pages == 0 || self.parse_batch == 0 {
            return Err(ConfigError::Invalid {
                key: "workers/max_pages/parse_batch",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    fn fetch_settings(&self) -> FetchSettings {
        FetchSettings {
            user_agent: self.user_agent.clone(),
            socks_proxy: self.proxy.clone(),
            timeout: self.timeout,
            body_cap: self.body_cap,
            max_redirects: MAX_REDIRECTS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HostCounts {
    pub fetched: usize,
    pub harvested: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FetchFailure {
    pub url: String,
    pub depth: u32,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrawlReport {
    pub profile: Profile,
    /// Fetch attempts (robots.txt requests excluded).
    pub pages_fetched: usize,
    pub pages_harvested: usize,
    /// Distinct URLs that entered the frontier.
    pub frontier_seen: usize,
    pub harvest_ratio: f64,
    pub pages_parsed: usize,
    pub robots_blocked: usize,
    pub per_host: BTreeMap<String, HostCounts>,
    pub failures: Vec<FetchFailure>,
    pub unreachable_seeds: Vec<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum CrawlError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot build HTTP client: {0}")]
    Client(FetchError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Default)]
struct Tally {
    pages_fetched: usize,
    pages_harvested: usize,
    pages_parsed: usize,
    robots_blocked: usize,
    since_parse: usize,
    per_host: BTreeMap<String, HostCounts>,
    failures: Vec<FetchFailure>,
    unreachable_seeds: Vec<String>,
}

struct Shared<'a> {
    config: &'a CrawlConfig,
    store: &'a Store,
    fetcher: Fetcher,
    frontier: Mutex<Frontier>,
    tally: Mutex<Tally>,
    robots: Mutex<HashMap<String, Robots>>,
    seed_hosts: HashSet<String>,
    parse_lock: Mutex<()>,
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

/// Runs a crawl to completion (frontier exhausted or page budget spent)
/// and returns the report. Harvested pages go to `store`.
pub async fn run_crawl(config: &CrawlConfig, store: &Store) -> Result<CrawlReport, CrawlError> {
    config.validate()?;
    let started_at = Utc::now();
    let fetcher = Fetcher::new(config.fetch_settings(), config.cookie_jar.clone())
        .map_err(CrawlError::Client)?;
    let mut frontier = Frontier::new(config.politeness_delay).with_budget(config.max_pages);
    for seed in &config.seeds {
        if apply_filters(seed.as_str(), &config.filters) {
            frontier.enqueue(FrontierEntry::seed(seed.clone()));
        } else {
            log::warn!("seed {seed} rejected by link filters");
        }
    }
    let shared = Shared {
        config,
        store,
        fetcher,
        frontier: Mutex::new(frontier),
        tally: Mutex::new(Tally::default()),
        robots: Mutex::new(HashMap::new()),
        seed_hosts: config.seeds.iter().map(host_key).collect(),
        parse_lock: Mutex::new(()),
    };
    let workers = (0..config.workers).map(|_| worker(&shared));
    let results = futures_util::future::join_all(workers).await;
    for r in results {
        r?;
    }
    if config.profile != Profile::Focused {
        let n = parse_pending(store, &config.metadata_rules)?;
        lock(&shared.tally).pages_parsed += n;
    }
    let frontier_seen = lock(&shared.frontier).enqueued();
    let t = shared.tally.into_inner().unwrap_or_else(|p| p.into_inner());
    Ok(CrawlReport {
        profile: config.profile,
        pages_fetched: t.pages_fetched,
        pages_harvested: t.pages_harvested,
        frontier_seen,
        harvest_ratio: if frontier_seen == 0 {
            0.0
        } else {
            t.pages_harvested as f64 / frontier_seen as f64
        },
        pages_parsed: t.pages_parsed,
        robots_blocked: t.robots_blocked,
        per_host: t.per_host,
        failures: t.failures,
        unreachable_seeds: t.unreachable_seeds,
        started_at,
        finished_at: Utc::now(),
    })
}

async fn worker(s: &Shared<'_>) -> Result<(), CrawlError> {
    loop {
        let next = lock(&s.frontier).next_url(Instant::now());
        match next {
            Next::Exhausted => return Ok(()),
            Next::Wait(d) => tokio::time::sleep(d.min(Duration::from_millis(50))).await,
            Next::Ready(entry) => {
                let result = process(s, &entry).await;
                lock(&s.frontier).complete(&entry, Instant::now());
                result?;
            }
        }
    }
}

async fn robots_allow(s: &Shared<'_>, url: &Url) -> bool {
    let host = host_key(url);
    if let Some(r) = lock(&s.robots).get(&host) {
        return r.allowed(&path_and_query(url));
    }
    // The host is busy while this runs, so only one worker fetches its robots.txt.
    let robots = match s.fetcher.fetch_robots(url).await {
        Some(text) => Robots::parse(&text, &s.config.user_agent),
        None => Robots::allow_all(),
    };
    tokio::time::sleep(s.config.politeness_delay).await;
    let allowed = robots.allowed(&path_and_query(url));
    lock(&s.robots).insert(host, robots);
    allowed
}

fn path_and_query(url: &Url) -> String {
    match url.query() {
        Some(q) => format!("{}?{q}", url.path()),
        None => url.path().to_string(),
    }
}

fn is_textual(content_type: Option<&str>) -> bool {
    content_type.is_none_or(|c| {
        let c = c.to_ascii_lowercase();
        c.contains("html") || c.contains("text") || c.contains("xml")
    })
}

async fn process(s: &Shared<'_>, entry: &FrontierEntry) -> Result<(), CrawlError> {
    let config = s.config;
    if config.respect_robots && !robots_allow(s, &entry.url).await {
        log::info!("robots.txt disallows {}", entry.url);
        lock(&s.frontier).refund();
        lock(&s.tally).robots_blocked += 1;
        return Ok(());
    }
    let host = entry.host();
    let outcome = s.fetcher.fetch(&entry.url).await;
    {
        let mut t = lock(&s.tally);
        t.pages_fetched += 1;
        let hc = t.per_host.entry(host.clone()).or_default();
        hc.fetched += 1;
        if let Err(e) = &outcome {
            hc.failed += 1;
            t.failures.push(FetchFailure {
                url: entry.url.to_string(),
                depth: entry.depth,
                kind: e.kind().to_string(),
                detail: e.to_string(),
            });
            if entry.depth == 0 {
                t.unreachable_seeds.push(entry.url.to_string());
            }
        }
    }
    let Ok(page) = outcome else { return Ok(()) };
    lock(&s.frontier).mark_seen(&page.final_url);
    if page.final_url != entry.url && !apply_filters(page.final_url.as_str(), &config.filters) {
        log::info!(
            "{} redirected outside the filters to {}",
            entry.url,
            page.final_url
        );
        return Ok(());
    }
    if !is_textual(page.content_type.as_deref()) {
        log::info!("{}: skipping non-text content", page.final_url);
        return Ok(());
    }

    let mut record = DocumentRecord::fetched(
        page.final_url.as_str(),
        config.profile.source_class(),
        page.fetched_at,
        page.raw_html,
    )
    .map_err(StoreError::from)?;
    let links = match config.profile {
        Profile::Focused => {
            let parsed = parse_page(&record.raw_html, &page.final_url, &config.metadata_rules);
            if parsed.binary {
                return Ok(());
            }
            let model = config
                .classifier
                .as_ref()
                .expect("validated: focused crawls have a classifier");
            let verdict = model.classify(&format!("{}\n{}", parsed.title, parsed.text));
            if !verdict.relevant {
                return Ok(());
            }
            record.title = parsed.title;
            record.text = parsed.text;
            record.metadata = parsed.metadata;
            record.classifier_score = Some(verdict.score);
            record.status = DocStatus::Parsed;
            parsed.links
        }
        Profile::InDepth | Profile::Dark => extract_links(&record.raw_html, &page.final_url),
    };
    s.store.put_document(&record)?;
    let batch_due = {
        let mut t = lock(&s.tally);
        t.pages_harvested += 1;
        t.per_host.entry(host).or_default().harvested += 1;
        t.since_parse += 1;
        if config.profile != Profile::Focused && t.since_parse >= config.parse_batch {
            t.since_parse = 0;
            true
        } else {
            false
        }
    };
    if entry.depth < config.max_depth {
        let mut f = lock(&s.frontier);
        for link in links {
            if !is_http(&link) || !apply_filters(link.as_str(), &config.filters) {
                continue;
            }
            if config.profile != Profile::Focused && !s.seed_hosts.contains(&host_key(&link)) {
                continue;
            }
            f.enqueue(entry.child(link));
        }
    }
    if batch_due {
        if let Ok(_guard) = s.parse_lock.try_lock() {
            let n = parse_pending(s.store, &config.metadata_rules)?;
            lock(&s.tally).pages_parsed += n;
        }
    }
    Ok(())
}

/// Parses every stored document still in `fetched` state. Returns the
/// number of documents parsed.
pub fn parse_pending(store: &Store, rules: &[MetadataRule]) -> Result<usize, StoreError> {
    let mut n = 0;
    for id in store.document_ids(Some(DocStatus::Fetched))? {
        let Some(doc) = store.get_document(&id)? else {
            continue;
        };
        let Ok(base) = Url::parse(&doc.url) else {
            continue;
        };
        let page = parse_page(&doc.raw_html, &base, rules);
        store.set_parsed(&id, &page)?;
        n += 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_requirements() {
        let toml = r#"
            profile = "dark"
            seeds = ["http://abcdefghijklmnop.onion/"]
            blacklist = ["/members/"]
        "#;
        let file = CrawlConfigFile::from_toml(toml).unwrap();
        assert!(matches!(
            file.resolve(),
            Err(ConfigError::MissingKey("socks_proxy"))
        ));
        let focused =
            CrawlConfigFile::from_toml("profile = \"focused\"\nseeds = [\"http://a.example/\"]")
                .unwrap();
        assert!(matches!(
            focused.resolve(),
            Err(ConfigError::MissingKey("model_path"))
        ));
        let no_seeds = CrawlConfigFile::from_toml("profile = \"in_depth\"").unwrap();
        assert!(matches!(
            no_seeds.resolve(),
            Err(ConfigError::MissingKey("seeds"))
        ));
        assert!(CrawlConfigFile::from_toml("profile = \"in_depth\"\nbogus = 1").is_err());
    }

    #[test]
    fn in_depth_config_resolves() {
        let toml = r#"
            profile = "in_depth"
            seeds = ["http://forum.example/threads/1"]
            whitelist = ["forum\\.example/threads/"]
            politeness_ms = 250
            max_pages = 5
            [[metadata_rules]]
            domain = "forum"
            field = "reputation"
            selector = ".rep"
            post = "number"
        "#;
        let c = CrawlConfigFile::from_toml(toml).unwrap().resolve().unwrap();
        assert_eq!(c.politeness_delay, Duration::from_millis(250));
        assert_eq!(
            (c.max_pages, c.filters.len(), c.metadata_rules.len()),
            (5, 1, 1)
        );
        assert!(c.respect_robots);
    }
}
