//! Deterministic fixtures shared by tests, benches and the CLI smoke run:
//! example sets, corpora, a toy embedding model, a local HTTP site with a
//! request log and an instrumented SOCKS5 proxy.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use url::Url;

use crate::classifier::{Label, LabeledExample};
use crate::embeddings::EmbeddingModel;
use crate::vocab::TopicVocabulary;

pub const SECURITY_WORDS: &[&str] = &[
    "exploit",
    "vulnerability",
    "malware",
    "ransomware",
    "botnet",
    "payload",
    "phishing",
    "credential",
    "backdoor",
    "trojan",
    "rootkit",
    "keylogger",
    "zeroday",
    "patch",
    "advisory",
    "injection",
    "overflow",
    "privilege",
    "escalation",
    "dropper",
    "loader",
    "beacon",
    "exfiltration",
    "firewall",
    "intrusion",
    "signature",
    "sandbox",
    "obfuscation",
    "shellcode",
    "attacker",
    "breach",
    "leak",
    "dump",
    "hash",
    "cracking",
    "bruteforce",
    "scanner",
    "honeypot",
    "indicator",
    "compromise",
    "lateral",
    "persistence",
    "ddos",
    "amplification",
    "spoofing",
    "xss",
    "csrf",
    "sqli",
    "cve",
    "mitigation",
    "threat",
    "actor",
    "campaign",
    "infection",
    "encryption",
    "decryptor",
    "wiper",
    "stealer",
    "miner",
    "worm",
];

pub const OTHER_WORDS: &[&str] = &[
    "recipe",
    "garlic",
    "oven",
    "butter",
    "flour",
    "simmer",
    "salad",
    "dessert",
    "garden",
    "tomato",
    "compost",
    "seedling",
    "harvest",
    "football",
    "league",
    "goalkeeper",
    "stadium",
    "season",
    "coach",
    "holiday",
    "beach",
    "luggage",
    "itinerary",
    "museum",
    "painting",
    "sculpture",
    "novel",
    "chapter",
    "poetry",
    "guitar",
    "melody",
    "concert",
    "orchestra",
    "yoga",
    "stretching",
    "marathon",
    "bicycle",
    "helmet",
    "sofa",
    "curtain",
    "wallpaper",
    "kitten",
    "puppy",
    "aquarium",
    "birthday",
    "wedding",
    "candle",
    "knitting",
    "pottery",
    "camping",
    "lantern",
    "canoe",
    "mountain",
    "sunset",
    "picnic",
    "lemonade",
    "pancake",
    "cinnamon",
    "vanilla",
    "bakery",
];

const FILLER: &[&str] = &[
    "the", "a", "of", "and", "to", "in", "on", "with", "for", "this",
];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sample_text(r: &mut ChaCha8Rng, pool: &[&str], n: usize) -> String {
    let mut words = Vec::with_capacity(n);
    for i in 0..n {
        if i % 4 == 3 {
            words.push(*FILLER.choose(r).expect("non-empty"));
        } else {
            words.push(*pool.choose(r).expect("non-empty"));
        }
    }
    words.join(" ")
}

/// Security-themed word salad.
pub fn security_text(seed: u64, n_words: usize) -> String {
    sample_text(&mut rng(seed), SECURITY_WORDS, n_words)
}

/// Off-topic word salad, disjoint from [`SECURITY_WORDS`] apart from fillers.
pub fn other_text(seed: u64, n_words: usize) -> String {
    sample_text(&mut rng(seed ^ 0x5eed_0ff5), OTHER_WORDS, n_words)
}

/// Linearly separable example set: `n` positives from the security pool
/// and `n` negatives from the off-topic pool.
pub fn separable_examples(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let s = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        out.push(LabeledExample {
            url: format!("http://train.example/pos/{i}"),
            text: security_text(s, 30),
            label: Label::Positive,
        });
        out.push(LabeledExample {
            url: format!("http://train.example/neg/{i}"),
            text: other_text(s, 30),
            label: Label::Negative,
        });
    }
    out
}

const TABLE_ONE_POSITIVE: [(&str, &str); 7] = [
    (
        "https://forum.example/threads/loader-update",
        "New build of the loader is out. It now checks for sandbox artifacts before unpacking the second \
         stage payload and talks to its command server over DNS.",
    ),
    (
        "https://blog.example/security/patch-notes",
        "Advisory: a heap overflow in the image parsing library allows remote code execution. Patch \
         immediately; exploit code is already circulating.",
    ),
    (
        "https://board.example/t/credential-dump",
        "Selling a fresh credential dump from a retail breach, 40k accounts with cleartext passwords, \
         escrow accepted.",
    ),
    (
        "https://forum.example/threads/ddos-rental",
        "Renting a botnet for DDoS, amplification over memcached and NTP, up to 300 Gbps, hourly pricing.",
    ),
    (
        "https://qa.example/q/phishing-kit",
        "How do I stop this phishing kit from being flagged? The landing page keeps getting blocked by \
         browser warnings.",
    ),
    (
        "https://news.example/ransomware-hospital",
        "Ransomware operators encrypted the hospital file servers and demanded payment in bitcoin; \
         backups were wiped as well.",
    ),
    (
        "https://forum.example/threads/sqli-scanner",
        "Released a scanner that finds SQL injection points in login forms and dumps the user table \
         automatically.",
    ),
];

const TABLE_ONE_NEGATIVE: [(&str, &str); 7] = [
    (
        "https://forum.example/threads/gpu-upgrade",
        "Which graphics card should I buy for gaming at 1440p? Budget is around four hundred dollars.",
    ),
    (
        "https://cooking.example/sourdough",
        "Feed the starter twice a day and keep it somewhere warm; the dough should double before shaping.",
    ),
    (
        "https://board.example/t/marathon-training",
        "Week six of marathon training went well, long run of twenty kilometres at an easy pace.",
    ),
    (
        "https://qa.example/q/excel-formula",
        "How do I sum a column in a spreadsheet only when the neighbouring cell says paid?",
    ),
    (
        "https://news.example/city-park",
        "The city council approved a new park with a playground, walking trails and a small pond.",
    ),
    (
        "https://forum.example/threads/guitar-strings",
        "Nickel strings sound warmer on my acoustic guitar than the bronze set I used before.",
    ),
    (
        "https://blog.example/travel/lisbon",
        "Three days in Lisbon: trams, custard tarts, and the view from the castle at sunset.",
    ),
];

/// Fourteen short labelled posts, seven about attacks and tooling, seven
/// on unrelated subjects. Some of the negatives come from the same sites.
pub fn fourteen_page_examples() -> Vec<LabeledExample> {
    let mk = |(url, text): (&str, &str), label| LabeledExample {
        url: url.to_string(),
        text: text.to_string(),
        label,
    };
    TABLE_ONE_POSITIVE
        .into_iter()
        .map(|p| mk(p, Label::Positive))
        .chain(
            TABLE_ONE_NEGATIVE
                .into_iter()
                .map(|p| mk(p, Label::Negative)),
        )
        .collect()
}

/// Canned HTTP response of the fixture server.
#[derive(Debug, Clone, PartialEq)]
pub enum FixtureResponse {
    Html(String),
    /// 302 to the given location.
    Redirect(String),
    Status(u16),
    Raw {
        content_type: String,
        body: Vec<u8>,
    },
}

/// The 30-page site for focused crawling: `/r0`..`/r9` are on topic,
/// `/n0`..`/n19` are not. `/rI` links to `/r(I+1)`, `/n(2I)` and `/n(2I+1)`;
/// every `/nJ` links to `/trap/J`, which a focused crawl must never fetch.
pub struct CrawlSite {
    pub pages: BTreeMap<String, FixtureResponse>,
    pub relevant: Vec<String>,
    pub irrelevant: Vec<String>,
    pub traps: Vec<String>,
}

fn page_html(title: &str, body: &str, links: &[String]) -> String {
    let anchors: String = links
        .iter()
        .map(|l| format!("<li><a href=\"{l}\">more</a></li>"))
        .collect();
    format!(
        "<!doctype html><html><head><title>{title}</title></head><body><main><h1>{title}</h1>\
         <p>{body}</p></main><nav><ul>{anchors}</ul></nav></body></html>"
    )
}

pub fn crawl_site(seed: u64) -> CrawlSite {
    let mut pages = BTreeMap::new();
    let relevant: Vec<String> = (0..10).map(|i| format!("/r{i}")).collect();
    let irrelevant: Vec<String> = (0..20).map(|j| format!("/n{j}")).collect();
    let traps: Vec<String> = (0..20).map(|j| format!("/trap/{j}")).collect();
    for (i, path) in relevant.iter().enumerate() {
        let mut links = vec![format!("/n{}", 2 * i), format!("/n{}", 2 * i + 1)];
        if i + 1 < 10 {
            links.insert(0, format!("/r{}", i + 1));
        }
        let title = format!("Incident notes {i}");
        pages.insert(
            path.clone(),
            FixtureResponse::Html(page_html(
                &title,
                &security_text(seed + i as u64, 60),
                &links,
            )),
        );
    }
    for j in 0..20 {
        let title = format!("Weekend notes {j}");
        let body = other_text(seed + 100 + j as u64, 60);
        pages.insert(
            irrelevant[j].clone(),
            FixtureResponse::Html(page_html(&title, &body, &[traps[j].clone()])),
        );
        pages.insert(
            traps[j].clone(),
            FixtureResponse::Html(page_html(
                "trap",
                &security_text(seed + 500 + j as u64, 20),
                &[],
            )),
        );
    }
    CrawlSite {
        pages,
        relevant,
        irrelevant,
        traps,
    }
}

/// Training examples that teach a classifier to accept the relevant pages
/// of [`crawl_site`] (different samples from the same word pools).
pub fn crawl_training_examples() -> Vec<LabeledExample> {
    let mut ex = separable_examples(40, 777);
    // Page chrome appears on every page of both classes.
    for e in &mut ex {
        e.text = format!("notes more {}", e.text);
    }
    ex
}

/// A small forum: thread pages, a member area that the blacklist must keep
/// out, and a few pages with post metadata.
pub fn forum_site() -> BTreeMap<String, FixtureResponse> {
    let mut pages = BTreeMap::new();
    for t in 1..=6 {
        let mut links = vec![format!("/members/{t}")];
        if t < 6 {
            links.push(format!("/threads/{}", t + 1));
        }
        links.push("http://elsewhere.example/offsite".to_string());
        let body = format!(
            "<div class=\"post\"><span class=\"author\">member{t}</span>\
             <span class=\"rep\">Reputation: 1,2{t}0</span><p>{}</p></div>",
            security_text(900 + t, 40)
        );
        let anchors: String = links
            .iter()
            .map(|l| format!("<a href=\"{l}\">link</a> "))
            .collect();
        pages.insert(
            format!("/threads/{t}"),
            FixtureResponse::Html(format!(
                "<html><head><title>Thread {t}</title></head><body>{body}<nav>{anchors}</nav></body></html>"
            )),
        );
        pages.insert(
            format!("/members/{t}"),
            FixtureResponse::Html(format!(
                "<html><head><title>Member {t}</title></head><body>profile</body></html>"
            )),
        );
    }
    pages
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoggedRequest {
    pub path: String,
    pub host: Option<String>,
    pub cookie: Option<String>,
    pub user_agent: Option<String>,
    pub peer: SocketAddr,
    pub at: Instant,
}

/// Local HTTP/1.1 server answering from a fixed page map, on a thread of
/// its own. Every request is logged.
pub struct FixtureServer {
    addr: SocketAddr,
    log: Arc<Mutex<Vec<LoggedRequest>>>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

type Pages = Arc<BTreeMap<String, FixtureResponse>>;
type Log = Arc<Mutex<Vec<LoggedRequest>>>;

async fn fixture_handler(
    axum::extract::State((pages, log)): axum::extract::State<(Pages, Log)>,
    axum::extract::ConnectInfo(peer): axum::extract::ConnectInfo<SocketAddr>,
    req: axum::extract::Request,
) -> axum::response::Response {
    use axum::http::{header, StatusCode};
    use axum::response::IntoResponse;

    let path = req
        .uri()
        .path_and_query()
        .map(|p| p.as_str().to_string())
        .unwrap_or_else(|| "/".into());
    let h = |name: header::HeaderName| {
        req.headers()
            .get(name)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string)
    };
    log.lock()
        .unwrap_or_else(|p| p.into_inner())
        .push(LoggedRequest {
            path: path.clone(),
            host: h(header::HOST),
            cookie: h(header::COOKIE),
            user_agent: h(header::USER_AGENT),
            peer,
            at: Instant::now(),
        });
    match pages.get(&path) {
        Some(FixtureResponse::Html(body)) => (
            [(header::CONTENT_TYPE, "text/html; charset=utf-8")],
            body.clone(),
        )
            .into_response(),
        Some(FixtureResponse::Redirect(to)) => {
            (StatusCode::FOUND, [(header::LOCATION, to.clone())]).into_response()
        }
        Some(FixtureResponse::Status(code)) => StatusCode::from_u16(*code)
            .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
            .into_response(),
        Some(FixtureResponse::Raw { content_type, body }) => {
            ([(header::CONTENT_TYPE, content_type.clone())], body.clone()).into_response()
        }
        None => StatusCode::NOT_FOUND.into_response(),
    }
}

impl FixtureServer {
    pub fn start(pages: BTreeMap<String, FixtureResponse>) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let log: Log = Arc::new(Mutex::new(Vec::new()));
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let state = (Arc::new(pages), log.clone());
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .expect("runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
                let app = axum::Router::new()
                    .fallback(fixture_handler)
                    .with_state(state);
                let _ = axum::serve(
                    listener,
                    app.into_make_service_with_connect_info::<SocketAddr>(),
                )
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
            });
        });
        Ok(Self {
            addr,
            log,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://127.0.0.1:PORT` joined with `path`.
    pub fn url(&self, path: &str) -> Url {
        Url::parse(&format!("http://{}{}", self.addr, path)).expect("valid fixture URL")
    }

    pub fn requests(&self) -> Vec<LoggedRequest> {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProxiedConnection {
    pub target_host: String,
    pub target_port: u16,
    /// Local address of the proxy's upstream socket; `None` when refused.
    pub upstream_local: Option<SocketAddr>,
}

/// SOCKS5 proxy (no auth, CONNECT only) that routes every host with the
/// given suffix to one upstream address and refuses everything else.
pub struct FakeSocksProxy {
    addr: SocketAddr,
    log: Arc<Mutex<Vec<ProxiedConnection>>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl FakeSocksProxy {
    pub fn start(upstream: SocketAddr, host_suffix: &str) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let log = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let (log2, stop2, suffix) = (log.clone(), stop.clone(), host_suffix.to_ascii_lowercase());
        let thread = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if stop2.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(conn) = conn else { continue };
                let (log, suffix) = (log2.clone(), suffix.clone());
                std::thread::spawn(move || {
                    let _ = socks_session(conn, upstream, &suffix, &log);
                });
            }
        });
        Ok(Self {
            addr,
            log,
            stop,
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn connections(&self) -> Vec<ProxiedConnection> {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

impl Drop for FakeSocksProxy {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn socks_session(
    mut client: TcpStream,
    upstream: SocketAddr,
    suffix: &str,
    log: &Mutex<Vec<ProxiedConnection>>,
) -> std::io::Result<()> {
    client.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut head = [0u8; 2];
    client.read_exact(&mut head)?;
    let mut methods = vec![0u8; head[1] as usize];
    client.read_exact(&mut methods)?;
    if head[0] != 5 || !methods.contains(&0) {
        client.write_all(&[5, 0xff])?;
        return Ok(());
    }
    client.write_all(&[5, 0])?;
    let mut req = [0u8; 4];
    client.read_exact(&mut req)?;
    let host = match req[3] {
        1 => {
            let mut ip = [0u8; 4];
            client.read_exact(&mut ip)?;
            std::net::Ipv4Addr::from(ip).to_string()
        }
        3 => {
            let mut len = [0u8; 1];
            client.read_exact(&mut len)?;
            let mut name = vec![0u8; len[0] as usize];
            client.read_exact(&mut name)?;
            String::from_utf8_lossy(&name).into_owned()
        }
        4 => {
            let mut ip = [0u8; 16];
            client.read_exact(&mut ip)?;
            std::net::Ipv6Addr::from(ip).to_string()
        }
        _ => return Ok(()),
    };
    let mut port = [0u8; 2];
    client.read_exact(&mut port)?;
    let port = u16::from_be_bytes(port);
    let reply = |code: u8| [5, code, 0, 1, 0, 0, 0, 0, 0, 0];
    let routed = req[1] == 1 && host.to_ascii_lowercase().ends_with(suffix);
    let upstream_conn = if routed {
        TcpStream::connect(upstream).ok()
    } else {
        None
    };
    log.lock()
        .unwrap_or_else(|p| p.into_inner())
        .push(ProxiedConnection {
            target_host: host,
            target_port: port,
            upstream_local: upstream_conn.as_ref().and_then(|c| c.local_addr().ok()),
        });
    let Some(server) = upstream_conn else {
        client.write_all(&reply(4))?;
        return Ok(());
    };
    client.write_all(&reply(0))?;
    client.set_read_timeout(None)?;
    let (mut c_read, mut s_write) = (client.try_clone()?, server.try_clone()?);
    let up = std::thread::spawn(move || {
        let _ = std::io::copy(&mut c_read, &mut s_write);
        let _ = s_write.shutdown(Shutdown::Write);
    });
    let (mut s_read, mut c_write) = (server, client);
    let _ = std::io::copy(&mut s_read, &mut c_write);
    let _ = c_write.shutdown(Shutdown::Write);
    let _ = up.join();
    Ok(())
}

/// Template corpus in which two terms are interchangeable.
#[derive(Debug, Clone)]
pub struct SynonymCorpus {
    pub sentences: Vec<Vec<String>>,
    pub syn1: String,
    pub syn2: String,
}

const SYLLABLES: [&str; 16] = [
    "ba", "ko", "mi", "te", "lu", "sa", "ve", "ro", "di", "na", "fu", "gi", "pe", "zo", "ha", "wi",
];

fn pseudo_word(i: usize, tail: &str) -> String {
    format!("{}{}{tail}", SYLLABLES[i % 16], SYLLABLES[(i / 16) % 16])
}

/// `n` sentences over 40 topic groups. Each group has a focus slot and six
/// context words; every context word is shared by three groups. Group 0's
/// focus is filled by `syn1` or `syn2` at random, so the two share their
/// context distribution exactly; every other group has its own focus word.
pub fn synonym_corpus(n: usize, seed: u64) -> SynonymCorpus {
    const GROUPS: usize = 40;
    const CONTEXT: usize = 80;
    let mut r = rng(seed);
    let context: Vec<String> = (0..CONTEXT).map(|i| pseudo_word(i, "n")).collect();
    let focus: Vec<String> = (0..GROUPS).map(|i| pseudo_word(i * 7 + 3, "r")).collect();
    let pools: Vec<Vec<&str>> = (0..GROUPS)
        .map(|g| {
            (0..6)
                .map(|k| context[(g * 2 + k * 13) % CONTEXT].as_str())
                .collect()
        })
        .collect();
    let (syn1, syn2) = ("scrambler".to_string(), "encryptor".to_string());
    let mut sentences = Vec::with_capacity(n);
    for _ in 0..n {
        let g = if r.random_bool(0.2) {
            0
        } else {
            r.random_range(1..GROUPS)
        };
        let focus_word = match g {
            0 if r.random_bool(0.5) => syn1.as_str(),
            0 => syn2.as_str(),
            _ => focus[g].as_str(),
        };
        let mut s: Vec<String> = Vec::with_capacity(9);
        for k in 0..7 {
            if k == 3 {
                s.push(focus_word.to_string());
            } else {
                s.push(pools[g].choose(&mut r).expect("non-empty").to_string());
            }
        }
        for _ in 0..2 {
            let pos = r.random_range(0..=s.len());
            s.insert(pos, FILLER.choose(&mut r).expect("non-empty").to_string());
        }
        sentences.push(s);
    }
    SynonymCorpus {
        sentences,
        syn1,
        syn2,
    }
}

/// Twenty short sentences for phrase-table scoring.
pub const PHRASE_SENTENCES: [&str; 20] = [
    "mirai botnet hits cameras",
    "the mirai botnet spreads",
    "mirai botnet source leaked",
    "new mirai botnet variant",
    "mirai botnet again",
    "mirai botnet scanners",
    "sql injection in login",
    "blind sql injection payload",
    "sql injection cheat sheet",
    "sql injection again",
    "sql server patch",
    "the patch fixes sql injection",
    "botnet operators arrested",
    "the cameras are exposed",
    "login page leaked",
    "new variant spreads",
    "the scanners found cameras",
    "payload in the login page",
    "server hits new record",
    "again the server",
];

/// The fixture's tokens, split on whitespace.
pub fn phrase_corpus() -> Vec<Vec<String>> {
    PHRASE_SENTENCES
        .iter()
        .map(|s| s.split_whitespace().map(str::to_string).collect())
        .collect()
}

/// Three terms in three dimensions with hand-picked, non-orthogonal
/// vectors, plus an off-topic term.
pub fn toy_model() -> EmbeddingModel {
    EmbeddingModel::from_vectors(
        3,
        [
            ("botnet", vec![1.0, 0.5, 0.0]),
            ("ddos", vec![0.2, 1.0, 0.3]),
            ("exploit", vec![-0.4, 0.1, 1.0]),
            ("weather", vec![0.3, -1.0, 0.2]),
        ],
    )
    .expect("valid toy model")
}

pub fn toy_vocab() -> TopicVocabulary {
    TopicVocabulary::from_terms("toy", ["botnet", "ddos", "exploit"])
}

/// Pages served by the mock search backend: 30 on-topic pages and 30
/// off-topic ones, each mixing in the query words `attack` and `report`.
pub fn search_pages() -> Vec<(Url, String, Label)> {
    let mut out = Vec::new();
    for i in 0..30u64 {
        out.push((
            Url::parse(&format!("http://search-hit.example/sec/{i}")).expect("url"),
            format!("attack report {}", security_text(3000 + i, 40)),
            Label::Positive,
        ));
        out.push((
            Url::parse(&format!("http://search-hit.example/misc/{i}")).expect("url"),
            format!("attack report {}", other_text(3000 + i, 40)),
            Label::Negative,
        ));
    }
    out
}

/// A three-post, two-comment forum dump in the Stack Exchange XML layout.
pub const DUMP_POSTS_XML: &str = r#"<?xml version="1.0" encoding="utf-8"?>
<posts>
  <row Id="10" PostTypeId="1" Title="Botnet traffic on port 23" Body="&lt;p&gt;Our cameras joined a &lt;b&gt;botnet&lt;/b&gt; and flood port 23. See https://cve.example/x&lt;/p&gt;" Tags="&lt;botnet&gt;&lt;ddos&gt;&lt;iot&gt;" />
  <row Id="11" PostTypeId="2" ParentId="10" Body="&lt;p&gt;Block telnet and reset the default credential on every camera.&lt;/p&gt;" />
  <row Id="12" PostTypeId="1" Title="SQL injection in a login form" Body="&lt;p&gt;The login form is vulnerable to sql injection via the user field.&lt;/p&gt;" Tags="|sql-injection|web|" />
</posts>
"#;

pub const DUMP_COMMENTS_XML: &str = r#"<?xml version="1.0" encoding="utf-8"?>
<comments>
  <row Id="501" PostId="10" Text="Same botnet hit us, thanks @user42" />
  <row Id="502" PostId="12" Text="Use prepared statements against sql injection." />
</comments>
"#;

const DUMP_TAGS: &[&str] = &[
    "botnet",
    "ddos",
    "malware",
    "phishing",
    "ransomware",
    "exploit",
    "sql-injection",
];

/// A generated forum dump (`Posts.xml` layout): `n_questions` tagged
/// questions, each with one answer, bodies drawn from the security pool.
pub fn forum_dump_posts_xml(n_questions: usize, seed: u64) -> String {
    let mut r = rng(seed);
    let mut xml = String::from("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<posts>\n");
    for q in 0..n_questions {
        let id = 2 * q + 1;
        let tags: Vec<&str> = DUMP_TAGS.choose_multiple(&mut r, 2).copied().collect();
        let mention = tags
            .iter()
            .map(|t| t.replace('-', " "))
            .collect::<Vec<_>>()
            .join(" and ");
        let body = format!("{mention} {}", sample_text(&mut r, SECURITY_WORDS, 30));
        let tag_attr: String = tags.iter().map(|t| format!("&lt;{t}&gt;")).collect();
        xml.push_str(&format!(
            "  <row Id=\"{id}\" PostTypeId=\"1\" Title=\"Question {q}\" Body=\"&lt;p&gt;{body}&lt;/p&gt;\" Tags=\"{tag_attr}\" />\n"
        ));
        let answer = sample_text(&mut r, SECURITY_WORDS, 20);
        xml.push_str(&format!(
            "  <row Id=\"{}\" PostTypeId=\"2\" ParentId=\"{id}\" Body=\"&lt;p&gt;{answer}&lt;/p&gt;\" />\n",
            id + 1
        ));
    }
    xml.push_str("</posts>\n");
    xml
}
