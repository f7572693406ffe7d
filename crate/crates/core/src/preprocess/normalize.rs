use std::sync::LazyLock;

use regex::Regex;

static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>").unwrap());
static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:(?:https?|ftp)://|www\.)\S+").unwrap());
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(^|[^\w@])@[\w.\-]+").unwrap());
static USER_ID: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\buser[0-9]+\b").unwrap());

pub const URL_TOKEN: &str = "_url_";
pub const USER_TOKEN: &str = "_user_";

fn keep(c: char) -> bool {
    c == '_' || c == '-' || c.is_ascii_digit() || (c.is_alphabetic() && !c.is_uppercase())
}

/// Markup stripping, case folding, anonymisation and symbol removal.
///
/// URLs become `_url_`; `@mentions` and `user<digits>` handles become
/// `_user_`. Only letters, digits, `_` and intra-word `-` survive, separated
/// by single spaces. The function is idempotent.
pub fn normalize(text: &str) -> String {
    let decoded = html_escape::decode_html_entities(text);
    let stripped = TAG.replace_all(&decoded, " ");
    let lowered: String = stripped
        .to_lowercase()
        .chars()
        .filter(|&c| c != '\'' && c != '’')
        .collect();
    let no_urls = URL.replace_all(&lowered, " _url_ ");
    let no_mentions = MENTION.replace_all(&no_urls, "$1 _user_ ");
    let anonymised = USER_ID.replace_all(&no_mentions, " _user_ ");
    let cleaned: String = anonymised
        .chars()
        .map(|c| if keep(c) { c } else { ' ' })
        .collect();
    let mut out = String::with_capacity(cleaned.len());
    for token in cleaned.split_whitespace() {
        let token = token.trim_matches('-');
        if token.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}
