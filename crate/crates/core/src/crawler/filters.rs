use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Whitelist,
    Blacklist,
}

/// A regular expression searched anywhere in the full URL string.
#[derive(Debug, Clone)]
pub struct LinkFilterRule {
    category: Category,
    pattern: Regex,
}

impl LinkFilterRule {
    pub fn new(category: Category, pattern: &str) -> Result<Self, regex::Error> {
        Ok(Self {
            category,
            pattern: Regex::new(pattern)?,
        })
    }

    pub fn whitelist(pattern: &str) -> Result<Self, regex::Error> {
        Self::new(Category::Whitelist, pattern)
    }

    pub fn blacklist(pattern: &str) -> Result<Self, regex::Error> {
        Self::new(Category::Blacklist, pattern)
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub fn pattern(&self) -> &str {
        self.pattern.as_str()
    }

    pub fn matches(&self, url: &str) -> bool {
        self.pattern.is_match(url)
    }
}

/// True when the URL matches some whitelist rule (if any exist) and no
/// blacklist rule.
pub fn apply_filters(url: &str, rules: &[LinkFilterRule]) -> bool {
    let mut has_whitelist = false;
    let mut whitelisted = false;
    for rule in rules {
        match rule.category {
            Category::Blacklist if rule.matches(url) => return false,
            Category::Blacklist => {}
            Category::Whitelist => {
                has_whitelist = true;
                whitelisted = whitelisted || rule.matches(url);
            }
        }
    }
    !has_whitelist || whitelisted
}
