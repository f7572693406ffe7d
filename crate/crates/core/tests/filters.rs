use cti_core::crawler::{apply_filters, LinkFilterRule};

#[test]
fn threads_section_whitelist() {
    let rules = [LinkFilterRule::whitelist("https://www.wilderssecurity.com/threads/*").unwrap()];
    assert!(apply_filters(
        "https://www.wilderssecurity.com/threads/abc",
        &rules
    ));
    assert!(apply_filters(
        "https://www.wilderssecurity.com/threads/some-topic.42/page-2",
        &rules
    ));
    assert!(!apply_filters(
        "https://www.wilderssecurity.com/forums/",
        &rules
    ));
    assert!(!apply_filters("https://www.example.com/", &rules));
}

#[test]
fn security_blog_whitelist() {
    let rules = [LinkFilterRule::whitelist("https://blogs.oracle.com/security/*").unwrap()];
    assert!(apply_filters(
        "https://blogs.oracle.com/security/post-one",
        &rules
    ));
    assert!(!apply_filters(
        "https://blogs.oracle.com/java/post-two",
        &rules
    ));
}

#[test]
fn members_area_blacklist() {
    let rules = [LinkFilterRule::blacklist("https://www.wilderssecurity.com/members/*").unwrap()];
    assert!(!apply_filters(
        "https://www.wilderssecurity.com/members/john",
        &rules
    ));
    assert!(apply_filters(
        "https://www.wilderssecurity.com/threads/abc",
        &rules
    ));
    assert!(apply_filters("https://www.wilderssecurity.com/", &rules));
}

#[test]
fn events_blacklist() {
    let rules = [LinkFilterRule::blacklist("https://www.securityforum.org/events/*").unwrap()];
    assert!(!apply_filters(
        "https://www.securityforum.org/events/annual-congress",
        &rules
    ));
    assert!(apply_filters(
        "https://www.securityforum.org/research/",
        &rules
    ));
}

#[test]
fn whitelist_and_blacklist_combine() {
    let rules = [
        LinkFilterRule::whitelist("https://www.wilderssecurity.com/").unwrap(),
        LinkFilterRule::blacklist("https://www.wilderssecurity.com/members/*").unwrap(),
    ];
    assert!(apply_filters(
        "https://www.wilderssecurity.com/threads/x",
        &rules
    ));
    assert!(!apply_filters(
        "https://www.wilderssecurity.com/members/x",
        &rules
    ));
    assert!(!apply_filters("https://other.example/", &rules));
    assert!(apply_filters("https://anything.example/", &[]));
}
