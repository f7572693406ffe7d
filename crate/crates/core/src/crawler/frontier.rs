//! Per-host FIFO queues served round-robin, with politeness enforced at
//! release time.
//!
//! A host has at most one URL in flight. The delay is measured from the
//! moment the previous fetch to that host completed, so request arrivals
//! at the server are spaced by at least the delay.

use std::collections::{HashMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::Serialize;
use url::Url;

use crate::canonical::{canonical, host_key};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrontierEntry {
    pub url: Url,
    pub depth: u32,
    pub parent_url: Option<Url>,
    pub discovered_at: DateTime<Utc>,
}

impl FrontierEntry {
    pub fn seed(url: Url) -> Self {
        Self {
            url: canonical(url),
            depth: 0,
            parent_url: None,
            discovered_at: Utc::now(),
        }
    }

    pub fn child(&self, url: Url) -> Self {
        Self {
            url: canonical(url),
            depth: self.depth + 1,
            parent_url: Some(self.url.clone()),
            discovered_at: Utc::now(),
        }
    }

    pub fn host(&self) -> String {
        host_key(&self.url)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Next {
    Ready(FrontierEntry),
    /// Nothing releasable yet; try again after at most this long.
    Wait(Duration),
    Exhausted,
}

#[derive(Debug, Default)]
struct HostState {
    queue: VecDeque<FrontierEntry>,
    busy: bool,
    last_done: Option<Instant>,
}

#[derive(Debug)]
pub struct Frontier {
    delay: Duration,
    hosts: HashMap<String, HostState>,
    ring: VecDeque<String>,
    seen: HashSet<Url>,
    enqueued: usize,
    in_flight: usize,
    released: usize,
    max_releases: Option<usize>,
}

/// Poll interval while every queued host is busy.
const IDLE_POLL: Duration = Duration::from_millis(5);

impl Frontier {
    pub fn new(delay: Duration) -> Self {
        Self {
            delay,
            hosts: HashMap::new(),
            ring: VecDeque::new(),
            seen: HashSet::new(),
            enqueued: 0,
            in_flight: 0,
            released: 0,
            max_releases: None,
        }
    }

    /// Caps the number of releases (the page budget).
    pub fn with_budget(mut self, max: usize) -> Self {
        self.max_releases = Some(max);
        self
    }

    /// Queues an entry unless its canonical URL was ever queued before.
    pub fn enqueue(&mut self, entry: FrontierEntry) -> bool {
        if !self.seen.insert(entry.url.clone()) {
            return false;
        }
        self.enqueued += 1;
        let host = entry.host();
        let state = self.hosts.entry(host.clone()).or_default();
        if state.queue.is_empty() && !self.ring.contains(&host) {
            self.ring.push_back(host);
        }
        state.queue.push_back(entry);
        true
    }

    /// Marks a URL as known without queueing it (e.g. a redirect target).
    pub fn mark_seen(&mut self, url: &Url) {
        self.seen.insert(canonical(url.clone()));
    }

    /// Distinct URLs ever queued.
    pub fn enqueued(&self) -> usize {
        self.enqueued
    }

    pub fn queued(&self) -> usize {
        self.hosts.values().map(|h| h.queue.len()).sum()
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    pub fn released(&self) -> usize {
        self.released
    }

    fn budget_left(&self) -> bool {
        self.max_releases.is_none_or(|m| self.released < m)
    }

    pub fn next_url(&mut self, now: Instant) -> Next {
        if !self.budget_left() || self.ring.is_empty() {
            return if self.in_flight > 0 && self.budget_left() {
                Next::Wait(IDLE_POLL)
            } else {
                Next::Exhausted
            };
        }
        let mut soonest: Option<Duration> = None;
        for i in 0..self.ring.len() {
            let host = &self.ring[i];
            let state = &self.hosts[host];
            if state.busy {
                continue;
            }
            let ready_at = state.last_done.map(|t| t + self.delay);
            match ready_at {
                Some(t) if t > now => {
                    let wait = t - now;
                    soonest = Some(soonest.map_or(wait, |s| s.min(wait)));
                }
                _ => {
                    let host = self.ring.remove(i).expect("index in range");
                    let state = self.hosts.get_mut(&host).expect("ring hosts have state");
                    let entry = state
                        .queue
                        .pop_front()
                        .expect("ring hosts have queued entries");
                    state.busy = true;
                    if !state.queue.is_empty() {
                        self.ring.push_back(host);
                    }
                    self.in_flight += 1;
                    self.released += 1;
                    return Next::Ready(entry);
                }
            }
        }
        Next::Wait(soonest.unwrap_or(IDLE_POLL))
    }

    /// Signals that the fetch of a released entry finished.
    pub fn complete(&mut self, entry: &FrontierEntry, now: Instant) {
        let host = entry.host();
        if let Some(state) = self.hosts.get_mut(&host) {
            state.busy = false;
            state.last_done = Some(now);
            if !state.queue.is_empty() && !self.ring.contains(&host) {
                self.ring.push_back(host);
            }
        }
        self.in_flight = self.in_flight.saturating_sub(1);
    }

    /// Returns a release to the budget (the entry was never fetched).
    pub fn refund(&mut self) {
        self.released = self.released.saturating_sub(1);
    }
}
