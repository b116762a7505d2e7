//! Message accounting.

use std::collections::BTreeMap;
use std::sync::Mutex;

/// Sent and received counts of one message kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KindCount {
    pub sent: u64,
    pub received: u64,
}

/// Point-in-time copy of an instance's counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatsSnapshot {
    pub kinds: BTreeMap<String, KindCount>,
    /// Rules fired for remote callers plus rules shipped in rules documents.
    pub rules_served: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    /// Undecodable messages received.
    pub errors: u64,
}

impl StatsSnapshot {
    pub fn sent(&self, kind: &str) -> u64 {
        self.kinds.get(kind).map_or(0, |k| k.sent)
    }

    pub fn received(&self, kind: &str) -> u64 {
        self.kinds.get(kind).map_or(0, |k| k.received)
    }

    pub fn total_sent(&self) -> u64 {
        self.kinds.values().map(|k| k.sent).sum()
    }

    pub fn total_received(&self) -> u64 {
        self.kinds.values().map(|k| k.received).sum()
    }
}

#[derive(Debug, Default)]
pub struct Stats {
    inner: Mutex<StatsSnapshot>,
}

impl Stats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        self.inner.lock().unwrap().clone()
    }

    pub(crate) fn sent(&self, kind: &str) {
        self.inner.lock().unwrap().kinds.entry(kind.to_string()).or_default().sent += 1;
    }

    pub(crate) fn received(&self, kind: &str) {
        self.inner.lock().unwrap().kinds.entry(kind.to_string()).or_default().received += 1;
    }

    pub(crate) fn rules_served(&self, n: u64) {
        self.inner.lock().unwrap().rules_served += n;
    }

    pub(crate) fn cache(&self, hit: bool) {
        let mut s = self.inner.lock().unwrap();
        if hit {
            s.cache_hits += 1;
        } else {
            s.cache_misses += 1;
        }
    }

    pub(crate) fn error(&self) {
        self.inner.lock().unwrap().errors += 1;
    }
}
