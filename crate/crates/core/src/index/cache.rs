// SPDX-License-Identifier: Apache-2.0

//! LRU cache of reconstructed versions with access counters.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::Serialize;

use super::{IndexError, TemporalIndex};
use crate::table::Table;

pub const DEFAULT_CACHE_CAPACITY: usize = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheCounters {
    pub cold_reads: u64,
    pub log_reads: u64,
    pub hits: u64,
    pub reconstructions: u64,
}

#[derive(Debug, Default)]
struct CacheState {
    entries: HashMap<(String, u32), (Arc<Table>, u64)>,
    clock: u64,
    counters: CacheCounters,
}

impl CacheState {
    fn touch(&mut self, key: &(String, u32)) -> Option<Arc<Table>> {
        self.clock += 1;
        let clock = self.clock;
        self.entries.get_mut(key).map(|e| {
            e.1 = clock;
            e.0.clone()
        })
    }

    fn insert(&mut self, key: (String, u32), table: Arc<Table>, capacity: usize) {
        self.clock += 1;
        self.entries.insert(key, (table, self.clock));
        while self.entries.len() > capacity {
            let oldest = self
                .entries
                .iter()
                .min_by_key(|(_, (_, stamp))| *stamp)
                .map(|(k, _)| k.clone());
            match oldest {
                Some(k) => self.entries.remove(&k),
                None => break,
            };
        }
    }
}

/// Shared mutable state of the online phase. Every mutation happens under
/// one lock held for a single lookup or insert; reconstruction runs outside
/// it.
#[derive(Debug)]
pub struct VersionCache {
    capacity: usize,
    state: Mutex<CacheState>,
}

impl Default for VersionCache {
    fn default() -> Self {
        VersionCache::new(DEFAULT_CACHE_CAPACITY)
    }
}

impl VersionCache {
    /// `capacity` is clamped to at least 1.
    pub fn new(capacity: usize) -> VersionCache {
        VersionCache {
            capacity: capacity.max(1),
            state: Mutex::new(CacheState::default()),
        }
    }

    fn lock(&self) -> MutexGuard<'_, CacheState> {
        // A panic elsewhere cannot leave the map half-updated, so a poisoned
        // lock is still usable.
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, family_id: &str, ordinal: u32) -> bool {
        self.lock().entries.contains_key(&(family_id.to_string(), ordinal))
    }

    pub fn counters(&self) -> CacheCounters {
        self.lock().counters
    }

    pub fn clear(&self) {
        let mut s = self.lock();
        s.entries.clear();
    }
}

/// Nearest source to `target`: fewest logs, forward travel on ties.
fn nearest(target: u32, candidates: impl Iterator<Item = u32>) -> Option<u32> {
    candidates.min_by_key(|&s| (s.abs_diff(target), s > target))
}

impl TemporalIndex {
    /// Returns version `ordinal` of a family through `cache`.
    pub fn fetch_version(&self, cache: &VersionCache, family_id: &str, ordinal: u32) -> Result<Table, IndexError> {
        let chain = self.chain(family_id)?;
        self.descriptor(family_id, ordinal)?;
        let key = (family_id.to_string(), ordinal);

        let (source, cached_start) = {
            let mut s = cache.lock();
            if let Some(t) = s.touch(&key) {
                s.counters.hits += 1;
                drop(s);
                return Ok((*t).clone());
            }
            let cached = chain
                .iter()
                .map(|d| d.ordinal)
                .filter(|&k| s.entries.contains_key(&(family_id.to_string(), k)));
            let best_cached = nearest(ordinal, cached);
            let best_anchor = nearest(ordinal, chain.iter().filter(|d| d.anchor).map(|d| d.ordinal));
            let pick = match (best_cached, best_anchor) {
                (Some(c), Some(a)) => {
                    if (a.abs_diff(ordinal), a > ordinal) < (c.abs_diff(ordinal), c > ordinal) {
                        a
                    } else {
                        c
                    }
                }
                (Some(c), None) => c,
                (None, Some(a)) => a,
                (None, None) => return Err(IndexError::Corrupt(format!("family {family_id} has no anchor"))),
            };
            let start = s.touch(&(family_id.to_string(), pick));
            (pick, start)
        };

        let start = match cached_start {
            Some(t) => t,
            None => {
                let anchor = Arc::new(self.read_anchor(family_id, source)?);
                let mut s = cache.lock();
                s.counters.cold_reads += 1;
                s.insert((family_id.to_string(), source), anchor.clone(), cache.capacity);
                anchor
            }
        };
        if source == ordinal {
            return Ok((*start).clone());
        }
        let out = self.travel(family_id, source, ordinal, (*start).clone())?;
        let mut s = cache.lock();
        s.counters.log_reads += u64::from(source.abs_diff(ordinal));
        s.counters.reconstructions += 1;
        s.insert(key, Arc::new(out.clone()), cache.capacity);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_prefers_forward_on_ties() {
        assert_eq!(nearest(2, [0, 4].into_iter()), Some(0));
        assert_eq!(nearest(2, [3, 0].into_iter()), Some(3));
        assert_eq!(nearest(2, std::iter::empty()), None);
    }

    #[test]
    fn lru_eviction() {
        let mut s = CacheState::default();
        let t = Arc::new(Table::from_csv("x", b"a\n1\n").unwrap());
        s.insert(("f".into(), 0), t.clone(), 2);
        s.insert(("f".into(), 1), t.clone(), 2);
        s.touch(&("f".into(), 0));
        s.insert(("f".into(), 2), t, 2);
        assert!(s.entries.contains_key(&("f".into(), 0)));
        assert!(!s.entries.contains_key(&("f".into(), 1)));
        assert_eq!(s.entries.len(), 2);
    }
}
