//! Router content stores with LRU or LFU replacement.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::catalog::SegmentId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Eviction {
    Lru,
    /// Least frequently used; ties go to the least recently used.
    Lfu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Meta {
    size: u64,
    freq: u64,
    last: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContentStore {
    capacity: u64,
    occupancy: u64,
    eviction: Eviction,
    /// Loaded from a placement; lookups and inserts leave it untouched.
    frozen: bool,
    clock: u64,
    entries: BTreeMap<SegmentId, Meta>,
    /// Eviction order: first element goes first.
    order: BTreeSet<(u64, u64, SegmentId)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LookupInsert {
    pub hit: bool,
    pub evicted: Vec<SegmentId>,
}

impl ContentStore {
    pub fn new(capacity: u64, eviction: Eviction) -> Self {
        ContentStore {
            capacity,
            occupancy: 0,
            eviction,
            frozen: false,
            clock: 0,
            entries: BTreeMap::new(),
            order: BTreeSet::new(),
        }
    }

    /// A static store holding `segments`. Entries beyond the capacity are
    /// rejected so the occupancy bound still holds.
    pub fn frozen(capacity: u64, segments: impl IntoIterator<Item = (SegmentId, u64)>) -> Self {
        let mut cs = ContentStore::new(capacity, Eviction::Lru);
        for (s, size) in segments {
            if !cs.entries.contains_key(&s) && cs.occupancy + size <= capacity {
                cs.put(s, size);
            }
        }
        cs.frozen = true;
        cs
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn occupancy(&self) -> u64 {
        self.occupancy
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, s: &SegmentId) -> bool {
        self.entries.contains_key(s)
    }

    pub fn segments(&self) -> impl Iterator<Item = SegmentId> + '_ {
        self.entries.keys().copied()
    }

    fn key(&self, s: SegmentId, m: &Meta) -> (u64, u64, SegmentId) {
        match self.eviction {
            Eviction::Lru => (m.last, 0, s),
            Eviction::Lfu => (m.freq, m.last, s),
        }
    }

    fn put(&mut self, s: SegmentId, size: u64) {
        self.clock += 1;
        let m = Meta { size, freq: 1, last: self.clock };
        self.order.insert(self.key(s, &m));
        self.entries.insert(s, m);
        self.occupancy += size;
    }

    /// Hit test; on a hit the replacement metadata is refreshed.
    pub fn lookup(&mut self, s: SegmentId) -> bool {
        if self.frozen {
            return self.entries.contains_key(&s);
        }
        let Some(mut m) = self.entries.get(&s).copied() else {
            return false;
        };
        self.order.remove(&self.key(s, &m));
        self.clock += 1;
        m.freq += 1;
        m.last = self.clock;
        self.order.insert(self.key(s, &m));
        self.entries.insert(s, m);
        true
    }

    /// Inserts a missing segment, evicting by policy until it fits. Segments
    /// larger than the whole store are never cached.
    pub fn insert(&mut self, s: SegmentId, size: u64) -> Vec<SegmentId> {
        let mut evicted = Vec::new();
        if self.frozen || size > self.capacity || self.entries.contains_key(&s) {
            return evicted;
        }
        while self.occupancy + size > self.capacity {
            let victim = *self.order.iter().next().expect("non-empty while over capacity");
            self.order.remove(&victim);
            let m = self.entries.remove(&victim.2).expect("ordered entries are stored");
            self.occupancy -= m.size;
            evicted.push(victim.2);
        }
        self.put(s, size);
        evicted
    }
}

/// Lookup; on a miss, cache the segment (cache-everything behaviour).
pub fn cs_lookup_insert(cs: &mut ContentStore, s: SegmentId, size: u64) -> LookupInsert {
    if cs.lookup(s) {
        return LookupInsert { hit: true, evicted: Vec::new() };
    }
    LookupInsert { hit: false, evicted: cs.insert(s, size) }
}
