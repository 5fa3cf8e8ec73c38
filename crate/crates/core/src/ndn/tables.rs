use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::engine::SimTime;

use super::packet::{Data, FaceId};
use super::Name;

#[derive(Clone, Debug)]
pub struct PitEntry {
    pub params_digest: u64,
    pub incoming_faces: BTreeSet<FaceId>,
    pub nonces: Vec<u64>,
    pub created_at: SimTime,
    pub expiry: SimTime,
}

/// Pending Interest Table keyed by (name, selector digest).
#[derive(Debug, Default)]
pub struct Pit {
    by_name: HashMap<Name, Vec<PitEntry>>,
    len: usize,
}

pub enum PitInsert {
    Created,
    Aggregated,
    /// Same key and same nonce: the Interest looped back.
    DuplicateNonce,
}

impl Pit {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, name: &Name, digest: u64, now: SimTime) -> Option<&PitEntry> {
        self.by_name
            .get(name)?
            .iter()
            .find(|e| e.params_digest == digest && e.expiry > now)
    }

    /// Whether any entry for `name` is still pending.
    pub fn has_live(&self, name: &Name, now: SimTime) -> bool {
        self.by_name
            .get(name)
            .is_some_and(|v| v.iter().any(|e| e.expiry > now))
    }

    /// Aggregate into a live entry or create a new one.
    pub fn insert(
        &mut self,
        name: &Name,
        digest: u64,
        face: FaceId,
        nonce: u64,
        now: SimTime,
        expiry: SimTime,
    ) -> PitInsert {
        let entries = self.by_name.entry(name.clone()).or_default();
        let before = entries.len();
        entries.retain(|e| e.expiry > now);
        self.len -= before - entries.len();
        if let Some(e) = entries.iter_mut().find(|e| e.params_digest == digest) {
            if e.nonces.contains(&nonce) {
                return PitInsert::DuplicateNonce;
            }
            e.incoming_faces.insert(face);
            e.nonces.push(nonce);
            return PitInsert::Aggregated;
        }
        entries.push(PitEntry {
            params_digest: digest,
            incoming_faces: BTreeSet::from([face]),
            nonces: vec![nonce],
            created_at: now,
            expiry,
        });
        self.len += 1;
        PitInsert::Created
    }

    /// Remove every live entry for `name` and return the union of their
    /// incoming faces. Expired entries are discarded without matching.
    pub fn satisfy(&mut self, name: &Name, now: SimTime) -> BTreeSet<FaceId> {
        let mut faces = BTreeSet::new();
        if let Some(entries) = self.by_name.remove(name) {
            self.len -= entries.len();
            for e in entries {
                if e.expiry > now {
                    faces.extend(e.incoming_faces);
                }
            }
        }
        faces
    }

    pub fn purge_expired(&mut self, now: SimTime) -> usize {
        let mut removed = 0;
        self.by_name.retain(|_, entries| {
            let before = entries.len();
            entries.retain(|e| e.expiry > now);
            removed += before - entries.len();
            !entries.is_empty()
        });
        self.len -= removed;
        removed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FibEntry {
    pub prefix: Name,
    /// Ordered best-first: (face, cost in µs).
    pub faces: Vec<(FaceId, u64)>,
}

#[derive(Debug, Default)]
struct FibNode {
    entry: Option<FibEntry>,
    children: HashMap<Arc<str>, FibNode>,
}

/// Forwarding Information Base with longest-prefix match over a component trie.
#[derive(Debug, Default)]
pub struct Fib {
    root: FibNode,
    len: usize,
}

impl Fib {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Install or replace the entry for `prefix`.
    pub fn insert(&mut self, entry: FibEntry) {
        let mut node = &mut self.root;
        for c in entry.prefix.components() {
            node = node.children.entry(c.clone()).or_default();
        }
        if node.entry.is_none() {
            self.len += 1;
        }
        node.entry = Some(entry);
    }

    pub fn longest_prefix_match(&self, name: &Name) -> Option<&FibEntry> {
        let mut node = &self.root;
        let mut best = node.entry.as_ref();
        for c in name.components() {
            match node.children.get(c) {
                Some(next) => {
                    node = next;
                    if node.entry.is_some() {
                        best = node.entry.as_ref();
                    }
                }
                None => break,
            }
        }
        best
    }

    pub fn entries(&self) -> Vec<&FibEntry> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            if let Some(e) = &n.entry {
                out.push(e);
            }
            stack.extend(n.children.values());
        }
        out.sort_by(|a, b| a.prefix.cmp(&b.prefix));
        out
    }
}

#[derive(Clone, Debug)]
pub struct CsEntry {
    pub data: Data,
    pub inserted_at: SimTime,
    stamp: u64,
}

/// LRU content store with per-Data freshness.
#[derive(Debug)]
pub struct ContentStore {
    capacity: usize,
    map: HashMap<Name, CsEntry>,
    lru: BTreeMap<u64, Name>,
    clock: u64,
}

impl ContentStore {
    pub fn new(capacity: usize) -> Self {
        ContentStore {
            capacity,
            map: HashMap::new(),
            lru: BTreeMap::new(),
            clock: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Fresh exact-name hit, refreshing recency. Stale entries are evicted.
    pub fn lookup(&mut self, name: &Name, now: SimTime) -> Option<Data> {
        let entry = self.map.get(name)?;
        if now.saturating_sub(entry.inserted_at) > entry.data.freshness {
            let stamp = entry.stamp;
            self.map.remove(name);
            self.lru.remove(&stamp);
            return None;
        }
        self.clock += 1;
        let stamp = self.clock;
        let entry = self.map.get_mut(name).expect("present");
        self.lru.remove(&entry.stamp);
        entry.stamp = stamp;
        self.lru.insert(stamp, name.clone());
        Some(entry.data.clone())
    }

    pub fn insert(&mut self, data: Data, now: SimTime) {
        if self.capacity == 0 {
            return;
        }
        self.clock += 1;
        let stamp = self.clock;
        let name = data.name.clone();
        if let Some(old) = self.map.insert(
            name.clone(),
            CsEntry {
                data,
                inserted_at: now,
                stamp,
            },
        ) {
            self.lru.remove(&old.stamp);
        }
        self.lru.insert(stamp, name);
        while self.map.len() > self.capacity {
            let (_, victim) = self.lru.pop_first().expect("non-empty");
            self.map.remove(&victim);
        }
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.map.contains_key(name)
    }
}
