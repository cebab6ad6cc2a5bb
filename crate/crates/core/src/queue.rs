//! Dispatch min-heap, eviction max-heap and the unsorted arrival buffer.
//!
//! Both heaps are [`IndexedHeap`]s: a binary heap of `(key, id)` entries plus
//! a position map from request id to heap slot, which gives `O(log n)`
//! insertion, pop and keyed deletion and `O(1)` peek.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::request::{eviction_priority, PriorityKey, RequestId};

const NOT_QUEUED: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueueError {
    #[error("queue is empty")]
    Empty,
    #[error("request {0} is not queued")]
    NotFound(RequestId),
    #[error("request {0} is already queued")]
    Duplicate(RequestId),
}

/// Binary min-heap keyed by `K`, addressable by request id.
#[derive(Debug, Clone)]
pub struct IndexedHeap<K> {
    entries: Vec<(K, RequestId)>,
    // request id -> slot in `entries`, or NOT_QUEUED
    positions: Vec<usize>,
}

impl<K> Default for IndexedHeap<K> {
    fn default() -> Self {
        IndexedHeap {
            entries: Vec::new(),
            positions: Vec::new(),
        }
    }
}

impl<K: Ord + Copy> IndexedHeap<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: RequestId) -> bool {
        self.positions
            .get(id.index())
            .is_some_and(|&p| p != NOT_QUEUED)
    }

    pub fn key_of(&self, id: RequestId) -> Option<K> {
        let pos = *self.positions.get(id.index())?;
        (pos != NOT_QUEUED).then(|| self.entries[pos].0)
    }

    pub fn insert(&mut self, id: RequestId, key: K) -> Result<(), QueueError> {
        if self.contains(id) {
            return Err(QueueError::Duplicate(id));
        }
        if self.positions.len() <= id.index() {
            self.positions.resize(id.index() + 1, NOT_QUEUED);
        }
        let slot = self.entries.len();
        self.entries.push((key, id));
        self.positions[id.index()] = slot;
        self.sift_up(slot);
        Ok(())
    }

    pub fn peek(&self) -> Option<(RequestId, K)> {
        self.entries.first().map(|&(k, id)| (id, k))
    }

    pub fn pop(&mut self) -> Option<(RequestId, K)> {
        if self.entries.is_empty() {
            return None;
        }
        Some(self.remove_at(0))
    }

    pub fn remove(&mut self, id: RequestId) -> Result<K, QueueError> {
        match self.positions.get(id.index()) {
            Some(&pos) if pos != NOT_QUEUED => Ok(self.remove_at(pos).1),
            _ => Err(QueueError::NotFound(id)),
        }
    }

    /// Replaces the key of a queued request, restoring heap order.
    pub fn update(&mut self, id: RequestId, key: K) -> Result<(), QueueError> {
        let pos = match self.positions.get(id.index()) {
            Some(&pos) if pos != NOT_QUEUED => pos,
            _ => return Err(QueueError::NotFound(id)),
        };
        let old = self.entries[pos].0;
        self.entries[pos].0 = key;
        if key < old {
            self.sift_up(pos);
        } else {
            self.sift_down(pos);
        }
        Ok(())
    }

    /// Inserts or re-keys.
    pub fn upsert(&mut self, id: RequestId, key: K) {
        if self.contains(id) {
            self.update(id, key).expect("present");
        } else {
            self.insert(id, key).expect("absent");
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (RequestId, K)> + '_ {
        self.entries.iter().map(|&(k, id)| (id, k))
    }

    /// Heap order holds and the position map is a bijection onto occupied
    /// slots.
    pub fn is_consistent(&self) -> bool {
        for i in 1..self.entries.len() {
            if self.entries[(i - 1) / 2].0 > self.entries[i].0 {
                return false;
            }
        }
        let mapped = self.positions.iter().filter(|&&p| p != NOT_QUEUED).count();
        mapped == self.entries.len()
            && self
                .entries
                .iter()
                .enumerate()
                .all(|(slot, (_, id))| self.positions.get(id.index()) == Some(&slot))
    }

    fn remove_at(&mut self, pos: usize) -> (RequestId, K) {
        let last = self.entries.len() - 1;
        self.swap(pos, last);
        let (key, id) = self.entries.pop().expect("nonempty");
        self.positions[id.index()] = NOT_QUEUED;
        if pos < self.entries.len() {
            // the moved element may need to go either way
            self.sift_down(pos);
            self.sift_up(pos);
        }
        (id, key)
    }

    #[inline]
    fn swap(&mut self, a: usize, b: usize) {
        self.positions[self.entries[a].1.index()] = b;
        self.positions[self.entries[b].1.index()] = a;
        self.entries.swap(a, b);
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.entries[i].0 < self.entries[parent].0 {
                self.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        let len = self.entries.len();
        loop {
            let left = 2 * i + 1;
            if left >= len {
                break;
            }
            let right = left + 1;
            let child = if right < len && self.entries[right].0 < self.entries[left].0 {
                right
            } else {
                left
            };
            if self.entries[child].0 < self.entries[i].0 {
                self.swap(i, child);
                i = child;
            } else {
                break;
            }
        }
    }
}

/// Requests ready for scheduling, smallest [`PriorityKey`] first.
#[derive(Debug, Clone, Default)]
pub struct DispatchQueue {
    heap: IndexedHeap<PriorityKey>,
}

impl DispatchQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: RequestId, key: PriorityKey) -> Result<(), QueueError> {
        self.heap.insert(id, key)
    }

    pub fn pop(&mut self) -> Result<(RequestId, PriorityKey), QueueError> {
        self.heap.pop().ok_or(QueueError::Empty)
    }

    pub fn peek(&self) -> Result<(RequestId, PriorityKey), QueueError> {
        self.heap.peek().ok_or(QueueError::Empty)
    }

    pub fn delete(&mut self, id: RequestId) -> Result<PriorityKey, QueueError> {
        self.heap.remove(id)
    }

    /// Reinserts requests taken out of the queue (e.g. unselected candidates).
    pub fn push_back<I>(&mut self, items: I) -> Result<(), QueueError>
    where
        I: IntoIterator<Item = (RequestId, PriorityKey)>,
    {
        for (id, key) in items {
            self.heap.insert(id, key)?;
        }
        Ok(())
    }

    pub fn contains(&self, id: RequestId) -> bool {
        self.heap.contains(id)
    }

    pub fn key_of(&self, id: RequestId) -> Option<PriorityKey> {
        self.heap.key_of(id)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = RequestId> + '_ {
        self.heap.iter().map(|(id, _)| id)
    }

    pub fn is_consistent(&self) -> bool {
        self.heap.is_consistent()
    }
}

/// Device-resident requests ordered for eviction: the root is the request
/// the dispatch order would serve last.
///
/// Keys are stored negated (see [`eviction_priority`]), so the min-heap over
/// negated keys is a max-heap over dispatch keys.
#[derive(Debug, Clone, Default)]
pub struct EvictionQueue {
    heap: IndexedHeap<PriorityKey>,
}

impl EvictionQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts with the request's *dispatch* key.
    pub fn insert(&mut self, id: RequestId, dispatch_key: PriorityKey) -> Result<(), QueueError> {
        self.heap.insert(id, eviction_priority(dispatch_key))
    }

    /// Inserts or re-keys with the request's dispatch key.
    pub fn upsert(&mut self, id: RequestId, dispatch_key: PriorityKey) {
        self.heap.upsert(id, eviction_priority(dispatch_key))
    }

    /// Pops the next victim, returning its dispatch key.
    pub fn pop(&mut self) -> Result<(RequestId, PriorityKey), QueueError> {
        self.heap
            .pop()
            .map(|(id, k)| (id, eviction_priority(k)))
            .ok_or(QueueError::Empty)
    }

    pub fn peek(&self) -> Result<(RequestId, PriorityKey), QueueError> {
        self.heap
            .peek()
            .map(|(id, k)| (id, eviction_priority(k)))
            .ok_or(QueueError::Empty)
    }

    pub fn delete(&mut self, id: RequestId) -> Result<PriorityKey, QueueError> {
        self.heap.remove(id).map(eviction_priority)
    }

    pub fn contains(&self, id: RequestId) -> bool {
        self.heap.contains(id)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = RequestId> + '_ {
        self.heap.iter().map(|(id, _)| id)
    }

    pub fn is_consistent(&self) -> bool {
        self.heap.is_consistent()
    }
}

/// Newly prediction-ready requests not yet in the dispatch queue, in append
/// order.
///
/// Single-producer/single-consumer: one context appends, one context drains.
/// This type is not internally synchronized; the `semsched` crate wraps it in
/// split producer/consumer handles for two-context use.
#[derive(Debug, Clone, Default)]
pub struct ArrivalBuffer {
    pending: Vec<RequestId>,
    members: BTreeSet<RequestId>,
}

impl ArrivalBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, id: RequestId) -> Result<(), QueueError> {
        if !self.members.insert(id) {
            return Err(QueueError::Duplicate(id));
        }
        self.pending.push(id);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn contains(&self, id: RequestId) -> bool {
        self.members.contains(&id)
    }

    pub fn as_slice(&self) -> &[RequestId] {
        &self.pending
    }

    /// Keys every buffered request with `key_of` and moves it into `heap`,
    /// leaving the buffer empty.
    pub fn drain_into<F>(&mut self, heap: &mut DispatchQueue, mut key_of: F) -> Result<(), QueueError>
    where
        F: FnMut(RequestId) -> PriorityKey,
    {
        for id in self.pending.drain(..) {
            heap.insert(id, key_of(id))?;
        }
        self.members.clear();
        Ok(())
    }
}
