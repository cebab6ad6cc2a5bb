//! Request, stage and priority-ordering types shared by every other module.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Dense request identifier. Ids double as slot indices in [`RequestTable`]
/// and in the heaps' position maps, so they are allocated `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
pub struct RequestId(pub u64);

impl RequestId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Rank in the graded order of urgency. Rank 0 is the most urgent layer
/// (ESI "Level 1 - Immediate"); larger ranks are strictly less urgent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
pub struct UrgencyLevel(u8);

impl UrgencyLevel {
    pub const MOST_URGENT: UrgencyLevel = UrgencyLevel(0);

    /// Returns `None` unless `rank < levels`.
    pub fn new(rank: u8, levels: u8) -> Option<Self> {
        (rank < levels).then_some(UrgencyLevel(rank))
    }

    /// Builds a level without a bound check. Callers that know the level
    /// count should prefer [`UrgencyLevel::new`].
    pub const fn from_rank(rank: u8) -> Self {
        UrgencyLevel(rank)
    }

    #[inline]
    pub const fn rank(self) -> u8 {
        self.0
    }
}

impl fmt::Display for UrgencyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Lifecycle stage of a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Stage {
    Waiting,
    Prefilling,
    Decoding,
    EvictedOffloaded,
    EvictedDiscarded,
    Completed,
}

impl Stage {
    /// Legal lifecycle edges.
    ///
    /// `Waiting -> Decoding` is the resume edge: a re-queued request whose
    /// prompt KV survived eviction goes straight back to decoding.
    pub fn can_transition_to(self, next: Stage) -> bool {
        use Stage::*;
        matches!(
            (self, next),
            (Waiting, Prefilling)
                | (Waiting, Decoding)
                | (Prefilling, Decoding)
                | (Prefilling, Waiting)
                | (Decoding, Completed)
                | (Prefilling, EvictedOffloaded)
                | (Prefilling, EvictedDiscarded)
                | (Decoding, EvictedOffloaded)
                | (Decoding, EvictedDiscarded)
                | (EvictedOffloaded, Waiting)
                | (EvictedDiscarded, Waiting)
        )
    }

    pub const ALL: [Stage; 6] = [
        Stage::Waiting,
        Stage::Prefilling,
        Stage::Decoding,
        Stage::EvictedOffloaded,
        Stage::EvictedDiscarded,
        Stage::Completed,
    ];
}

/// Predicted output-length bucket. Buckets split `[0, max_len]` into equal
/// ranges and are represented by their midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LengthBucket {
    pub index: u32,
    pub representative_len: u32,
}

/// Dispatch ordering: `(urgency, remaining seconds, arrival, id)` compared
/// lexicographically, smaller first.
///
/// Fields are signed so that [`eviction_priority`] can negate them.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PriorityKey {
    pub urgency: i64,
    pub remaining: f64,
    pub arrival: f64,
    pub id: i64,
}

impl PriorityKey {
    pub const fn new(urgency: i64, remaining: f64, arrival: f64, id: i64) -> Self {
        PriorityKey {
            urgency,
            remaining,
            arrival,
            id,
        }
    }

    /// The id this key was built for (the sign is dropped for eviction keys).
    pub fn request_id(&self) -> RequestId {
        RequestId(self.id.unsigned_abs())
    }
}

impl Ord for PriorityKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.urgency
            .cmp(&other.urgency)
            .then_with(|| self.remaining.total_cmp(&other.remaining))
            .then_with(|| self.arrival.total_cmp(&other.arrival))
            .then_with(|| self.id.cmp(&other.id))
    }
}

impl PartialOrd for PriorityKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for PriorityKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for PriorityKey {}

/// Dispatch key for a request. `f_t` must be nonnegative.
pub fn obtain_priority(
    f_e: UrgencyLevel,
    f_t: f64,
    arrival: f64,
    id: RequestId,
) -> PriorityKey {
    debug_assert!(f_t >= 0.0, "negative remaining time {f_t}");
    PriorityKey::new(i64::from(f_e.rank()), f_t, arrival, id.0 as i64)
}

/// Negates every component, reversing the order. The smallest eviction key
/// belongs to the request dispatched last.
///
/// `f64` negation flips the sign bit, which reverses `total_cmp` exactly, so
/// this is an involution.
pub fn eviction_priority(k: PriorityKey) -> PriorityKey {
    PriorityKey::new(-k.urgency, -k.remaining, -k.arrival, -k.id)
}

/// One user prompt with its ground truth, predictions, progress and KV
/// residency.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Request {
    pub id: RequestId,
    /// Arrival time `a_i`, seconds.
    pub arrival: f64,
    pub prompt_len: u32,
    pub true_output_len: u32,
    pub true_urgency: UrgencyLevel,
    /// `f_e`.
    pub predicted_urgency: UrgencyLevel,
    pub predicted_bucket: LengthBucket,
    /// `f_t`: estimated remaining computation time, seconds.
    pub remaining_estimate: f64,
    /// Prompt tokens whose KV exists on device or host.
    pub prefilled_tokens: u32,
    /// Output tokens generated so far. Output text is never lost on eviction.
    pub decoded_tokens: u32,
    pub kv_device_tokens: u64,
    pub kv_host_tokens: u64,
    /// `f_i`, seconds.
    pub finish_time: Option<f64>,
    pub stage: Stage,
    /// Has been admitted to at least one device iteration.
    pub started: bool,
}

impl Request {
    /// Fresh waiting request with exact predictions of urgency.
    pub fn new(
        id: RequestId,
        arrival: f64,
        prompt_len: u32,
        true_output_len: u32,
        true_urgency: UrgencyLevel,
    ) -> Self {
        Request {
            id,
            arrival,
            prompt_len,
            true_output_len,
            true_urgency,
            predicted_urgency: true_urgency,
            predicted_bucket: LengthBucket::default(),
            remaining_estimate: 0.0,
            prefilled_tokens: 0,
            decoded_tokens: 0,
            kv_device_tokens: 0,
            kv_host_tokens: 0,
            finish_time: None,
            stage: Stage::Waiting,
            started: false,
        }
    }

    /// The next device iteration for this request must (re)build prompt KV.
    #[inline]
    pub fn needs_prefill(&self) -> bool {
        self.prefilled_tokens < self.prompt_len
    }

    #[inline]
    pub fn is_device_resident(&self) -> bool {
        self.kv_device_tokens > 0
    }

    /// Decoded tokens whose KV is materialized somewhere (device or host).
    pub fn decode_kv_tokens(&self) -> u64 {
        (self.kv_device_tokens + self.kv_host_tokens)
            .saturating_sub(u64::from(self.prefilled_tokens))
    }

    /// Decoded tokens whose KV was discarded and must be recomputed.
    pub fn missing_decode_kv(&self) -> u64 {
        u64::from(self.decoded_tokens).saturating_sub(self.decode_kv_tokens())
    }

    /// Device slots held once the request is fully restored.
    pub fn restored_kv_tokens(&self) -> u64 {
        u64::from(self.prompt_len) + u64::from(self.decoded_tokens)
    }

    pub fn is_complete(&self) -> bool {
        self.stage == Stage::Completed
    }

    /// Moves to `next`, rejecting edges not in the lifecycle graph.
    pub fn transition(&mut self, next: Stage) -> Result<(), (Stage, Stage)> {
        if self.stage.can_transition_to(next) {
            self.stage = next;
            Ok(())
        } else {
            Err((self.stage, next))
        }
    }

    /// Checks the counter invariants.
    pub fn counters_consistent(&self) -> bool {
        self.prefilled_tokens <= self.prompt_len
            && self.decoded_tokens <= self.true_output_len
            && self.kv_device_tokens + self.kv_host_tokens
                <= u64::from(self.prefilled_tokens) + u64::from(self.decoded_tokens)
            && self.remaining_estimate >= 0.0
            && self.finish_time.is_none_or(|f| f >= self.arrival)
    }
}

/// Arena of requests indexed by their dense id.
#[derive(Debug, Clone, Default)]
pub struct RequestTable {
    requests: Vec<Request>,
}

impl RequestTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics unless the request's id equals the current length.
    pub fn push(&mut self, r: Request) {
        assert_eq!(r.id.index(), self.requests.len(), "request ids must be dense");
        self.requests.push(r);
    }

    pub fn from_requests(requests: Vec<Request>) -> Self {
        for (i, r) in requests.iter().enumerate() {
            assert_eq!(r.id.index(), i, "request ids must be dense");
        }
        RequestTable { requests }
    }

    #[inline]
    pub fn get(&self, id: RequestId) -> &Request {
        &self.requests[id.index()]
    }

    #[inline]
    pub fn get_mut(&mut self, id: RequestId) -> &mut Request {
        &mut self.requests[id.index()]
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Request> {
        self.requests.iter()
    }

    pub fn into_vec(self) -> Vec<Request> {
        self.requests
    }
}
