//! Run output: one record per request and a time-ordered event log.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::kv::PrefillAction;
use crate::request::{RequestId, UrgencyLevel};
use crate::scheduler::BatchKind;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RequestRecord {
    pub id: RequestId,
    pub arrival: f64,
    /// Predictions available to the scheduler.
    pub ready: Option<f64>,
    pub first_scheduled: Option<f64>,
    pub finish: Option<f64>,
    pub prompt_tokens: u32,
    pub output_tokens: u32,
    pub generated_tokens: u32,
    pub evictions: u32,
    pub true_urgency: UrgencyLevel,
    pub predicted_urgency: UrgencyLevel,
    pub predicted_len: u32,
    pub unservable: bool,
}

impl RequestRecord {
    pub fn is_completed(&self) -> bool {
        self.finish.is_some()
    }

    /// `f_i - a_i`.
    pub fn latency(&self) -> Option<f64> {
        self.finish.map(|f| f - self.arrival)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(tag = "event", rename_all = "snake_case"))]
pub enum TraceEvent {
    Arrival {
        time: f64,
        id: RequestId,
    },
    PredictionReady {
        time: f64,
        ids: Vec<RequestId>,
    },
    IterationStart {
        time: f64,
        kind: BatchKind,
        ids: Vec<RequestId>,
        duration: f64,
        mem_used: u64,
        mem_reserved: u64,
    },
    IterationEnd {
        time: f64,
        ids: Vec<RequestId>,
        mem_used: u64,
    },
    /// A newly visible request outranked the running batch.
    IterationAborted {
        time: f64,
        ids: Vec<RequestId>,
        mem_used: u64,
    },
    Eviction {
        time: f64,
        victim: RequestId,
        prefill: PrefillAction,
        decode_saved: u64,
        decode_discarded: u64,
        remaining_before: f64,
        remaining_after: f64,
        mem_used: u64,
    },
    AdmissionFailure {
        time: f64,
        id: RequestId,
        mem_used: u64,
    },
    Complete {
        time: f64,
        record: RequestRecord,
        mem_used: u64,
    },
    /// The request alone exceeds device capacity.
    Unservable {
        time: f64,
        id: RequestId,
        mem_used: u64,
    },
    RunEnd {
        time: f64,
        mem_used: u64,
    },
}

impl TraceEvent {
    pub fn time(&self) -> f64 {
        match self {
            TraceEvent::Arrival { time, .. }
            | TraceEvent::PredictionReady { time, .. }
            | TraceEvent::IterationStart { time, .. }
            | TraceEvent::IterationEnd { time, .. }
            | TraceEvent::IterationAborted { time, .. }
            | TraceEvent::Eviction { time, .. }
            | TraceEvent::AdmissionFailure { time, .. }
            | TraceEvent::Complete { time, .. }
            | TraceEvent::Unservable { time, .. }
            | TraceEvent::RunEnd { time, .. } => *time,
        }
    }

    /// Device slots in use after the event, where recorded.
    pub fn mem_used(&self) -> Option<u64> {
        match self {
            TraceEvent::IterationStart { mem_used, mem_reserved, .. } => Some(mem_used + mem_reserved),
            TraceEvent::IterationEnd { mem_used, .. }
            | TraceEvent::IterationAborted { mem_used, .. }
            | TraceEvent::Eviction { mem_used, .. }
            | TraceEvent::AdmissionFailure { mem_used, .. }
            | TraceEvent::Complete { mem_used, .. }
            | TraceEvent::Unservable { mem_used, .. }
            | TraceEvent::RunEnd { mem_used, .. } => Some(*mem_used),
            TraceEvent::Arrival { .. } | TraceEvent::PredictionReady { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Trace {
    /// Indexed by request id.
    pub records: Vec<RequestRecord>,
    pub events: Vec<TraceEvent>,
    pub memory_capacity: u64,
    /// Highest device occupancy reached, reservations included.
    pub peak_memory: u64,
    pub evictions: u64,
    pub aborted_iterations: u64,
    pub end_time: f64,
}

impl Trace {
    pub fn completed(&self) -> impl Iterator<Item = &RequestRecord> {
        self.records.iter().filter(|r| r.is_completed())
    }

    pub fn unservable(&self) -> impl Iterator<Item = &RequestRecord> {
        self.records.iter().filter(|r| r.unservable)
    }
}
