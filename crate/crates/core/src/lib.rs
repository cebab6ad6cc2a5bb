//! Urgency-aware scheduling for LLM serving.
//!
//! Requests carry a predicted urgency level and an estimate of their remaining
//! compute time. A min-heap orders them for dispatch, a complementary max-heap
//! orders device-resident requests for KV eviction, and each device iteration
//! is chosen with stage awareness so that low-priority prefill work never
//! blocks higher-priority decoding.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here runs in virtual
//! time; file formats, the CLI and sweeps live in the `semsched` crate.
//!
//! ```text
//! arrivals ──▶ predictor ──▶ ArrivalBuffer ──drain──▶ DispatchQueue (min)
//!                                                        │
//!                         stage_aware_schedule ◀─────────┘
//!                                 │
//!                   priority_based_eviction ◀── EvictionQueue (max)
//!                                 │
//!                           device iteration
//! ```

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod config;
pub mod cost;
pub mod engine;
pub mod kv;
pub mod metrics;
pub mod predictor;
pub mod queue;
pub mod request;
pub mod scheduler;
pub mod trace;
pub mod workload;

pub use config::{ConfigError, KvOptions, Policy, PreemptionMode, ScenarioConfig};
pub use cost::GpuProfile;
pub use engine::{run, run_requests, SimError};
pub use kv::{DeviceMemory, EvictionDecision, PrefillAction};
pub use metrics::{AuditResult, MetricsError, Ranking, RunReport};
pub use predictor::{ErrorDistance, ErrorModel, PredictorConfig, PredictorStrategy};
pub use queue::{ArrivalBuffer, DispatchQueue, EvictionQueue, IndexedHeap, QueueError};
pub use request::{
    LengthBucket, PriorityKey, Request, RequestId, RequestTable, Stage, UrgencyLevel,
};
pub use scheduler::{Batch, BatchKind};
pub use trace::{RequestRecord, Trace, TraceEvent};
pub use workload::WorkloadSpec;
