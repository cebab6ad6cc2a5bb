//! Scenario configuration and scheduling policies.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::cost::{CostError, GpuProfile};
use crate::predictor::PredictorConfig;
use crate::request::{obtain_priority, PriorityKey, Request};
use crate::workload::WorkloadSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown GPU profile `{0}`")]
    UnknownProfile(String),
    #[error(transparent)]
    Profile(#[from] CostError),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid {
        field: &'static str,
        reason: &'static str,
    },
}

pub(crate) fn invalid(field: &'static str, reason: &'static str) -> ConfigError {
    ConfigError::Invalid { field, reason }
}

/// Ordering policy driving both heaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "lowercase"))]
pub enum Policy {
    /// Predicted urgency, then estimated remaining time, with stage-aware
    /// batching.
    #[default]
    Semantic,
    /// First come first served. Non-preemptive: started requests always
    /// precede unstarted ones.
    Fcfs,
    /// Shortest estimated remaining time, ignoring urgency.
    Sjf,
    /// Highest predicted urgency first, arrival order within a level.
    Hpjf,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Semantic, Policy::Hpjf, Policy::Sjf, Policy::Fcfs];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Semantic => "semantic",
            Policy::Fcfs => "fcfs",
            Policy::Sjf => "sjf",
            Policy::Hpjf => "hpjf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Policy::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s))
    }

    /// Dispatch key under this policy. All keys end in `(arrival, id)`.
    pub fn key(self, r: &Request) -> PriorityKey {
        let id = r.id.0 as i64;
        match self {
            Policy::Semantic => {
                obtain_priority(r.predicted_urgency, r.remaining_estimate, r.arrival, r.id)
            }
            Policy::Sjf => PriorityKey::new(0, r.remaining_estimate, r.arrival, id),
            Policy::Hpjf => {
                PriorityKey::new(i64::from(r.predicted_urgency.rank()), 0.0, r.arrival, id)
            }
            Policy::Fcfs => PriorityKey::new(i64::from(!r.started), 0.0, r.arrival, id),
        }
    }

    pub fn stage_aware(self) -> bool {
        self == Policy::Semantic
    }

    pub fn preemptive(self) -> bool {
        self != Policy::Fcfs
    }
}

/// When a running batch may be displaced by newly visible requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum PreemptionMode {
    /// Only between iterations; an iteration in flight always completes.
    #[default]
    IterationBoundary,
    /// A newly visible request that outranks a member of the in-flight batch
    /// cancels the iteration; its partial work is lost.
    InFlight,
}

/// How a decode iteration over several requests is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "lowercase"))]
pub enum DecodeBatchCost {
    /// Members decode in parallel; the slowest step sets the duration.
    #[default]
    Max,
    /// Members decode one after another.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct KvOptions {
    /// Saved decode KV is dropped when the prompt KV it depends on is
    /// discarded.
    pub dependency_rule: bool,
    /// Charge `beta_save` for offloaded tokens to the device timeline.
    pub synchronous_save: bool,
}

impl Default for KvOptions {
    fn default() -> Self {
        KvOptions {
            dependency_rule: true,
            synchronous_save: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct ScenarioConfig {
    pub policy: Policy,
    /// Built-in profile name or the name of an entry in `custom_profiles`.
    pub profile: String,
    /// Extra or overriding profiles; looked up before the built-ins.
    pub custom_profiles: Vec<GpuProfile>,
    /// Scheduler batch size `b`.
    pub batch_size: usize,
    /// Device KV capacity in token slots.
    pub memory_capacity: u64,
    pub workload: WorkloadSpec,
    pub predictor: PredictorConfig,
    pub kv: KvOptions,
    pub decode_batch_cost: DecodeBatchCost,
    pub preemption: PreemptionMode,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            policy: Policy::Semantic,
            profile: String::from("a100_qwen7b"),
            custom_profiles: Vec::new(),
            batch_size: 16,
            memory_capacity: 1_000_000,
            workload: WorkloadSpec::default(),
            predictor: PredictorConfig::default(),
            kv: KvOptions::default(),
            decode_batch_cost: DecodeBatchCost::Max,
            preemption: PreemptionMode::IterationBoundary,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn resolve_profile(&self) -> Result<GpuProfile, ConfigError> {
        let p = self
            .custom_profiles
            .iter()
            .find(|p| p.name == self.profile)
            .cloned()
            .or_else(|| GpuProfile::builtin(&self.profile))
            .ok_or_else(|| ConfigError::UnknownProfile(self.profile.clone()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.resolve_profile()?;
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be at least 1"));
        }
        if self.memory_capacity == 0 {
            return Err(invalid("memory_capacity", "must be positive"));
        }
        self.workload.validate()?;
        self.predictor.validate()?;
        Ok(())
    }
}
