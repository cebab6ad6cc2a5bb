//! Waiting-time metrics, the relative-ordering audit and run summaries.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::request::RequestId;
use crate::trace::{RequestRecord, Trace};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no completed requests")]
    Empty,
    #[error("{} requests unfinished, first {}", .0.len(), .0[0])]
    Unfinished(Vec<RequestId>),
    #[error("no completed requests at urgency level {0}")]
    AbsentLevel(u8),
}

/// Which urgency the audit compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "lowercase"))]
pub enum Ranking {
    #[default]
    True,
    Predicted,
}

/// Completed records, or the ids still running. Unservable requests are
/// excluded rather than treated as unfinished.
fn finished(records: &[RequestRecord]) -> Result<Vec<&RequestRecord>, MetricsError> {
    let unfinished: Vec<_> = records
        .iter()
        .filter(|r| !r.is_completed() && !r.unservable)
        .map(|r| r.id)
        .collect();
    if !unfinished.is_empty() {
        return Err(MetricsError::Unfinished(unfinished));
    }
    let done: Vec<_> = records.iter().filter(|r| r.is_completed()).collect();
    if done.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(done)
}

fn wait(r: &RequestRecord) -> f64 {
    r.latency().expect("completed")
}

fn normalized(r: &RequestRecord) -> f64 {
    wait(r) / f64::from(r.generated_tokens.max(1))
}

/// Mean of `f_i - a_i` over completed requests.
pub fn average_waiting_time(records: &[RequestRecord]) -> Result<f64, MetricsError> {
    let done = finished(records)?;
    Ok(done.iter().map(|r| wait(r)).sum::<f64>() / done.len() as f64)
}

/// Mean over one true-urgency level of waiting time per generated token.
pub fn normalized_waiting_time(records: &[RequestRecord], level: u8) -> Result<f64, MetricsError> {
    let done = finished(records)?;
    let (sum, count) = done
        .iter()
        .filter(|r| r.true_urgency.rank() == level)
        .fold((0.0, 0usize), |(s, c), r| (s + normalized(r), c + 1));
    if count == 0 {
        return Err(MetricsError::AbsentLevel(level));
    }
    Ok(sum / count as f64)
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AuditResult {
    /// `(i, j)`: `i` finished first, after `j` had arrived, while less urgent.
    pub violations: Vec<(RequestId, RequestId)>,
    /// Ordered pairs with `f_i < f_j`.
    pub comparable_pairs: u64,
}

impl AuditResult {
    pub fn rate(&self) -> f64 {
        if self.comparable_pairs == 0 {
            0.0
        } else {
            self.violations.len() as f64 / self.comparable_pairs as f64
        }
    }
}

/// Lists every pair where a less urgent request finished before a more
/// urgent one that had already arrived. Incomplete records are skipped.
pub fn constraint_audit(records: &[RequestRecord], ranking: Ranking) -> AuditResult {
    let rank = |r: &RequestRecord| match ranking {
        Ranking::True => r.true_urgency,
        Ranking::Predicted => r.predicted_urgency,
    };
    let mut done: Vec<(f64, &RequestRecord)> =
        records.iter().filter_map(|r| r.finish.map(|f| (f, r))).collect();
    done.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
    let mut out = AuditResult::default();
    for (k, &(fi, ri)) in done.iter().enumerate() {
        let later = done[k + 1..].iter().skip_while(|(fj, _)| *fj <= fi);
        for &(_, rj) in later {
            out.comparable_pairs += 1;
            if fi >= rj.arrival && rank(ri) > rank(rj) {
                out.violations.push((ri.id, rj.id));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LevelStats {
    pub urgency: u8,
    pub requests: usize,
    pub norm_wait_s_per_tok: f64,
    pub avg_wait_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunReport {
    pub policy: String,
    pub profile: String,
    pub seed: u64,
    /// One entry per level present among completed requests.
    pub levels: Vec<LevelStats>,
    pub avg_wait_s: f64,
    /// Mean of the per-level normalized waiting times.
    pub norm_wait_level_mean: f64,
    /// Mean normalized waiting time over all completed requests.
    pub norm_wait_request_mean: f64,
    pub violations: u64,
    pub violation_rate: f64,
    pub evictions: u64,
    pub unservable: u64,
    pub aborted_iterations: u64,
    pub peak_memory: u64,
    pub end_time: f64,
    pub config: ScenarioConfig,
}

impl RunReport {
    pub fn from_trace(trace: &Trace, cfg: &ScenarioConfig) -> Result<Self, MetricsError> {
        let done = finished(&trace.records)?;
        let max_level = done.iter().map(|r| r.true_urgency.rank()).max().unwrap_or(0);
        let mut levels = Vec::new();
        for level in 0..=max_level {
            let members: Vec<_> = done.iter().filter(|r| r.true_urgency.rank() == level).collect();
            if members.is_empty() {
                continue;
            }
            let n = members.len() as f64;
            levels.push(LevelStats {
                urgency: level,
                requests: members.len(),
                norm_wait_s_per_tok: members.iter().map(|r| normalized(r)).sum::<f64>() / n,
                avg_wait_s: members.iter().map(|r| wait(r)).sum::<f64>() / n,
            });
        }
        let audit = constraint_audit(&trace.records, Ranking::True);
        let total = done.len() as f64;
        Ok(RunReport {
            policy: cfg.policy.name().into(),
            profile: cfg.profile.clone(),
            seed: cfg.seed,
            avg_wait_s: done.iter().map(|r| wait(r)).sum::<f64>() / total,
            norm_wait_level_mean: levels.iter().map(|l| l.norm_wait_s_per_tok).sum::<f64>()
                / levels.len() as f64,
            norm_wait_request_mean: done.iter().map(|r| normalized(r)).sum::<f64>() / total,
            levels,
            violations: audit.violations.len() as u64,
            violation_rate: audit.rate(),
            evictions: trace.evictions,
            unservable: trace.unservable().count() as u64,
            aborted_iterations: trace.aborted_iterations,
            peak_memory: trace.peak_memory,
            end_time: trace.end_time,
            config: cfg.clone(),
        })
    }

    pub fn level(&self, urgency: u8) -> Option<&LevelStats> {
        self.levels.iter().find(|l| l.urgency == urgency)
    }
}
