//! Noisy urgency and length predictors, and the timing of the shared
//! prediction model.
//!
//! Every request draws the same two uniforms from each predictor stream
//! whatever the error rate, so runs that differ only in error rate see the
//! same workload and perturb a nested set of requests.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::config::{invalid, ConfigError};
use crate::request::{LengthBucket, Request, RequestId, UrgencyLevel};
use crate::workload::bucketize;

const URGENCY_STREAM: u64 = 1;
const LENGTH_STREAM: u64 = 2;

/// How large a perturbation is, given error rate `e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum ErrorDistance {
    /// A perturbed prediction moves `max(1, round(e * range))` away, so the
    /// normalized distance of perturbed predictions is about `e`.
    #[default]
    PerPerturbed,
    /// A perturbed prediction moves the full range, so the normalized
    /// distance averaged over all requests is about `e`.
    OverAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorModel {
    /// Fraction of predictions perturbed, in `[0, 1]`.
    pub error_rate: f64,
    pub distance: ErrorDistance,
}

impl ErrorModel {
    pub fn new(error_rate: f64, distance: ErrorDistance) -> Self {
        ErrorModel { error_rate, distance }
    }

    fn displacement(&self, range: u32) -> i64 {
        match self.distance {
            ErrorDistance::PerPerturbed => {
                (libm::round(self.error_rate * f64::from(range)) as i64).max(1)
            }
            ErrorDistance::OverAll => i64::from(range).max(1),
        }
    }
}

/// Batching rule for the prediction model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum PredictorStrategy {
    /// Each arrival group is predicted at once, split into invocations of at
    /// most `batch_size`.
    #[default]
    Immediate,
    /// Requests wait until `batch_size` are pending. A final partial batch is
    /// flushed at the last arrival.
    FullBatching,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct PredictorConfig {
    pub strategy: PredictorStrategy,
    /// Seconds per invocation.
    pub latency_s: f64,
    pub batch_size: usize,
    pub urgency_error: f64,
    pub length_error: f64,
    pub error_distance: ErrorDistance,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            strategy: PredictorStrategy::Immediate,
            latency_s: 0.0,
            batch_size: 64,
            urgency_error: 0.0,
            length_error: 0.0,
            error_distance: ErrorDistance::PerPerturbed,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.latency_s.is_finite() && self.latency_s >= 0.0) {
            return Err(invalid("predictor.latency_s", "must be nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(invalid("predictor.batch_size", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.urgency_error) {
            return Err(invalid("predictor.urgency_error", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.length_error) {
            return Err(invalid("predictor.length_error", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Moves `truth` by `d` in the drawn direction, clamped to `[0, max]`. If the
/// clamp cancels the move entirely it goes the other way instead.
fn displace(truth: i64, d: i64, up: bool, max: i64) -> i64 {
    let step = |up: bool| (if up { truth + d } else { truth - d }).clamp(0, max);
    let t = step(up);
    if t == truth {
        step(!up)
    } else {
        t
    }
}

/// Predicted urgency. With probability `error_rate` the level is displaced,
/// otherwise the truth is returned.
pub fn predict_urgency(
    truth: UrgencyLevel,
    levels: u8,
    em: &ErrorModel,
    rng: &mut impl Rng,
) -> UrgencyLevel {
    let u: f64 = rng.gen();
    let up: bool = rng.gen();
    if u >= em.error_rate || levels <= 1 {
        return truth;
    }
    let max = i64::from(levels - 1);
    let d = em.displacement(u32::from(levels));
    UrgencyLevel::from_rank(displace(i64::from(truth.rank()), d, up, max) as u8)
}

/// Predicted length bucket. A perturbed prediction shifts the length before
/// bucketing, so small errors may stay within the same bucket.
pub fn predict_length_bucket(
    true_len: u32,
    max_len: u32,
    buckets: u32,
    em: &ErrorModel,
    rng: &mut impl Rng,
) -> LengthBucket {
    let u: f64 = rng.gen();
    let up: bool = rng.gen();
    let truth = true_len.min(max_len);
    if u >= em.error_rate {
        return bucketize(true_len, max_len, buckets);
    }
    let d = em.displacement(max_len);
    let shifted = (if up { i64::from(truth) + d } else { i64::from(truth) - d })
        .clamp(0, i64::from(max_len));
    bucketize(shifted as u32, max_len, buckets)
}

/// Overwrites urgency and length predictions for all requests, in id order.
pub fn apply_predictions(
    requests: &mut [Request],
    cfg: &PredictorConfig,
    levels: u8,
    max_len: u32,
    buckets: u32,
    seed: u64,
) {
    let mut urng = ChaCha8Rng::seed_from_u64(seed);
    urng.set_stream(URGENCY_STREAM);
    let mut lrng = ChaCha8Rng::seed_from_u64(seed);
    lrng.set_stream(LENGTH_STREAM);
    let uem = ErrorModel::new(cfg.urgency_error, cfg.error_distance);
    let lem = ErrorModel::new(cfg.length_error, cfg.error_distance);
    for r in requests.iter_mut() {
        r.predicted_urgency = predict_urgency(r.true_urgency, levels, &uem, &mut urng);
        r.predicted_bucket = predict_length_bucket(r.true_output_len, max_len, buckets, &lem, &mut lrng);
    }
}

/// One run of the prediction model.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub start: f64,
    pub ready: f64,
    pub ids: Vec<RequestId>,
}

/// Schedules the prediction model, a single resource, over `arrivals`
/// (sorted by time). With zero latency every arrival group is ready on
/// arrival.
pub fn predictor_pipeline(arrivals: &[(RequestId, f64)], cfg: &PredictorConfig) -> Vec<Invocation> {
    debug_assert!(arrivals.windows(2).all(|w| w[0].1 <= w[1].1));
    let mut out = Vec::new();
    let groups = arrivals.chunk_by(|a, b| a.1 == b.1);
    if cfg.latency_s == 0.0 {
        for g in groups {
            out.push(Invocation {
                start: g[0].1,
                ready: g[0].1,
                ids: g.iter().map(|a| a.0).collect(),
            });
        }
        return out;
    }
    let mut free = f64::NEG_INFINITY;
    let mut fire = |at: f64, ids: Vec<RequestId>, free: &mut f64| {
        let start = at.max(*free);
        let ready = start + cfg.latency_s;
        *free = ready;
        out.push(Invocation { start, ready, ids });
    };
    match cfg.strategy {
        PredictorStrategy::Immediate => {
            for g in groups {
                for chunk in g.chunks(cfg.batch_size) {
                    fire(g[0].1, chunk.iter().map(|a| a.0).collect(), &mut free);
                }
            }
        }
        PredictorStrategy::FullBatching => {
            let mut pending = Vec::with_capacity(cfg.batch_size);
            for &(id, t) in arrivals {
                pending.push(id);
                if pending.len() == cfg.batch_size {
                    fire(t, core::mem::take(&mut pending), &mut free);
                }
            }
            if let (false, Some(last)) = (pending.is_empty(), arrivals.last()) {
                fire(last.1, pending, &mut free);
            }
        }
    }
    out
}
