//! Synthetic arrival process and request contents.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::config::{invalid, ConfigError};
use crate::request::{LengthBucket, Request, RequestId, UrgencyLevel};

/// Requests arrive in ticks `gap` seconds apart. Each tick brings between one
/// and `max_concurrent` requests, or exactly `max_concurrent` when `spike` is
/// set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct WorkloadSpec {
    pub total_requests: usize,
    pub arrival_gap_s: f64,
    pub max_concurrent: usize,
    pub spike: bool,
    pub urgency_levels: u8,
    /// Relative frequency of each level, most urgent first. Uniform if empty.
    pub urgency_weights: Vec<f64>,
    pub prompt_len_min: u32,
    pub prompt_len_max: u32,
    pub output_len_min: u32,
    pub output_len_max: u32,
    /// Upper end of the length-bucket range.
    pub max_output_len: u32,
    pub length_buckets: u32,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            total_requests: 500,
            arrival_gap_s: 0.5,
            max_concurrent: 8,
            spike: false,
            urgency_levels: 5,
            urgency_weights: Vec::new(),
            prompt_len_min: 16,
            prompt_len_max: 128,
            output_len_min: 1,
            output_len_max: 500,
            max_output_len: 500,
            length_buckets: 5,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.arrival_gap_s.is_finite() && self.arrival_gap_s > 0.0) {
            return Err(invalid("workload.arrival_gap_s", "must be positive"));
        }
        if self.max_concurrent == 0 {
            return Err(invalid("workload.max_concurrent", "must be at least 1"));
        }
        if self.urgency_levels == 0 {
            return Err(invalid("workload.urgency_levels", "must be at least 1"));
        }
        if !self.urgency_weights.is_empty() {
            if self.urgency_weights.len() != usize::from(self.urgency_levels) {
                return Err(invalid("workload.urgency_weights", "needs one weight per level"));
            }
            if self.urgency_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
                || self.urgency_weights.iter().sum::<f64>() <= 0.0
            {
                return Err(invalid("workload.urgency_weights", "must be nonnegative and not all zero"));
            }
        }
        if self.prompt_len_min == 0 || self.prompt_len_min > self.prompt_len_max {
            return Err(invalid("workload.prompt_len_min", "need 1 <= min <= max"));
        }
        if self.output_len_min == 0 || self.output_len_min > self.output_len_max {
            return Err(invalid("workload.output_len_min", "need 1 <= min <= max"));
        }
        if self.max_output_len == 0 {
            return Err(invalid("workload.max_output_len", "must be positive"));
        }
        if self.length_buckets == 0 || self.length_buckets > self.max_output_len {
            return Err(invalid("workload.length_buckets", "need 1 <= buckets <= max_output_len"));
        }
        Ok(())
    }

    fn sample_urgency(&self, rng: &mut impl Rng) -> UrgencyLevel {
        let levels = usize::from(self.urgency_levels);
        if self.urgency_weights.is_empty() {
            return UrgencyLevel::from_rank(rng.gen_range(0..levels) as u8);
        }
        let total: f64 = self.urgency_weights.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        for (rank, w) in self.urgency_weights.iter().enumerate() {
            if u < *w {
                return UrgencyLevel::from_rank(rank as u8);
            }
            u -= w;
        }
        // rounding left u at the top edge
        let last = self.urgency_weights.iter().rposition(|w| *w > 0.0).unwrap_or(levels - 1);
        UrgencyLevel::from_rank(last as u8)
    }
}

/// Arrival times of the first `n` requests under the tick pattern.
pub fn arrival_times(spec: &WorkloadSpec, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut tick = 0u64;
    while out.len() < n {
        let k = if spec.spike {
            spec.max_concurrent
        } else {
            rng.gen_range(1..=spec.max_concurrent)
        };
        let t = tick as f64 * spec.arrival_gap_s;
        out.extend(core::iter::repeat_n(t, k.min(n - out.len())));
        tick += 1;
    }
    out
}

/// Generates `spec.total_requests` requests with dense ids in arrival order.
/// Predictions are exact; apply a predictor to perturb them.
pub fn generate(spec: &WorkloadSpec, seed: u64) -> Vec<Request> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let times = arrival_times(spec, spec.total_requests, &mut rng);
    times
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let urgency = spec.sample_urgency(&mut rng);
            let prompt = rng.gen_range(spec.prompt_len_min..=spec.prompt_len_max);
            let output = rng.gen_range(spec.output_len_min..=spec.output_len_max);
            let mut r = Request::new(RequestId(i as u64), t, prompt, output, urgency);
            r.predicted_bucket = bucketize(output, spec.max_output_len, spec.length_buckets);
            r
        })
        .collect()
}

/// Maps a length onto `buckets` equal ranges of `[0, max_len]`, each
/// represented by its rounded midpoint. Lengths above `max_len` are clamped
/// into the top bucket.
pub fn bucketize(len: u32, max_len: u32, buckets: u32) -> LengthBucket {
    debug_assert!(buckets >= 1 && max_len >= 1);
    let len = if len > max_len {
        log::warn!("length {len} above bucket range {max_len}; clamping");
        max_len
    } else {
        len
    };
    let width = f64::from(max_len) / f64::from(buckets);
    let index = ((f64::from(len) / width) as u32).min(buckets - 1);
    let mid = (f64::from(index) + 0.5) * width;
    LengthBucket {
        index,
        representative_len: (libm::round(mid) as u32).max(1),
    }
}
