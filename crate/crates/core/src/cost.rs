//! Analytical timing model for prefill, decode and KV reload, and the
//! cache-versus-recompute decisions built on it.
//!
//! Prefill of `n` prompt tokens costs `alpha1*n^2 + alpha2*n`. The `j`-th
//! decoded token attends over `n + j` positions and costs
//! `gamma1*(n + j) + gamma2`, so decoding `m` tokens costs
//! `gamma1*(m^2/2 + n*m + m/2) + gamma2*m`. Moving `t` tokens of KV back onto
//! the device costs `beta_load*t`.

use alloc::string::{String, ToString};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::request::{Request, Stage};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostError {
    #[error("saved tokens {saved} exceed decoded tokens {done}")]
    SavedExceedsDone { saved: u64, done: u64 },
    #[error("request {0} is already completed")]
    Completed(u64),
    #[error("invalid GPU profile {name}: {reason}")]
    InvalidProfile { name: String, reason: &'static str },
}

/// Cost coefficients for one model/GPU pairing. Times are seconds, lengths
/// are tokens.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GpuProfile {
    pub name: String,
    /// Prefill quadratic term, s/token^2.
    pub alpha1: f64,
    /// Prefill linear term, s/token.
    pub alpha2: f64,
    /// Decode attention slope, s/token.
    pub gamma1: f64,
    /// Decode per-token constant, s.
    pub gamma2: f64,
    /// Host-to-device KV reload, s/token.
    pub beta_load: f64,
    /// Device-to-host KV save, s/token.
    pub beta_save: f64,
}

impl GpuProfile {
    pub const BUILTIN_NAMES: [&'static str; 3] = ["a5000_qwen7b", "a100_qwen4b", "a100_qwen7b"];

    /// Qwen1.5-7B on an A5000.
    pub fn a5000_qwen7b() -> Self {
        Self::named("a5000_qwen7b", 1.859e-9, 2.175e-4, 2.117e-6, 2.727e-2, 3e-4, 3e-4)
    }

    /// Qwen1.5-4B on an A100. The literal quadratic prefill term makes a
    /// 1000-token prompt take hours; override it from a scenario file if that
    /// matters for the experiment.
    pub fn a100_qwen4b() -> Self {
        Self::named("a100_qwen4b", 1.466e-2, 1.052e-4, 5.913e-9, 1.196e-2, 1e-4, 1e-4)
    }

    /// Qwen1.5-7B on an A100.
    pub fn a100_qwen7b() -> Self {
        Self::named("a100_qwen7b", 5.135e-7, 1.481e-4, 1.349e-8, 1.330e-2, 1e-4, 1e-4)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "a5000_qwen7b" => Some(Self::a5000_qwen7b()),
            "a100_qwen4b" => Some(Self::a100_qwen4b()),
            "a100_qwen7b" => Some(Self::a100_qwen7b()),
            _ => None,
        }
    }

    fn named(
        name: &str,
        alpha1: f64,
        alpha2: f64,
        gamma1: f64,
        gamma2: f64,
        beta_load: f64,
        beta_save: f64,
    ) -> Self {
        GpuProfile {
            name: name.to_string(),
            alpha1,
            alpha2,
            gamma1,
            gamma2,
            beta_load,
            beta_save,
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let coeffs = [
            self.alpha1,
            self.alpha2,
            self.gamma1,
            self.gamma2,
            self.beta_load,
            self.beta_save,
        ];
        let fail = |reason| {
            Err(CostError::InvalidProfile {
                name: self.name.clone(),
                reason,
            })
        };
        if coeffs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return fail("coefficients must be finite and nonnegative");
        }
        if self.gamma1 + self.gamma2 <= 0.0 {
            return fail("gamma1 + gamma2 must be positive");
        }
        if self.alpha1 + self.alpha2 <= 0.0 {
            return fail("alpha1 + alpha2 must be positive");
        }
        Ok(())
    }
}

pub fn prefill_time(n: u64, p: &GpuProfile) -> f64 {
    let n = n as f64;
    p.alpha1 * n * n + p.alpha2 * n
}

/// Time to decode the `j`-th output token (`j >= 1`) after an `n`-token prompt.
pub fn decode_step_time(n: u64, j: u64, p: &GpuProfile) -> f64 {
    debug_assert!(j >= 1, "token index starts at 1");
    p.gamma1 * (n + j) as f64 + p.gamma2
}

/// Closed form of `sum_{j=1..m} decode_step_time(n, j)`.
pub fn decode_total_time(n: u64, m: u64, p: &GpuProfile) -> f64 {
    let (n, m) = (n as f64, m as f64);
    p.gamma1 * (0.5 * m * m + n * m + 0.5 * m) + p.gamma2 * m
}

pub fn reload_time(tokens: u64, p: &GpuProfile) -> f64 {
    p.beta_load * tokens as f64
}

pub fn save_time(tokens: u64, p: &GpuProfile) -> f64 {
    p.beta_save * tokens as f64
}

/// Whether `n` tokens of prompt KV should be offloaded rather than discarded:
/// true iff reloading them is strictly cheaper than recomputing the prefill.
pub fn should_cache_prefill(n: u64, p: &GpuProfile) -> bool {
    if n == 0 {
        return false;
    }
    // beta*n < alpha1*n^2 + alpha2*n, divided through by n
    p.beta_load < p.alpha1 * n as f64 + p.alpha2
}

/// Time to bring decode KV back to where it was at eviction when `m_saved` of
/// `m_done` decoded tokens were kept and the rest must be recomputed.
pub fn resume_cost(n: u64, m_done: u64, m_saved: u64, p: &GpuProfile) -> Result<f64, CostError> {
    if m_saved > m_done {
        return Err(CostError::SavedExceedsDone {
            saved: m_saved,
            done: m_done,
        });
    }
    Ok(reload_time(m_saved, p) + decode_total_time(n, m_done - m_saved, p))
}

/// Integer number of decoded tokens to keep that minimizes [`resume_cost`],
/// ties going to the larger count.
///
/// The cost is convex in the recompute count `k = m_done - m_saved` with
/// stationary point `k* = (beta - gamma1*n - gamma1/2 - gamma2) / gamma1`, so
/// the integer optimum is one of the two integers around `m_done - k*`.
pub fn optimal_save_tokens(n: u64, m_done: u64, p: &GpuProfile) -> u64 {
    if p.gamma1 == 0.0 {
        // linear in m_saved with slope beta - gamma2; a flat line ties to m_done
        return if p.beta_load <= p.gamma2 { m_done } else { 0 };
    }
    let k_star = (p.beta_load - p.gamma1 * n as f64 - 0.5 * p.gamma1 - p.gamma2) / p.gamma1;
    let target = m_done as f64 - k_star;
    let clamp = |x: f64| -> u64 {
        if x <= 0.0 {
            0
        } else if x >= m_done as f64 {
            m_done
        } else {
            x as u64
        }
    };
    let lo = clamp(libm::floor(target));
    let hi = clamp(libm::ceil(target));
    if lo == hi {
        return lo;
    }
    // keeping one more token trades a reload for the last recompute step;
    // comparing those directly avoids cancellation between two large totals
    if p.beta_load <= decode_step_time(n, m_done - lo, p) {
        hi
    } else {
        lo
    }
}

/// Time still needed to restore a request's KV before its next iteration:
/// reload of host-resident KV, prefill of missing prompt KV and recompute of
/// discarded decode KV.
pub fn restore_time(r: &Request, p: &GpuProfile) -> f64 {
    let n = u64::from(r.prompt_len);
    reload_time(r.kv_host_tokens, p)
        + prefill_time(n - u64::from(r.prefilled_tokens.min(r.prompt_len)), p)
        + decode_total_time(n, r.missing_decode_kv(), p)
}

/// `f_t`: restore work plus decoding of the predicted remaining output
/// (at least one more token). Uses the predicted length, never the true one.
pub fn estimate_remaining_time(r: &Request, p: &GpuProfile) -> Result<f64, CostError> {
    if r.stage == Stage::Completed {
        return Err(CostError::Completed(r.id.0));
    }
    let n = u64::from(r.prompt_len);
    let done = u64::from(r.decoded_tokens);
    let predicted = u64::from(r.predicted_bucket.representative_len);
    let remaining = predicted.saturating_sub(done).max(1);
    Ok(restore_time(r, p) + decode_total_time(n + done, remaining, p))
}
