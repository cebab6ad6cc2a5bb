//! Device KV accounting and priority-ordered eviction.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::config::KvOptions;
use crate::cost::{estimate_remaining_time, optimal_save_tokens, should_cache_prefill, GpuProfile};
use crate::queue::{DispatchQueue, EvictionQueue};
use crate::request::{PriorityKey, Request, RequestId, RequestTable, Stage};

/// Device KV occupancy in token slots. `reserved` holds growth promised to
/// the batch currently being admitted or executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DeviceMemory {
    pub capacity: u64,
    pub used: u64,
    pub reserved: u64,
}

impl DeviceMemory {
    pub fn new(capacity: u64) -> Self {
        DeviceMemory { capacity, used: 0, reserved: 0 }
    }

    pub fn in_use(&self) -> u64 {
        self.used + self.reserved
    }

    pub fn free(&self) -> u64 {
        self.capacity.saturating_sub(self.in_use())
    }

    /// `required` more slots fit without eviction.
    pub fn fits(&self, required: u64) -> bool {
        required + self.in_use() <= self.capacity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum PrefillAction {
    Offload,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EvictionDecision {
    pub victim: RequestId,
    pub prefill: PrefillAction,
    pub decode_saved: u64,
    pub decode_discarded: u64,
    /// Device slots released.
    pub freed: u64,
    pub remaining_before: f64,
    pub remaining_after: f64,
}

impl EvictionDecision {
    /// Tokens written to host memory.
    pub fn offloaded_tokens(&self, prefilled: u64) -> u64 {
        let p = if self.prefill == PrefillAction::Offload { prefilled } else { 0 };
        p + self.decode_saved
    }
}

/// Extra device slots `r` needs through its predicted completion.
pub fn estimate_kv_size(r: &Request) -> u64 {
    (u64::from(r.prompt_len) + u64::from(r.predicted_bucket.representative_len))
        .saturating_sub(r.kv_device_tokens)
}

/// Resolves a victim's device KV into host copies or discards, and applies
/// it: device slots go to zero and the stage becomes `Evicted*`.
pub fn should_recompute(r: &mut Request, p: &GpuProfile, opts: &KvOptions) -> EvictionDecision {
    debug_assert!(r.is_device_resident());
    let n = u64::from(r.prompt_len);
    let prefilled = u64::from(r.prefilled_tokens);
    let done = u64::from(r.decoded_tokens);
    // decode KV present before eviction; missing tokens stay missing
    let decode_present = r.decode_kv_tokens().min(done);
    let prefill = if should_cache_prefill(prefilled, p) {
        PrefillAction::Offload
    } else {
        PrefillAction::Discard
    };
    let mut saved = optimal_save_tokens(n, decode_present, p);
    if prefill == PrefillAction::Discard && opts.dependency_rule {
        saved = 0;
    }
    let freed = r.kv_device_tokens;
    r.kv_device_tokens = 0;
    match prefill {
        PrefillAction::Offload => r.kv_host_tokens = prefilled + saved,
        PrefillAction::Discard => {
            r.prefilled_tokens = 0;
            r.kv_host_tokens = saved;
        }
    }
    let kept_any = r.kv_host_tokens > 0;
    let next = if kept_any { Stage::EvictedOffloaded } else { Stage::EvictedDiscarded };
    r.transition(next).expect("victims are prefilling or decoding");
    EvictionDecision {
        victim: r.id,
        prefill,
        decode_saved: saved,
        decode_discarded: done - saved,
        freed,
        remaining_before: r.remaining_estimate,
        remaining_after: r.remaining_estimate,
    }
}

/// The eviction queue ran dry before `required` slots were free. Evictions
/// already applied stay applied.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissionFailure {
    pub request: RequestId,
    pub decisions: Vec<EvictionDecision>,
}

/// Mutable state touched by eviction.
pub struct EvictionContext<'a, F> {
    pub table: &'a mut RequestTable,
    pub dispatch: &'a mut DispatchQueue,
    pub eviction: &'a mut EvictionQueue,
    pub memory: &'a mut DeviceMemory,
    pub profile: &'a GpuProfile,
    pub options: &'a KvOptions,
    pub key_of: F,
}

/// Evicts lowest-priority device-resident requests until `required` slots
/// are free for `r`. The caller must already have taken `r` out of the
/// eviction queue.
///
/// Each victim is re-queued in the dispatch queue with its updated remaining
/// time.
pub fn priority_based_eviction<F>(
    r: RequestId,
    required: u64,
    ctx: &mut EvictionContext<'_, F>,
) -> Result<Vec<EvictionDecision>, AdmissionFailure>
where
    F: FnMut(&Request) -> PriorityKey,
{
    debug_assert!(!ctx.eviction.contains(r));
    let mut decisions = Vec::new();
    while !ctx.memory.fits(required) {
        let Ok((victim, _)) = ctx.eviction.pop() else {
            return Err(AdmissionFailure { request: r, decisions });
        };
        // not queued if it was pulled into the batch being admitted
        let _ = ctx.dispatch.delete(victim);
        let v = ctx.table.get_mut(victim);
        let mut d = should_recompute(v, ctx.profile, ctx.options);
        ctx.memory.used -= d.freed;
        v.transition(Stage::Waiting).expect("evicted requests re-queue");
        v.remaining_estimate =
            estimate_remaining_time(v, ctx.profile).expect("victims are not completed");
        d.remaining_after = v.remaining_estimate;
        let key = (ctx.key_of)(v);
        ctx.dispatch.insert(victim, key).expect("victim was removed above");
        decisions.push(d);
    }
    Ok(decisions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Policy;
    use crate::request::{LengthBucket, UrgencyLevel};
    use alloc::vec;

    fn resident(id: u64, urgency: u8, n: u32, decoded: u32, p: &GpuProfile) -> Request {
        let mut r = Request::new(RequestId(id), 0.0, n, 400, UrgencyLevel::from_rank(urgency));
        r.predicted_bucket = LengthBucket { index: 2, representative_len: 250 };
        r.stage = Stage::Decoding;
        r.started = true;
        r.prefilled_tokens = n;
        r.decoded_tokens = decoded;
        r.kv_device_tokens = u64::from(n + decoded);
        r.remaining_estimate = estimate_remaining_time(&r, p).unwrap();
        r
    }

    #[test]
    fn estimate_examples() {
        let mut r = Request::new(RequestId(0), 0.0, 100, 60, UrgencyLevel::from_rank(0));
        r.predicted_bucket = LengthBucket { index: 0, representative_len: 50 };
        assert_eq!(estimate_kv_size(&r), 150);
        r.kv_device_tokens = 100;
        assert_eq!(estimate_kv_size(&r), 50);
        r.kv_device_tokens = 160;
        assert_eq!(estimate_kv_size(&r), 0);
    }

    #[test]
    fn always_cache_profile_offloads_everything() {
        let p = GpuProfile::a100_qwen7b();
        let mut r = resident(0, 0, 200, 30, &p);
        let d = should_recompute(&mut r, &p, &KvOptions::default());
        assert_eq!(d.prefill, PrefillAction::Offload);
        assert_eq!((d.decode_saved, d.decode_discarded), (30, 0));
        assert_eq!(r.kv_host_tokens, 230);
        assert_eq!(r.kv_device_tokens, 0);
        assert_eq!(r.stage, Stage::EvictedOffloaded);
    }

    #[test]
    fn long_prompt_on_a5000_discards_prefill() {
        let p = GpuProfile::a5000_qwen7b();
        let mut r = resident(0, 0, 1000, 0, &p);
        let d = should_recompute(&mut r, &p, &KvOptions::default());
        assert_eq!(d.prefill, PrefillAction::Discard);
        assert_eq!(d.decode_saved + d.decode_discarded, 0);
        assert_eq!(r.prefilled_tokens, 0);
        assert_eq!(r.stage, Stage::EvictedDiscarded);
    }

    #[test]
    fn dependency_rule_drops_decode_kv() {
        let p = GpuProfile::a5000_qwen7b();
        let on = should_recompute(&mut resident(0, 0, 1000, 40, &p), &p, &KvOptions::default());
        assert_eq!(on.decode_saved, 0);
        assert_eq!(on.decode_discarded, 40);
        let literal = KvOptions { dependency_rule: false, ..Default::default() };
        let mut r = resident(0, 0, 1000, 40, &p);
        let off = should_recompute(&mut r, &p, &literal);
        assert_eq!(off.decode_saved, 40);
        assert_eq!(r.kv_host_tokens, 40);
        assert_eq!(r.missing_decode_kv(), 0);
    }

    struct World {
        table: RequestTable,
        h: DispatchQueue,
        g: EvictionQueue,
        mem: DeviceMemory,
        p: GpuProfile,
        opts: KvOptions,
    }

    impl World {
        fn new(reqs: Vec<Request>, capacity: u64) -> Self {
            let p = GpuProfile::a100_qwen7b();
            let mut g = EvictionQueue::new();
            let mut used = 0;
            for r in &reqs {
                used += r.kv_device_tokens;
                if r.is_device_resident() {
                    g.insert(r.id, Policy::Semantic.key(r)).unwrap();
                }
            }
            World {
                table: RequestTable::from_requests(reqs),
                h: DispatchQueue::new(),
                g,
                mem: DeviceMemory { capacity, used, reserved: 0 },
                p,
                opts: KvOptions::default(),
            }
        }

        fn evict(&mut self, r: RequestId, required: u64) -> Result<Vec<EvictionDecision>, AdmissionFailure> {
            let _ = self.g.delete(r);
            let mut ctx = EvictionContext {
                table: &mut self.table,
                dispatch: &mut self.h,
                eviction: &mut self.g,
                memory: &mut self.mem,
                profile: &self.p,
                options: &self.opts,
                key_of: |r: &Request| Policy::Semantic.key(r),
            };
            priority_based_eviction(r, required, &mut ctx)
        }

        fn used_matches(&self) -> bool {
            self.mem.used == self.table.iter().map(|r| r.kv_device_tokens).sum::<u64>()
        }
    }

    #[test]
    fn no_eviction_when_space_suffices() {
        let p = GpuProfile::a100_qwen7b();
        let mut w = World::new(vec![resident(0, 4, 100, 10, &p), resident(1, 0, 100, 0, &p)], 1000);
        assert_eq!(w.evict(RequestId(1), 500).unwrap(), vec![]);
        assert_eq!(w.g.len(), 1);
    }

    #[test]
    fn single_victim_is_least_urgent() {
        let p = GpuProfile::a100_qwen7b();
        let reqs = vec![
            resident(0, 1, 100, 10, &p),
            resident(1, 4, 100, 10, &p),
            resident(2, 0, 100, 0, &p),
        ];
        let mut w = World::new(reqs, 400);
        let d = w.evict(RequestId(2), 150).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].victim, RequestId(1));
        assert!(d[0].remaining_after > d[0].remaining_before);
        assert!(w.h.contains(RequestId(1)) && !w.g.contains(RequestId(1)));
        assert_eq!(w.table.get(RequestId(1)).stage, Stage::Waiting);
        assert!(w.used_matches());
        assert!(w.mem.fits(150));
    }

    #[test]
    fn exhausted_pool_signals_failure_consistently() {
        let p = GpuProfile::a100_qwen7b();
        let reqs = vec![resident(0, 3, 100, 0, &p), resident(1, 0, 100, 0, &p)];
        let mut w = World::new(reqs, 200);
        let err = w.evict(RequestId(1), 500).unwrap_err();
        assert_eq!(err.request, RequestId(1));
        assert_eq!(err.decisions.len(), 1);
        assert!(w.g.is_empty());
        assert!(w.h.is_consistent() && w.g.is_consistent());
        assert!(w.used_matches());
        assert_eq!(w.mem.used, 100);
    }

    #[test]
    fn victims_follow_reverse_priority() {
        let p = GpuProfile::a100_qwen7b();
        let reqs: Vec<_> = (0..6).map(|i| resident(i, (i % 5) as u8, 50, i as u32, &p)).collect();
        let mut order: Vec<_> = reqs[..5].iter().map(|r| (Policy::Semantic.key(r), r.id)).collect();
        order.sort();
        order.reverse();
        let mut w = World::new(reqs, 400);
        let d = w.evict(RequestId(5), 400).unwrap_err().decisions;
        let victims: Vec<_> = d.iter().map(|d| d.victim).collect();
        let expected: Vec<_> = order.iter().map(|o| o.1).collect();
        assert_eq!(victims, expected);
    }
}
