//! Deterministic virtual-time simulation of one serving device.
//!
//! Three sources feed a single event queue: arrivals, prediction results and
//! iteration ends. Events at equal times run in insertion order, and the
//! scheduler only decides once every event at the current instant has been
//! applied.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use crate::config::{ConfigError, DecodeBatchCost, Policy, PreemptionMode, ScenarioConfig};
use crate::cost::{decode_step_time, estimate_remaining_time, restore_time, save_time, GpuProfile};
use crate::kv::{estimate_kv_size, priority_based_eviction, DeviceMemory, EvictionContext, EvictionDecision};
use crate::predictor::{apply_predictions, predictor_pipeline};
use crate::queue::{ArrivalBuffer, DispatchQueue, EvictionQueue};
use crate::request::{PriorityKey, Request, RequestId, RequestTable, Stage};
use crate::scheduler::{stage_aware_schedule, Batch, BatchKind};
use crate::trace::{RequestRecord, Trace, TraceEvent};
use crate::workload::generate;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("request at position {position} has id {id}; ids must be 0..n in order")]
    SparseIds { id: RequestId, position: usize },
    #[error("request {id}: {reason}")]
    InvalidRequest { id: RequestId, reason: &'static str },
    #[error("simulation stopped with {0} requests unfinished")]
    Stalled(usize),
}

/// Generates the configured workload and simulates it.
pub fn run(cfg: &ScenarioConfig) -> Result<Trace, SimError> {
    cfg.validate()?;
    run_requests(cfg, generate(&cfg.workload, cfg.seed))
}

/// Simulates an explicit request list. Ids must be dense and in order;
/// predictions are redrawn from the configured predictor.
pub fn run_requests(cfg: &ScenarioConfig, mut requests: Vec<Request>) -> Result<Trace, SimError> {
    cfg.validate()?;
    let profile = cfg.resolve_profile()?;
    let w = &cfg.workload;
    for (position, r) in requests.iter().enumerate() {
        let id = r.id;
        if id.index() != position {
            return Err(SimError::SparseIds { id, position });
        }
        if r.prompt_len == 0 {
            return Err(SimError::InvalidRequest { id, reason: "empty prompt" });
        }
        if r.true_output_len == 0 {
            return Err(SimError::InvalidRequest { id, reason: "zero output length" });
        }
        if !(r.arrival.is_finite() && r.arrival >= 0.0) {
            return Err(SimError::InvalidRequest { id, reason: "arrival must be finite and nonnegative" });
        }
        if r.true_urgency.rank() >= w.urgency_levels {
            return Err(SimError::InvalidRequest { id, reason: "urgency outside configured levels" });
        }
    }
    apply_predictions(&mut requests, &cfg.predictor, w.urgency_levels, w.max_output_len, w.length_buckets, cfg.seed);
    let mut sim = Sim::new(cfg, profile, requests);
    sim.run()?;
    Ok(sim.into_trace())
}

/// Device time for one iteration over `members`: every member's outstanding
/// restore work (reload, prefill, recompute), then one decode step for each
/// member that does not need prefill, combined by `rule`.
pub fn batch_duration(members: &[RequestId], table: &RequestTable, p: &GpuProfile, rule: DecodeBatchCost) -> f64 {
    let mut restore = 0.0;
    let mut decode = 0.0f64;
    for &id in members {
        let r = table.get(id);
        restore += restore_time(r, p);
        if !r.needs_prefill() {
            let step = decode_step_time(u64::from(r.prompt_len), u64::from(r.decoded_tokens) + 1, p);
            decode = match rule {
                DecodeBatchCost::Max => decode.max(step),
                DecodeBatchCost::Sum => decode + step,
            };
        }
    }
    restore + decode
}

enum EventKind {
    Arrival(RequestId),
    Ready(Vec<RequestId>),
    IterationEnd(u64),
}

struct Scheduled {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

struct InFlight {
    generation: u64,
    members: Vec<RequestId>,
    prefill: Vec<bool>,
}

struct Sim<'c> {
    cfg: &'c ScenarioConfig,
    policy: Policy,
    profile: GpuProfile,
    table: RequestTable,
    records: Vec<RequestRecord>,
    queue: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    now: f64,
    buffer: ArrivalBuffer,
    dispatch: DispatchQueue,
    eviction: EvictionQueue,
    ongoing: Vec<RequestId>,
    memory: DeviceMemory,
    in_flight: Option<InFlight>,
    generation: u64,
    pending_save: f64,
    live: usize,
    log: Vec<TraceEvent>,
    peak: u64,
    evictions: u64,
    aborted: u64,
}

impl<'c> Sim<'c> {
    fn new(cfg: &'c ScenarioConfig, profile: GpuProfile, requests: Vec<Request>) -> Self {
        let records = requests
            .iter()
            .map(|r| RequestRecord {
                id: r.id,
                arrival: r.arrival,
                ready: None,
                first_scheduled: None,
                finish: None,
                prompt_tokens: r.prompt_len,
                output_tokens: r.true_output_len,
                generated_tokens: 0,
                evictions: 0,
                true_urgency: r.true_urgency,
                predicted_urgency: r.predicted_urgency,
                predicted_len: r.predicted_bucket.representative_len,
                unservable: false,
            })
            .collect();
        let mut arrivals: Vec<(RequestId, f64)> = requests.iter().map(|r| (r.id, r.arrival)).collect();
        arrivals.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let mut sim = Sim {
            cfg,
            policy: cfg.policy,
            profile,
            live: requests.len(),
            table: RequestTable::from_requests(requests),
            records,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            buffer: ArrivalBuffer::new(),
            dispatch: DispatchQueue::new(),
            eviction: EvictionQueue::new(),
            ongoing: Vec::new(),
            memory: DeviceMemory::new(cfg.memory_capacity),
            in_flight: None,
            generation: 0,
            pending_save: 0.0,
            log: Vec::new(),
            peak: 0,
            evictions: 0,
            aborted: 0,
        };
        for &(id, t) in &arrivals {
            sim.schedule(t, EventKind::Arrival(id));
        }
        for inv in predictor_pipeline(&arrivals, &cfg.predictor) {
            sim.schedule(inv.ready, EventKind::Ready(inv.ids));
        }
        sim
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        self.queue.push(Reverse(Scheduled { time, seq: self.seq, kind }));
        self.seq += 1;
    }

    fn key(&self, id: RequestId) -> PriorityKey {
        self.policy.key(self.table.get(id))
    }

    fn refresh_estimate(&mut self, id: RequestId) {
        let r = self.table.get_mut(id);
        r.remaining_estimate = estimate_remaining_time(r, &self.profile).expect("live request");
    }

    fn run(&mut self) -> Result<(), SimError> {
        while let Some(Reverse(ev)) = self.queue.pop() {
            debug_assert!(ev.time >= self.now, "time went backwards");
            self.now = ev.time;
            match ev.kind {
                EventKind::Arrival(id) => self.log.push(TraceEvent::Arrival { time: self.now, id }),
                EventKind::Ready(ids) => self.on_ready(ids),
                EventKind::IterationEnd(g) => {
                    if self.in_flight.as_ref().is_some_and(|f| f.generation == g) {
                        // a request made visible at this very instant still
                        // gets to displace the batch
                        if self.should_abort() {
                            self.abort_iteration();
                        } else {
                            self.finish_iteration();
                        }
                    }
                }
            }
            let same_instant = self.queue.peek().is_some_and(|n| n.0.time == self.now);
            if same_instant {
                continue;
            }
            if self.in_flight.is_none() {
                self.start_iteration();
            } else if self.should_abort() {
                self.abort_iteration();
                self.start_iteration();
            }
            self.check_invariants();
        }
        self.log.push(TraceEvent::RunEnd { time: self.now, mem_used: self.memory.used });
        if self.live > 0 {
            return Err(SimError::Stalled(self.live));
        }
        Ok(())
    }

    fn on_ready(&mut self, ids: Vec<RequestId>) {
        for &id in &ids {
            self.refresh_estimate(id);
            self.records[id.index()].ready = Some(self.now);
            self.buffer.append(id).expect("each request is predicted once");
        }
        self.log.push(TraceEvent::PredictionReady { time: self.now, ids });
    }

    /// A buffered request outranks some member of the running batch.
    fn should_abort(&self) -> bool {
        if self.cfg.preemption != PreemptionMode::InFlight || !self.policy.preemptive() {
            return false;
        }
        let Some(f) = &self.in_flight else {
            return false;
        };
        let Some(best) = self.buffer.as_slice().iter().map(|&id| self.key(id)).min() else {
            return false;
        };
        f.members.iter().map(|&id| self.key(id)).max().is_some_and(|worst| best < worst)
    }

    fn start_iteration(&mut self) {
        loop {
            let policy = self.policy;
            let batch = stage_aware_schedule(
                &mut self.dispatch,
                &mut self.buffer,
                &self.ongoing,
                self.cfg.batch_size,
                &self.table,
                policy.stage_aware(),
                |r| policy.key(r),
            );
            self.ongoing.clear();
            if batch.is_empty() {
                return;
            }
            let admitted = self.admit(batch);
            if !admitted.is_empty() {
                self.launch(admitted);
                return;
            }
        }
    }

    /// Device slots a member adds by the end of the iteration.
    fn growth(r: &Request) -> u64 {
        let after = if r.needs_prefill() { r.restored_kv_tokens() } else { r.restored_kv_tokens() + 1 };
        after - r.kv_device_tokens
    }

    /// Secures memory for batch members in priority order, evicting
    /// lower-priority residents as needed. Members that cannot fit go back to
    /// the queue; a request that cannot fit even alone is unservable.
    fn admit(&mut self, batch: Batch) -> Vec<RequestId> {
        let capacity = self.memory.capacity;
        let mut admitted = Vec::with_capacity(batch.len());
        // device slots already held by admitted members
        let mut admitted_resident = 0;
        for id in batch.members {
            if self.dispatch.contains(id) {
                // evicted to make room for a higher member of this batch
                continue;
            }
            let _ = self.eviction.delete(id);
            let r = self.table.get(id);
            if r.restored_kv_tokens() + u64::from(!r.needs_prefill()) > capacity {
                self.mark_unservable(id);
                continue;
            }
            let growth = Self::growth(r);
            // nothing runs during admission, so every resident outside the
            // eviction queue is this request or an admitted member
            let pinned = self.memory.reserved + admitted_resident + r.kv_device_tokens;
            #[cfg(test)]
            {
                let evictable: u64 = self.eviction.ids().map(|v| self.table.get(v).kv_device_tokens).sum();
                assert_eq!(pinned, self.memory.in_use() - evictable);
            }
            let resident = r.kv_device_tokens;
            if pinned + growth > capacity {
                self.reject(id);
                continue;
            }
            let required = growth.max(estimate_kv_size(r)).min(capacity - pinned);
            let policy = self.policy;
            let mut ctx = EvictionContext {
                table: &mut self.table,
                dispatch: &mut self.dispatch,
                eviction: &mut self.eviction,
                memory: &mut self.memory,
                profile: &self.profile,
                options: &self.cfg.kv,
                key_of: |r: &Request| policy.key(r),
            };
            match priority_based_eviction(id, required, &mut ctx) {
                Ok(decisions) => {
                    self.record_evictions(&decisions);
                    self.memory.reserved += growth;
                    admitted_resident += resident;
                    admitted.push(id);
                }
                Err(failure) => {
                    self.record_evictions(&failure.decisions);
                    self.reject(id);
                }
            }
        }
        admitted
    }

    fn record_evictions(&mut self, decisions: &[EvictionDecision]) {
        for d in decisions {
            self.evictions += 1;
            self.records[d.victim.index()].evictions += 1;
            if self.cfg.kv.synchronous_save {
                let host = self.table.get(d.victim).kv_host_tokens;
                self.pending_save += save_time(host, &self.profile);
            }
            self.log.push(TraceEvent::Eviction {
                time: self.now,
                victim: d.victim,
                prefill: d.prefill,
                decode_saved: d.decode_saved,
                decode_discarded: d.decode_discarded,
                remaining_before: d.remaining_before,
                remaining_after: d.remaining_after,
                mem_used: self.memory.in_use(),
            });
        }
    }

    /// Returns a member that did not fit to the queue for a later round.
    fn reject(&mut self, id: RequestId) {
        let key = self.key(id);
        self.dispatch.insert(id, key).expect("batch members are not queued");
        if self.table.get(id).is_device_resident() {
            self.eviction.upsert(id, key);
        }
        self.log.push(TraceEvent::AdmissionFailure { time: self.now, id, mem_used: self.memory.in_use() });
    }

    fn mark_unservable(&mut self, id: RequestId) {
        log::warn!("request {id} needs more KV than the device holds");
        let r = self.table.get_mut(id);
        self.memory.used -= r.kv_device_tokens;
        r.kv_device_tokens = 0;
        r.kv_host_tokens = 0;
        let rec = &mut self.records[id.index()];
        rec.unservable = true;
        rec.generated_tokens = r.decoded_tokens;
        self.live -= 1;
        self.log.push(TraceEvent::Unservable { time: self.now, id, mem_used: self.memory.in_use() });
    }

    fn launch(&mut self, members: Vec<RequestId>) {
        let mut prefill = Vec::with_capacity(members.len());
        for &id in &members {
            let r = self.table.get_mut(id);
            if !r.started {
                r.started = true;
                self.records[id.index()].first_scheduled = Some(self.now);
            }
            let pf = r.needs_prefill();
            if r.stage == Stage::Waiting {
                let next = if pf { Stage::Prefilling } else { Stage::Decoding };
                r.transition(next).expect("waiting requests can start");
            }
            prefill.push(pf);
        }
        let kind = if prefill.iter().any(|p| *p) { BatchKind::Prefill } else { BatchKind::Decode };
        let duration = batch_duration(&members, &self.table, &self.profile, self.cfg.decode_batch_cost)
            + core::mem::take(&mut self.pending_save);
        self.peak = self.peak.max(self.memory.in_use());
        self.log.push(TraceEvent::IterationStart {
            time: self.now,
            kind,
            ids: members.clone(),
            duration,
            mem_used: self.memory.used,
            mem_reserved: self.memory.reserved,
        });
        self.generation += 1;
        let generation = self.generation;
        self.in_flight = Some(InFlight { generation, members, prefill });
        self.schedule(self.now + duration, EventKind::IterationEnd(generation));
    }

    fn finish_iteration(&mut self) {
        let f = self.in_flight.take().expect("iteration in flight");
        self.memory.reserved = 0;
        for (&id, &was_prefill) in f.members.iter().zip(&f.prefill) {
            let r = self.table.get_mut(id);
            let before = r.kv_device_tokens;
            r.kv_host_tokens = 0;
            if was_prefill {
                r.prefilled_tokens = r.prompt_len;
                r.transition(Stage::Decoding).expect("prefill completes into decoding");
            } else {
                r.decoded_tokens += 1;
            }
            r.kv_device_tokens = r.restored_kv_tokens();
            self.memory.used = self.memory.used - before + r.kv_device_tokens;
            if !was_prefill && r.decoded_tokens == r.true_output_len {
                r.transition(Stage::Completed).expect("decoding requests complete");
                r.finish_time = Some(self.now);
                self.memory.used -= r.kv_device_tokens;
                r.kv_device_tokens = 0;
                let rec = &mut self.records[id.index()];
                rec.finish = Some(self.now);
                rec.generated_tokens = r.decoded_tokens;
                self.live -= 1;
                self.log.push(TraceEvent::Complete {
                    time: self.now,
                    record: rec.clone(),
                    mem_used: self.memory.used,
                });
            } else {
                self.refresh_estimate(id);
                let key = self.key(id);
                self.eviction.insert(id, key).expect("running members are not evictable");
                self.ongoing.push(id);
            }
        }
        self.peak = self.peak.max(self.memory.used);
        self.log.push(TraceEvent::IterationEnd { time: self.now, ids: f.members, mem_used: self.memory.used });
    }

    /// Cancels the running iteration. Its work is lost and its members
    /// compete again from their pre-iteration state.
    fn abort_iteration(&mut self) {
        let f = self.in_flight.take().expect("iteration in flight");
        self.memory.reserved = 0;
        for &id in &f.members {
            let r = self.table.get_mut(id);
            if r.stage == Stage::Prefilling {
                r.transition(Stage::Waiting).expect("prefill can be abandoned");
            }
            let key = self.key(id);
            if self.table.get(id).is_device_resident() {
                self.eviction.insert(id, key).expect("running members are not evictable");
                self.ongoing.push(id);
            } else {
                self.dispatch.insert(id, key).expect("running members are not queued");
            }
        }
        self.aborted += 1;
        self.log.push(TraceEvent::IterationAborted { time: self.now, ids: f.members, mem_used: self.memory.used });
    }

    fn check_invariants(&self) {
        debug_assert!(self.memory.in_use() <= self.memory.capacity, "memory over capacity");
        #[cfg(test)]
        {
            let resident: u64 = self.table.iter().map(|r| r.kv_device_tokens).sum();
            assert_eq!(resident, self.memory.used, "device accounting drifted");
            assert!(self.dispatch.is_consistent() && self.eviction.is_consistent());
            for r in self.table.iter() {
                assert!(r.counters_consistent(), "{r:?}");
                assert_eq!(self.eviction.contains(r.id), r.is_device_resident() && !self.in_flight_member(r.id));
            }
        }
    }

    #[cfg(test)]
    fn in_flight_member(&self, id: RequestId) -> bool {
        self.in_flight.as_ref().is_some_and(|f| f.members.contains(&id))
    }

    fn into_trace(self) -> Trace {
        Trace {
            records: self.records,
            events: self.log,
            memory_capacity: self.memory.capacity,
            peak_memory: self.peak,
            evictions: self.evictions,
            aborted_iterations: self.aborted,
            end_time: self.now,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{decode_total_time, prefill_time};
    use crate::metrics::{constraint_audit, Ranking};
    use crate::predictor::PredictorConfig;
    use crate::request::UrgencyLevel;
    use alloc::vec;

    fn cfg(policy: Policy, b: usize) -> ScenarioConfig {
        ScenarioConfig { policy, batch_size: b, ..Default::default() }
    }

    fn req(id: u64, arrival: f64, n: u32, m: u32, urgency: u8) -> Request {
        Request::new(RequestId(id), arrival, n, m, UrgencyLevel::from_rank(urgency))
    }

    #[test]
    fn empty_run() {
        let t = run_requests(&cfg(Policy::Semantic, 4), vec![]).unwrap();
        assert!(t.records.is_empty());
        assert_eq!(t.events.len(), 1);
    }

    #[test]
    fn single_request_timing() {
        let mut c = cfg(Policy::Semantic, 1);
        c.predictor = PredictorConfig { latency_s: 0.05, ..Default::default() };
        let p = c.resolve_profile().unwrap();
        let t = run_requests(&c, vec![req(0, 1.0, 100, 40, 2)]).unwrap();
        let expected = 1.0 + 0.05 + prefill_time(100, &p) + decode_total_time(100, 40, &p);
        let f = t.records[0].finish.unwrap();
        assert!((f - expected).abs() < 1e-9 * expected, "{f} vs {expected}");
        assert_eq!(t.records[0].generated_tokens, 40);
        assert_eq!(t.records[0].ready, Some(1.05));
    }

    #[test]
    fn urgent_arrival_preempts_at_boundary() {
        let c = cfg(Policy::Semantic, 1);
        let t = run_requests(&c, vec![req(0, 0.0, 50, 200, 3), req(1, 0.5, 50, 20, 0)]).unwrap();
        let (f0, f1) = (t.records[0].finish.unwrap(), t.records[1].finish.unwrap());
        assert!(f1 < f0);
        assert_eq!(t.evictions, 0);
    }

    #[test]
    fn fcfs_runs_to_completion() {
        let c = cfg(Policy::Fcfs, 1);
        let t = run_requests(&c, vec![req(0, 0.0, 50, 200, 3), req(1, 0.5, 50, 20, 0)]).unwrap();
        assert!(t.records[0].finish.unwrap() <= t.records[1].first_scheduled.unwrap());
        let audit = constraint_audit(&t.records, Ranking::True);
        assert_eq!(audit.violations.len(), 1);
    }

    #[test]
    fn decode_batch_charges_slowest_member() {
        let p = GpuProfile::a100_qwen7b();
        let mut a = req(0, 0.0, 10, 5, 0);
        let mut b = req(1, 0.0, 500, 5, 0);
        for r in [&mut a, &mut b] {
            r.prefilled_tokens = r.prompt_len;
            r.kv_device_tokens = u64::from(r.prompt_len);
        }
        let table = RequestTable::from_requests(vec![a, b]);
        let ids = [RequestId(0), RequestId(1)];
        let max = batch_duration(&ids, &table, &p, DecodeBatchCost::Max);
        assert_eq!(max, decode_step_time(500, 1, &p));
        let sum = batch_duration(&ids, &table, &p, DecodeBatchCost::Sum);
        assert_eq!(sum, decode_step_time(10, 1, &p) + decode_step_time(500, 1, &p));
    }

    #[test]
    fn prefill_batch_sums_prompts() {
        let p = GpuProfile::a100_qwen7b();
        let table = RequestTable::from_requests(vec![req(0, 0.0, 100, 5, 0), req(1, 0.0, 300, 5, 0)]);
        let d = batch_duration(&[RequestId(0), RequestId(1)], &table, &p, DecodeBatchCost::Max);
        assert_eq!(d, prefill_time(100, &p) + prefill_time(300, &p));
    }

    #[test]
    fn oversized_request_is_unservable() {
        let mut c = cfg(Policy::Semantic, 2);
        c.memory_capacity = 100;
        let t = run_requests(&c, vec![req(0, 0.0, 90, 20, 0), req(1, 0.0, 20, 10, 1)]).unwrap();
        assert!(t.records[0].unservable);
        assert!(t.records[1].is_completed());
    }

    #[test]
    fn tight_memory_evicts_and_completes() {
        let mut c = cfg(Policy::Semantic, 4);
        c.workload.total_requests = 120;
        c.workload.max_concurrent = 20;
        c.workload.spike = true;
        c.workload.arrival_gap_s = 0.1;
        c.memory_capacity = 2_000;
        let t = run(&c).unwrap();
        assert!(t.evictions > 0);
        assert!(t.records.iter().all(|r| r.is_completed()));
        assert!(t.peak_memory <= c.memory_capacity);
        for e in &t.events {
            if let TraceEvent::Eviction { remaining_before, remaining_after, .. } = e {
                assert!(remaining_after >= remaining_before);
            }
        }
    }

    #[test]
    fn tight_memory_with_recompute_profile() {
        let mut c = cfg(Policy::Semantic, 8);
        c.profile = "a5000_qwen7b".into();
        c.workload.total_requests = 80;
        c.workload.max_concurrent = 16;
        c.workload.prompt_len_max = 1024;
        c.memory_capacity = 3_000;
        for dependency_rule in [true, false] {
            c.kv.dependency_rule = dependency_rule;
            c.kv.synchronous_save = !dependency_rule;
            let t = run(&c).unwrap();
            assert!(t.records.iter().all(|r| r.is_completed() || r.unservable));
        }
    }

    #[test]
    fn in_flight_preemption_gives_exact_ordering() {
        let mut c = cfg(Policy::Semantic, 1);
        c.preemption = PreemptionMode::InFlight;
        c.workload.total_requests = 150;
        c.workload.max_concurrent = 5;
        c.workload.arrival_gap_s = 0.2;
        let t = run(&c).unwrap();
        assert!(constraint_audit(&t.records, Ranking::True).violations.is_empty());
        assert!(t.aborted_iterations > 0);
    }

    #[test]
    fn deterministic() {
        let mut c = cfg(Policy::Semantic, 4);
        c.workload.total_requests = 100;
        c.memory_capacity = 3_000;
        assert_eq!(run(&c).unwrap(), run(&c).unwrap());
    }

    #[test]
    fn all_policies_finish() {
        for policy in Policy::ALL {
            let mut c = cfg(policy, 4);
            c.workload.total_requests = 100;
            c.memory_capacity = 2_500;
            let t = run(&c).unwrap();
            assert!(t.records.iter().all(|r| r.is_completed()), "{policy:?}");
            for r in &t.records {
                let (a, ready, first, f) = (r.arrival, r.ready.unwrap(), r.first_scheduled.unwrap(), r.finish.unwrap());
                assert!(a <= ready && ready <= first && first <= f);
            }
        }
    }

    #[test]
    fn sparse_ids_rejected() {
        let e = run_requests(&cfg(Policy::Semantic, 1), vec![req(3, 0.0, 10, 10, 0)]).unwrap_err();
        assert!(matches!(e, SimError::SparseIds { .. }));
    }
}
