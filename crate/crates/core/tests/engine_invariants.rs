//! Whole-run invariants over small random scenarios.

#![allow(clippy::field_reassign_with_default)]

use proptest::prelude::*;
use semsched_core::metrics::{constraint_audit, Ranking};
use semsched_core::{
    run, Policy, PredictorStrategy, PreemptionMode, RunReport, ScenarioConfig, TraceEvent,
};

fn scenario() -> impl Strategy<Value = ScenarioConfig> {
    (
        prop::sample::select(Policy::ALL.to_vec()),
        prop::sample::select(vec!["a100_qwen7b", "a5000_qwen7b"]),
        1usize..6,
        prop_oneof![Just(1_000_000u64), 600u64..4_000],
        (10usize..80, 0.05f64..1.0, 1usize..12, any::<bool>()),
        (0.0f64..1.0, 0.0f64..1.0, prop_oneof![Just(0.0), 0.001f64..0.2], any::<bool>(), 1usize..20),
        (any::<bool>(), any::<bool>(), any::<bool>(), any::<u64>()),
    )
        .prop_map(|(policy, profile, b, cap, (n, gap, maxc, spike), pred, (inflight, dep, sync, seed))| {
            let mut c = ScenarioConfig::default();
            c.policy = policy;
            c.profile = profile.into();
            c.batch_size = b;
            c.memory_capacity = cap;
            c.workload.total_requests = n;
            c.workload.arrival_gap_s = gap;
            c.workload.max_concurrent = maxc;
            c.workload.spike = spike;
            c.workload.output_len_max = 120;
            c.workload.max_output_len = 120;
            (c.predictor.urgency_error, c.predictor.length_error, c.predictor.latency_s) = (pred.0, pred.1, pred.2);
            c.predictor.strategy = if pred.3 { PredictorStrategy::FullBatching } else { PredictorStrategy::Immediate };
            c.predictor.batch_size = pred.4;
            c.preemption = if inflight { PreemptionMode::InFlight } else { PreemptionMode::IterationBoundary };
            c.kv.dependency_rule = dep;
            c.kv.synchronous_save = sync;
            c.seed = seed;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn runs_are_well_formed(cfg in scenario()) {
        let trace = run(&cfg).unwrap();
        prop_assert_eq!(trace.records.len(), cfg.workload.total_requests);

        for e in &trace.events {
            if let Some(used) = e.mem_used() {
                prop_assert!(used <= cfg.memory_capacity, "{:?}", e);
            }
        }
        prop_assert!(trace.events.windows(2).all(|w| w[0].time() <= w[1].time()));

        for r in &trace.records {
            if r.unservable {
                prop_assert!(r.finish.is_none());
                continue;
            }
            let (ready, first, finish) = (r.ready.unwrap(), r.first_scheduled.unwrap(), r.finish.unwrap());
            prop_assert!(r.arrival <= ready && ready <= first && first < finish, "{:?}", r);
            prop_assert_eq!(r.generated_tokens, r.output_tokens);
        }

        for e in &trace.events {
            if let TraceEvent::IterationStart { ids, .. } = e {
                prop_assert!(!ids.is_empty() && ids.len() <= cfg.batch_size);
            }
        }

        let report = RunReport::from_trace(&trace, &cfg).unwrap();
        prop_assert_eq!(report.evictions, trace.evictions);
        prop_assert!(report.peak_memory <= cfg.memory_capacity);
        let audit = constraint_audit(&trace.records, Ranking::True);
        prop_assert_eq!(report.violations, audit.violations.len() as u64);
    }

    #[test]
    fn same_seed_same_trace(cfg in scenario()) {
        prop_assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }
}
