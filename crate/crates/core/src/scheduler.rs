//! Batch selection for the next device iteration.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::config::Policy;
use crate::queue::{ArrivalBuffer, DispatchQueue};
use crate::request::{PriorityKey, Request, RequestId, RequestTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum BatchKind {
    /// At least one member needs prefill. Prefills run first, then the
    /// decode members take one step.
    Prefill,
    /// Every member is decoding.
    Decode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Highest priority first.
    pub members: Vec<RequestId>,
    pub kind: BatchKind,
}

impl Batch {
    pub fn empty() -> Self {
        Batch { members: Vec::new(), kind: BatchKind::Decode }
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    fn from_sorted(members: &[(RequestId, PriorityKey)], table: &RequestTable) -> Self {
        let kind = if members.iter().any(|(id, _)| table.get(*id).needs_prefill()) {
            BatchKind::Prefill
        } else {
            BatchKind::Decode
        };
        Batch { members: members.iter().map(|m| m.0).collect(), kind }
    }
}

/// Moves everything buffered into `h`, then pops up to `b` candidates.
pub fn extract_top_b<F>(
    h: &mut DispatchQueue,
    u: &mut ArrivalBuffer,
    b: usize,
    mut key_of: F,
) -> Vec<(RequestId, PriorityKey)>
where
    F: FnMut(RequestId) -> PriorityKey,
{
    debug_assert!(b >= 1);
    u.drain_into(h, &mut key_of).expect("buffered ids are not already queued");
    let mut out = Vec::with_capacity(b.min(h.len()));
    while out.len() < b {
        match h.pop() {
            Ok(item) => out.push(item),
            Err(_) => break,
        }
    }
    out
}

/// Picks the next batch from the queue, the arrival buffer and the requests
/// that ran last iteration (`ongoing`, not queued).
///
/// If the best candidate is decoding, prefill candidates go back to `h` so
/// that lower-priority prefill never delays it. With `stage_aware` off all
/// candidates compete on key alone. Unselected requests return to `h`.
pub fn stage_aware_schedule<F>(
    h: &mut DispatchQueue,
    u: &mut ArrivalBuffer,
    ongoing: &[RequestId],
    b: usize,
    table: &RequestTable,
    stage_aware: bool,
    mut key_of: F,
) -> Batch
where
    F: FnMut(&Request) -> PriorityKey,
{
    let candidates = extract_top_b(h, u, b, |id| key_of(table.get(id)));
    let mut merged: Vec<(RequestId, PriorityKey)> =
        ongoing.iter().map(|&id| (id, key_of(table.get(id)))).collect();
    let best = candidates.iter().chain(&merged).min_by_key(|c| c.1).map(|c| c.0);
    let Some(best) = best else {
        return Batch::empty();
    };
    if !stage_aware || table.get(best).needs_prefill() {
        merged.extend(candidates);
    } else {
        let (prefill, decode): (Vec<_>, Vec<_>) =
            candidates.into_iter().partition(|c| table.get(c.0).needs_prefill());
        h.push_back(prefill).expect("candidates were popped from h");
        merged.extend(decode);
    }
    merged.sort_by_key(|c| c.1);
    let rest = merged.split_off(b.min(merged.len()));
    h.push_back(rest).expect("unselected requests are not queued");
    Batch::from_sorted(&merged, table)
}

/// Reference batch for a baseline policy: the `b` live requests with the
/// smallest keys.
pub fn baseline_policy(kind: Policy, live: &[&Request], b: usize) -> Batch {
    debug_assert!(kind != Policy::Semantic);
    let mut keyed: Vec<_> = live.iter().map(|r| (r.id, kind.key(r), r.needs_prefill())).collect();
    keyed.sort_by_key(|k| k.1);
    keyed.truncate(b);
    let kind = if keyed.iter().any(|k| k.2) { BatchKind::Prefill } else { BatchKind::Decode };
    Batch { members: keyed.into_iter().map(|k| k.0).collect(), kind }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::request::{LengthBucket, Stage, UrgencyLevel};
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn waiting(id: u64, urgency: u8, ft: f64) -> Request {
        let mut r = Request::new(RequestId(id), 0.0, 32, 64, UrgencyLevel::from_rank(urgency));
        r.predicted_bucket = LengthBucket { index: 0, representative_len: 50 };
        r.remaining_estimate = ft;
        r
    }

    fn decoding(id: u64, urgency: u8, ft: f64) -> Request {
        let mut r = waiting(id, urgency, ft);
        r.stage = Stage::Decoding;
        r.started = true;
        r.prefilled_tokens = r.prompt_len;
        r.decoded_tokens = 3;
        r.kv_device_tokens = u64::from(r.prompt_len) + 3;
        r
    }

    fn key(r: &Request) -> PriorityKey {
        Policy::Semantic.key(r)
    }

    fn queue(table: &RequestTable, ids: &[u64]) -> DispatchQueue {
        let mut h = DispatchQueue::new();
        for &i in ids {
            h.insert(RequestId(i), key(table.get(RequestId(i)))).unwrap();
        }
        h
    }

    #[test]
    fn buffered_candidate_outranks_heap() {
        let table = RequestTable::from_requests(vec![waiting(0, 0, 1.0), waiting(1, 0, 1.0), waiting(2, 0, 1.0), waiting(3, 3, 1.0)]);
        let mut h = queue(&table, &[3]);
        let mut u = ArrivalBuffer::new();
        u.append(RequestId(0)).unwrap();
        let c = extract_top_b(&mut h, &mut u, 1, |id| key(table.get(id)));
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].0, RequestId(0));
        assert!(u.is_empty());
        assert!(h.contains(RequestId(3)));
    }

    #[test]
    fn empty_inputs_give_empty_batch() {
        let table = RequestTable::new();
        let mut h = DispatchQueue::new();
        let mut u = ArrivalBuffer::new();
        assert!(extract_top_b(&mut h, &mut u, 4, |_| unreachable!()).is_empty());
        assert!(stage_aware_schedule(&mut h, &mut u, &[], 4, &table, true, key).is_empty());
    }

    #[test]
    fn top_three_of_five() {
        let table = RequestTable::from_requests((0..5).map(|i| waiting(i, 0, 5.0 - i as f64)).collect());
        let mut h = queue(&table, &[0, 1, 2, 3, 4]);
        let c = extract_top_b(&mut h, &mut ArrivalBuffer::new(), 3, |id| key(table.get(id)));
        let ids: Vec<_> = c.iter().map(|c| c.0).collect();
        assert_eq!(ids, vec![RequestId(4), RequestId(3), RequestId(2)]);
    }

    #[test]
    fn single_waiting_request_prefills() {
        let table = RequestTable::from_requests(vec![waiting(0, 2, 1.0)]);
        let mut h = queue(&table, &[0]);
        let batch = stage_aware_schedule(&mut h, &mut ArrivalBuffer::new(), &[], 4, &table, true, key);
        assert_eq!(batch.members, vec![RequestId(0)]);
        assert_eq!(batch.kind, BatchKind::Prefill);
    }

    #[test]
    fn urgent_decode_blocks_lower_prefill() {
        let table = RequestTable::from_requests(vec![decoding(0, 0, 2.0), waiting(1, 1, 0.1)]);
        let mut h = queue(&table, &[1]);
        let batch = stage_aware_schedule(&mut h, &mut ArrivalBuffer::new(), &[RequestId(0)], 4, &table, true, key);
        assert_eq!(batch.members, vec![RequestId(0)]);
        assert_eq!(batch.kind, BatchKind::Decode);
        assert!(h.contains(RequestId(1)));
    }

    #[test]
    fn urgent_prefill_merges_everything() {
        let table = RequestTable::from_requests(vec![decoding(0, 1, 2.0), waiting(1, 0, 0.1), waiting(2, 3, 0.1)]);
        let mut h = queue(&table, &[1, 2]);
        let batch = stage_aware_schedule(&mut h, &mut ArrivalBuffer::new(), &[RequestId(0)], 4, &table, true, key);
        assert_eq!(batch.members, vec![RequestId(1), RequestId(0), RequestId(2)]);
        assert_eq!(batch.kind, BatchKind::Prefill);
    }

    #[test]
    fn eight_candidates_batch_of_four() {
        let reqs: Vec<_> = (0..8)
            .map(|i| if i % 2 == 0 { decoding(i, (i % 3) as u8, i as f64) } else { waiting(i, 0, i as f64) })
            .collect();
        let table = RequestTable::from_requests(reqs);
        let ongoing = [RequestId(0), RequestId(2), RequestId(4), RequestId(6)];
        let mut h = queue(&table, &[1, 3, 5, 7]);
        let batch = stage_aware_schedule(&mut h, &mut ArrivalBuffer::new(), &ongoing, 4, &table, true, key);
        assert_eq!(batch.len(), 4);
        let mut all: Vec<_> = batch.members.iter().copied().chain(h.ids()).collect();
        all.sort();
        assert_eq!(all, (0..8).map(RequestId).collect::<Vec<_>>());
        // the best request is decoding, so only decoding requests are eligible
        let mut expected: Vec<_> = table.iter().filter(|r| !r.needs_prefill()).map(|r| (key(r), r.id)).collect();
        expected.sort();
        assert!(!table.get(expected[0].1).needs_prefill());
        assert_eq!(batch.members, expected[..4].iter().map(|e| e.1).collect::<Vec<_>>());
    }

    #[test]
    fn baselines() {
        let mut r1 = waiting(0, 3, 9.0);
        r1.arrival = 0.0;
        let mut r2 = waiting(1, 0, 0.5);
        r2.arrival = 1.0;
        assert_eq!(baseline_policy(Policy::Fcfs, &[&r2, &r1], 1).members, vec![RequestId(0)]);
        assert_eq!(baseline_policy(Policy::Sjf, &[&r1, &r2], 1).members, vec![RequestId(1)]);
        let mut r3 = waiting(2, 3, 0.1);
        r3.arrival = 2.0;
        assert_eq!(baseline_policy(Policy::Hpjf, &[&r3, &r1], 1).members, vec![RequestId(0)]);
    }

    fn arb_request(id: u64) -> impl Strategy<Value = Request> {
        (0u8..5, 0.0f64..10.0, 0.0f64..5.0, any::<bool>()).prop_map(move |(u, ft, a, dec)| {
            let mut r = if dec { decoding(id, u, ft) } else { waiting(id, u, ft) };
            r.arrival = a;
            r
        })
    }

    fn arb_world() -> impl Strategy<Value = (Vec<Request>, Vec<u8>, usize)> {
        (1usize..24).prop_flat_map(|n| {
            let reqs: Vec<_> = (0..n as u64).map(arb_request).collect();
            // 0 heap, 1 buffer, 2 ongoing (decoding requests only)
            (reqs, proptest::collection::vec(0u8..3, n), 1usize..8)
        })
    }

    proptest! {
        #[test]
        fn schedule_conserves_and_never_inverts((reqs, place, b) in arb_world()) {
            let table = RequestTable::from_requests(reqs);
            let mut h = DispatchQueue::new();
            let mut u = ArrivalBuffer::new();
            let mut ongoing = Vec::new();
            for (r, p) in table.iter().zip(&place) {
                match (p, r.needs_prefill()) {
                    (2, false) => ongoing.push(r.id),
                    (1, _) => u.append(r.id).unwrap(),
                    _ => h.insert(r.id, key(r)).unwrap(),
                }
            }
            let best = table.iter().min_by_key(|r| key(r)).unwrap();
            let batch = stage_aware_schedule(&mut h, &mut u, &ongoing, b, &table, true, key);

            let mut all: Vec<_> = batch.members.iter().copied().chain(h.ids()).collect();
            all.sort();
            prop_assert_eq!(all, (0..table.len() as u64).map(RequestId).collect::<Vec<_>>());
            prop_assert!(u.is_empty());
            prop_assert!(batch.len() <= b && !batch.is_empty());
            prop_assert!(h.is_consistent());
            if !best.needs_prefill() {
                prop_assert!(batch.members.iter().all(|id| !table.get(*id).needs_prefill()));
                prop_assert_eq!(batch.kind, BatchKind::Decode);
            }
            prop_assert_eq!(batch.members[0], best.id);
            let keys: Vec<_> = batch.members.iter().map(|id| key(table.get(*id))).collect();
            prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
