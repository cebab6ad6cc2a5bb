//! Arrival buffer split into a producer and a consumer handle for use from
//! two threads.
//!
//! The producer appends newly predicted requests; the consumer, which owns
//! the dispatch queue, drains them. There is exactly one of each, so
//! appends are never lost and no request is drained twice.

use std::sync::{Arc, Mutex, MutexGuard};

use semsched_core::{ArrivalBuffer, DispatchQueue, PriorityKey, QueueError, RequestId};

pub struct Producer {
    shared: Arc<Mutex<ArrivalBuffer>>,
}

pub struct Consumer {
    shared: Arc<Mutex<ArrivalBuffer>>,
}

pub fn split() -> (Producer, Consumer) {
    let shared = Arc::new(Mutex::new(ArrivalBuffer::new()));
    (Producer { shared: Arc::clone(&shared) }, Consumer { shared })
}

fn lock(m: &Mutex<ArrivalBuffer>) -> MutexGuard<'_, ArrivalBuffer> {
    // a panicking peer cannot leave the buffer half-updated
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Producer {
    pub fn append(&self, id: RequestId) -> Result<(), QueueError> {
        lock(&self.shared).append(id)
    }
}

impl Consumer {
    /// Moves everything appended so far into `heap`; returns how many.
    pub fn drain_into<F>(&self, heap: &mut DispatchQueue, key_of: F) -> Result<usize, QueueError>
    where
        F: FnMut(RequestId) -> PriorityKey,
    {
        let mut buf = lock(&self.shared);
        let n = buf.len();
        buf.drain_into(heap, key_of)?;
        Ok(n)
    }

    pub fn is_empty(&self) -> bool {
        lock(&self.shared).is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use semsched_core::request::obtain_priority;
    use semsched_core::UrgencyLevel;
    use std::thread;

    fn key(id: RequestId) -> PriorityKey {
        obtain_priority(UrgencyLevel::from_rank((id.0 % 5) as u8), 1.0, id.0 as f64, id)
    }

    #[test]
    fn concurrent_appends_all_arrive_once() {
        const N: u64 = 20_000;
        let (tx, rx) = split();
        let producer = thread::spawn(move || {
            for i in 0..N {
                tx.append(RequestId(i)).unwrap();
                if i % 97 == 0 {
                    thread::yield_now();
                }
            }
        });
        let mut heap = DispatchQueue::new();
        let mut seen = 0;
        while seen < N as usize {
            seen += rx.drain_into(&mut heap, key).unwrap();
        }
        producer.join().unwrap();
        assert!(rx.is_empty());
        assert_eq!(heap.len(), N as usize);
        assert!(heap.is_consistent());
        let mut last = None;
        while let Ok((_, k)) = heap.pop() {
            assert!(last.is_none_or(|l| l < k));
            last = Some(k);
        }
    }
}
