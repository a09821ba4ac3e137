//! BoDe: bounded-delay queue management.
//!
//! Arrivals are tagged and always admitted. At each delivery opportunity
//! the head is dropped while its sojourn time has reached the bounded
//! delay, unless fewer than `protect_threshold` packets are queued; the
//! first surviving head is served. Every packet served from a queue that
//! still held at least `protect_threshold` packets therefore waited less
//! than the bound.

use super::{DequeueResult, EnqueueResult, PacketQueue, QueueDiscipline, SimRng};
use crate::packet::{DropReason, Packet};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BodeParams {
    pub bounded_delay: SimTime,
    /// Queues shorter than this never drop at egress.
    pub protect_threshold: usize,
    /// Optional hard byte limit; arrivals beyond it are tail-dropped.
    pub cap_bytes: Option<u64>,
}

impl BodeParams {
    pub const DEFAULT_PROTECT_THRESHOLD: usize = 3;

    pub fn new(bounded_delay: SimTime) -> Self {
        BodeParams {
            bounded_delay,
            protect_threshold: Self::DEFAULT_PROTECT_THRESHOLD,
            cap_bytes: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Bode {
    params: BodeParams,
    queue: PacketQueue,
}

impl Bode {
    pub fn new(params: BodeParams) -> Self {
        assert!(params.bounded_delay > SimTime::ZERO, "bounded delay must be positive");
        assert!(params.protect_threshold >= 1, "protect threshold must be >= 1");
        Bode {
            params,
            queue: PacketQueue::new(),
        }
    }

    pub fn params(&self) -> &BodeParams {
        &self.params
    }

    /// Admits `packet` and tags its arrival time.
    pub fn bode_enqueue(&mut self, mut packet: Packet, now: SimTime) -> EnqueueResult {
        self.queue.offer(&mut packet, now);
        if let Some(cap) = self.params.cap_bytes {
            if self.queue.bytes() + u64::from(packet.size_bytes) > cap {
                let rec = self.queue.reject(packet, now, DropReason::TailOverflow);
                return EnqueueResult::rejected(rec);
            }
        }
        self.queue.push(packet);
        EnqueueResult::accepted()
    }

    pub fn bode_dequeue(&mut self, now: SimTime) -> DequeueResult {
        let mut drops = Vec::new();
        // Re-check the length after every drop; with a threshold of two or
        // more a non-empty queue always has something left to serve.
        while self.queue.len() >= self.params.protect_threshold {
            let head = self.queue.front().expect("non-empty");
            if head.waited(now) < self.params.bounded_delay {
                break;
            }
            drops.extend(self.queue.drop_front(now, DropReason::ExpiredAtEgress));
        }
        DequeueResult {
            served: self.queue.serve_front(),
            drops,
        }
    }
}

impl QueueDiscipline for Bode {
    fn enqueue(&mut self, packet: Packet, now: SimTime, _rng: &mut SimRng) -> EnqueueResult {
        self.bode_enqueue(packet, now)
    }

    fn dequeue(&mut self, now: SimTime) -> DequeueResult {
        self.bode_dequeue(now)
    }

    fn queue(&self) -> &PacketQueue {
        &self.queue
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{ms, pkt};
    use super::*;
    use proptest::prelude::*;

    fn bode(d_ms: u64) -> Bode {
        Bode::new(BodeParams::new(ms(d_ms)))
    }

    /// Loads packets so that at `now` their sojourn times are `sojourns_ms`.
    fn loaded(d_ms: u64, now_ms: u64, sojourns_ms: &[u64]) -> Bode {
        let mut q = bode(d_ms);
        for (i, s) in sojourns_ms.iter().enumerate() {
            q.bode_enqueue(pkt(i as u64, 1500), ms(now_ms - s));
        }
        q
    }

    fn ids(r: &DequeueResult) -> (Vec<u64>, Option<u64>) {
        (
            r.drops.iter().map(|d| d.packet.id).collect(),
            r.served.as_ref().map(|p| p.id),
        )
    }

    #[test]
    fn enqueue_never_drops_without_cap() {
        let mut q = bode(100);
        assert!(q.bode_enqueue(pkt(0, 1500), ms(0)).is_accepted());
        assert_eq!(q.queue().len(), 1);
        for i in 1..10_000 {
            assert!(q.bode_enqueue(pkt(i, 1500), ms(0)).is_accepted());
        }
        assert_eq!(q.queue().len(), 10_000);
        assert_eq!(q.queue().front().unwrap().enqueued_at, ms(0));
    }

    #[test]
    fn enqueue_tail_drops_at_cap() {
        let mut q = Bode::new(BodeParams {
            cap_bytes: Some(80 * 1500),
            ..BodeParams::new(ms(100))
        });
        for i in 0..80 {
            assert!(q.bode_enqueue(pkt(i, 1500), ms(i)).is_accepted());
        }
        let r = q.bode_enqueue(pkt(80, 1500), ms(80));
        match r.admission {
            super::super::Admission::Dropped(rec) => {
                assert_eq!(rec.reason, DropReason::TailOverflow);
                assert_eq!(rec.packet.id, 80);
            }
            other => panic!("{other:?}"),
        }
        q.queue().check_invariants().unwrap();
    }

    #[test]
    fn drops_expired_head_and_serves_next() {
        let mut q = loaded(100, 1000, &[150, 50, 10, 5]);
        let r = q.bode_dequeue(ms(1000));
        assert_eq!(ids(&r), (vec![0], Some(1)));
        assert_eq!(r.drops[0].reason, DropReason::ExpiredAtEgress);
    }

    #[test]
    fn short_queue_is_protected() {
        let mut q = loaded(100, 1000, &[150, 120]);
        let r = q.bode_dequeue(ms(1000));
        assert_eq!(ids(&r), (vec![], Some(0)));
    }

    #[test]
    fn protection_rechecked_after_each_drop() {
        let mut q = loaded(100, 1000, &[200, 150, 120]);
        let r = q.bode_dequeue(ms(1000));
        assert_eq!(ids(&r), (vec![0], Some(1)));
    }

    #[test]
    fn sojourn_equal_to_bound_is_dropped() {
        let mut q = loaded(100, 1000, &[100, 100, 100, 0]);
        let r = q.bode_dequeue(ms(1000));
        assert_eq!(ids(&r), (vec![0, 1], Some(2)));
    }

    #[test]
    fn five_expired_heads_drop_three() {
        let mut q = loaded(20, 1000, &[90, 80, 70, 60, 50]);
        let r = q.bode_dequeue(ms(1000));
        assert_eq!(ids(&r), (vec![0, 1, 2], Some(3)));
        assert_eq!(q.queue().len(), 1);
    }

    #[test]
    fn empty_queue_serves_nothing() {
        let mut q = bode(100);
        assert_eq!(q.bode_dequeue(ms(5)), DequeueResult::default());
    }

    fn bode_events() -> impl Strategy<Value = Vec<(bool, u64)>> {
        prop::collection::vec((any::<bool>(), 0u64..40_000), 1..120)
    }

    proptest! {
        /// After every dequeue, a queue of at least `protect_threshold`
        /// packets holds only packets younger than the bound.
        #[test]
        fn remaining_packets_are_fresh(
            events in bode_events(),
            d in prop::sample::select(vec![20u64, 50, 100]),
            protect in 1usize..5,
        ) {
            let mut q = Bode::new(BodeParams {
                bounded_delay: ms(d),
                protect_threshold: protect,
                cap_bytes: None,
            });
            let mut now = SimTime::ZERO;
            for (i, (is_arrival, dt)) in events.into_iter().enumerate() {
                now += SimTime::from_micros(dt);
                if is_arrival {
                    q.bode_enqueue(pkt(i as u64, 1500), now);
                } else {
                    let before = q.queue().len();
                    let r = q.bode_dequeue(now);
                    if protect >= 2 {
                        prop_assert_eq!(r.served.is_some(), before > 0);
                    } else {
                        prop_assert_eq!(r.served.is_some(), before > r.drops.len());
                    }
                    if q.queue().len() >= protect {
                        for p in q.queue().iter() {
                            prop_assert!(now - p.enqueued_at < ms(d));
                        }
                    }
                    if let Some(p) = &r.served {
                        if before - r.drops.len() >= protect {
                            prop_assert!(now - p.enqueued_at < ms(d));
                        }
                    }
                }
                q.queue().check_invariants().map_err(TestCaseError::fail)?;
            }
        }
    }
}
