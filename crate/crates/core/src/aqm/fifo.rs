//! Plain FIFO queues with a byte capacity.

use super::{DequeueResult, EnqueueResult, PacketQueue, QueueDiscipline, SimRng};
use crate::packet::{DropReason, Packet};
use crate::time::SimTime;

/// Rejects arrivals that would overflow the buffer. A packet that exactly
/// fills the capacity is admitted.
#[derive(Clone, Debug)]
pub struct TailDrop {
    capacity_bytes: u64,
    queue: PacketQueue,
}

impl TailDrop {
    pub fn new(capacity_bytes: u64) -> Self {
        TailDrop {
            capacity_bytes,
            queue: PacketQueue::new(),
        }
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }
}

/// Admits every arrival, evicting the oldest packets until it fits.
#[derive(Clone, Debug)]
pub struct HeadDrop {
    capacity_bytes: u64,
    queue: PacketQueue,
}

impl HeadDrop {
    pub fn new(capacity_bytes: u64) -> Self {
        HeadDrop {
            capacity_bytes,
            queue: PacketQueue::new(),
        }
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }
}

fn fifo_dequeue(queue: &mut PacketQueue) -> DequeueResult {
    DequeueResult {
        served: queue.serve_front(),
        drops: Vec::new(),
    }
}

impl QueueDiscipline for TailDrop {
    fn enqueue(&mut self, mut packet: Packet, now: SimTime, _rng: &mut SimRng) -> EnqueueResult {
        self.queue.offer(&mut packet, now);
        if self.queue.bytes() + u64::from(packet.size_bytes) > self.capacity_bytes {
            let rec = self.queue.reject(packet, now, DropReason::TailOverflow);
            return EnqueueResult::rejected(rec);
        }
        self.queue.push(packet);
        EnqueueResult::accepted()
    }

    fn dequeue(&mut self, _now: SimTime) -> DequeueResult {
        fifo_dequeue(&mut self.queue)
    }

    fn queue(&self) -> &PacketQueue {
        &self.queue
    }
}

impl QueueDiscipline for HeadDrop {
    fn enqueue(&mut self, mut packet: Packet, now: SimTime, _rng: &mut SimRng) -> EnqueueResult {
        self.queue.offer(&mut packet, now);
        let mut evicted = Vec::new();
        while self.queue.bytes() + u64::from(packet.size_bytes) > self.capacity_bytes {
            match self.queue.drop_front(now, DropReason::HeadOverflow) {
                Some(rec) => evicted.push(rec),
                None => break,
            }
        }
        self.queue.push(packet);
        EnqueueResult {
            evicted,
            ..EnqueueResult::accepted()
        }
    }

    fn dequeue(&mut self, _now: SimTime) -> DequeueResult {
        fifo_dequeue(&mut self.queue)
    }

    fn queue(&self) -> &PacketQueue {
        &self.queue
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{ms, pkt, rng};
    use super::super::{Admission, DEFAULT_CAPACITY_BYTES};
    use super::*;

    #[test]
    fn taildrop_boundaries() {
        let mut rng = rng();
        let mut q = TailDrop::new(DEFAULT_CAPACITY_BYTES);
        assert!(q.enqueue(pkt(0, 1500), ms(0), &mut rng).is_accepted());

        // Fill to 1_499_000 bytes: 999 full packets plus one of 500.
        let mut q = TailDrop::new(DEFAULT_CAPACITY_BYTES);
        for i in 0..999 {
            q.enqueue(pkt(i, 1500), ms(0), &mut rng);
        }
        q.enqueue(pkt(999, 500), ms(0), &mut rng);
        assert_eq!(q.byte_occupancy(), 1_499_000);
        let r = q.enqueue(pkt(1000, 1500), ms(1), &mut rng);
        assert!(matches!(r.admission, Admission::Dropped(ref d) if d.reason == DropReason::TailOverflow));
        // Exactly filling the capacity is allowed.
        assert!(q.enqueue(pkt(1001, 1000), ms(1), &mut rng).is_accepted());
        assert_eq!(q.byte_occupancy(), DEFAULT_CAPACITY_BYTES);
        q.queue().check_invariants().unwrap();
    }

    #[test]
    fn headdrop_evicts_oldest() {
        let mut rng = rng();
        let mut q = HeadDrop::new(DEFAULT_CAPACITY_BYTES);
        assert!(q.enqueue(pkt(0, 1500), ms(0), &mut rng).evicted.is_empty());
        for i in 1..1000 {
            q.enqueue(pkt(i, 1500), ms(0), &mut rng);
        }
        let r = q.enqueue(pkt(1000, 1500), ms(1), &mut rng);
        assert!(r.is_accepted());
        assert_eq!(r.evicted.len(), 1);
        assert_eq!(r.evicted[0].packet.id, 0);
        assert_eq!(r.evicted[0].reason, DropReason::HeadOverflow);
        // A small arrival into a full queue still frees one whole head.
        let r = q.enqueue(pkt(1001, 300), ms(2), &mut rng);
        assert_eq!(r.evicted.iter().map(|d| d.packet.id).collect::<Vec<_>>(), vec![1]);
        assert_eq!(q.byte_occupancy(), 999 * 1500 + 300);
        q.queue().check_invariants().unwrap();
    }

    #[test]
    fn headdrop_mixed_sizes_evicts_smallest_sufficient_prefix() {
        let mut rng = rng();
        let mut q = HeadDrop::new(3000);
        q.enqueue(pkt(0, 200), ms(0), &mut rng);
        q.enqueue(pkt(1, 300), ms(0), &mut rng);
        q.enqueue(pkt(2, 1500), ms(0), &mut rng);
        q.enqueue(pkt(3, 1000), ms(0), &mut rng);
        // Occupancy 3000; admitting 1200 needs 1200 freed: 200 + 300 is not
        // enough, 200 + 300 + 1500 is.
        let r = q.enqueue(pkt(4, 1200), ms(1), &mut rng);
        assert_eq!(r.evicted.iter().map(|d| d.packet.id).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(q.byte_occupancy(), 2200);
    }

    #[test]
    fn fifo_order() {
        let mut rng = rng();
        let mut q = TailDrop::new(DEFAULT_CAPACITY_BYTES);
        assert_eq!(q.dequeue(ms(0)).served, None);
        for i in 0..3 {
            q.enqueue(pkt(i, 1500), ms(0), &mut rng);
        }
        let order: Vec<u64> = (0..3).map(|t| q.dequeue(ms(t)).served.unwrap().id).collect();
        assert_eq!(order, vec![0, 1, 2]);
        assert_eq!(q.dequeue(ms(4)), DequeueResult::default());
    }
}
