//! CoDel (RFC 8289), packet mode.
//!
//! Once the head's sojourn time has stayed at or above `target` for a full
//! `interval`, CoDel enters the dropping state and drops at times spaced
//! `interval / sqrt(count)` apart until the sojourn falls below target.

use super::{DequeueResult, EnqueueResult, PacketQueue, QueueDiscipline, SimRng};
use crate::packet::{DropReason, DropRecord, Packet};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoDelParams {
    pub target: SimTime,
    pub interval: SimTime,
    pub capacity_bytes: u64,
}

/// Control variables, exposed read-only for inspection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CoDelState {
    /// Zero when the sojourn is below target.
    pub first_above_time: Option<SimTime>,
    pub dropping: bool,
    pub drop_next: SimTime,
    pub count: u32,
    pub last_count: u32,
}

#[derive(Clone, Debug)]
pub struct CoDel {
    params: CoDelParams,
    state: CoDelState,
    queue: PacketQueue,
    max_packet: u64,
}

struct Popped {
    packet: Option<Packet>,
    ok_to_drop: bool,
}

impl CoDel {
    pub fn new(params: CoDelParams) -> Self {
        assert!(params.target > SimTime::ZERO && params.interval > SimTime::ZERO);
        CoDel {
            params,
            state: CoDelState::default(),
            queue: PacketQueue::new(),
            max_packet: u64::from(crate::packet::MAX_PACKET_BYTES),
        }
    }

    pub fn params(&self) -> &CoDelParams {
        &self.params
    }

    pub fn state(&self) -> &CoDelState {
        &self.state
    }

    /// `t + interval / sqrt(count)`.
    pub fn control_law(&self, t: SimTime, count: u32) -> SimTime {
        let step = self.params.interval.as_micros() as f64 / f64::from(count.max(1)).sqrt();
        t + SimTime::from_micros(step.round() as u64)
    }

    fn do_dequeue(&mut self, now: SimTime) -> Popped {
        let Some(packet) = self.queue.pop_front() else {
            self.state.first_above_time = None;
            return Popped {
                packet: None,
                ok_to_drop: false,
            };
        };
        let sojourn = packet.waited(now);
        let mut ok_to_drop = false;
        if sojourn < self.params.target || self.queue.bytes() <= self.max_packet {
            self.state.first_above_time = None;
        } else {
            match self.state.first_above_time {
                None => self.state.first_above_time = Some(now + self.params.interval),
                Some(t) if now >= t => ok_to_drop = true,
                Some(_) => {}
            }
        }
        Popped {
            packet: Some(packet),
            ok_to_drop,
        }
    }

    fn drop(&mut self, packet: Packet, now: SimTime, drops: &mut Vec<DropRecord>) {
        self.queue.counters.dropped += 1;
        drops.push(DropRecord::new(packet, now, DropReason::CoDelDrop));
    }

    pub fn codel_dequeue(&mut self, now: SimTime) -> DequeueResult {
        let mut drops = Vec::new();
        let mut r = self.do_dequeue(now);
        if r.packet.is_none() {
            self.state.dropping = false;
            return DequeueResult::default();
        }
        if self.state.dropping {
            if !r.ok_to_drop {
                self.state.dropping = false;
            }
            while self.state.dropping && now >= self.state.drop_next {
                let p = r.packet.take().expect("packet present while dropping");
                self.drop(p, now, &mut drops);
                self.state.count += 1;
                r = self.do_dequeue(now);
                if !r.ok_to_drop {
                    self.state.dropping = false;
                } else {
                    self.state.drop_next = self.control_law(self.state.drop_next, self.state.count);
                }
            }
        } else if r.ok_to_drop {
            let p = r.packet.take().expect("packet present");
            self.drop(p, now, &mut drops);
            r = self.do_dequeue(now);
            self.state.dropping = true;
            // Resume near the previous drop rate if we were dropping recently.
            let delta = self.state.count.saturating_sub(self.state.last_count);
            let recent = (now.as_micros() as i64 - self.state.drop_next.as_micros() as i64)
                < 16 * self.params.interval.as_micros() as i64;
            self.state.count = if delta > 1 && recent { delta } else { 1 };
            self.state.drop_next = self.control_law(now, self.state.count);
            self.state.last_count = self.state.count;
        }
        if r.packet.is_some() {
            self.queue.counters.served += 1;
        }
        DequeueResult {
            served: r.packet,
            drops,
        }
    }
}

impl QueueDiscipline for CoDel {
    fn enqueue(&mut self, mut packet: Packet, now: SimTime, _rng: &mut SimRng) -> EnqueueResult {
        self.queue.offer(&mut packet, now);
        if self.queue.bytes() + u64::from(packet.size_bytes) > self.params.capacity_bytes {
            let rec = self.queue.reject(packet, now, DropReason::TailOverflow);
            return EnqueueResult::rejected(rec);
        }
        self.max_packet = self.max_packet.max(u64::from(packet.size_bytes));
        self.queue.push(packet);
        EnqueueResult::accepted()
    }

    fn dequeue(&mut self, now: SimTime) -> DequeueResult {
        self.codel_dequeue(now)
    }

    fn queue(&self) -> &PacketQueue {
        &self.queue
    }
}
