//! Packets and drop records.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::time::SimTime;

/// One delivery opportunity carries at most one packet of this size.
pub const MAX_PACKET_BYTES: u32 = 1500;

pub type PacketId = u64;
pub type FlowId = u32;
pub type ClassId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Packet {
    /// Unique across the whole run; issued in increasing order by the engine.
    pub id: PacketId,
    pub flow_id: FlowId,
    /// Priority class; 0 is served first.
    pub class_id: ClassId,
    /// Full on-link size, header included.
    pub size_bytes: u32,
    /// Generation time at the source.
    pub created_at: SimTime,
    /// Ingress tag written by the bottleneck queue.
    pub enqueued_at: SimTime,
    pub seq_no: u64,
    pub is_retransmission: bool,
}

impl Packet {
    pub fn new(id: PacketId, flow_id: FlowId, size_bytes: u32, created_at: SimTime) -> Self {
        Packet {
            id,
            flow_id,
            class_id: 0,
            size_bytes,
            created_at,
            enqueued_at: created_at,
            seq_no: 0,
            is_retransmission: false,
        }
    }

    /// Time spent in the queue so far. Only meaningful once enqueued and for
    /// `now >= enqueued_at`; queue disciplines guarantee both.
    #[inline]
    pub(crate) fn waited(&self, now: SimTime) -> SimTime {
        debug_assert!(now >= self.enqueued_at);
        now.saturating_sub(self.enqueued_at)
    }
}

/// Sojourn time of `packet` at `now`: `now - enqueued_at`.
pub fn sojourn_time(packet: &Packet, now: SimTime) -> Result<SimTime> {
    now.checked_sub(packet.enqueued_at)
        .ok_or(Error::NegativeSojourn {
            enqueued_at: packet.enqueued_at,
            now,
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropReason {
    /// BoDe egress drop: sojourn reached the bounded delay.
    ExpiredAtEgress,
    /// Arriving packet rejected because the buffer is full.
    TailOverflow,
    /// Oldest packet evicted to admit an arrival.
    HeadOverflow,
    /// PIE random early drop.
    ProbabilisticEarly,
    /// CoDel control-law drop at dequeue.
    CoDelDrop,
}

impl DropReason {
    pub const ALL: [DropReason; 5] = [
        DropReason::ExpiredAtEgress,
        DropReason::TailOverflow,
        DropReason::HeadOverflow,
        DropReason::ProbabilisticEarly,
        DropReason::CoDelDrop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::ExpiredAtEgress => "expired_at_egress",
            DropReason::TailOverflow => "tail_overflow",
            DropReason::HeadOverflow => "head_overflow",
            DropReason::ProbabilisticEarly => "probabilistic_early",
            DropReason::CoDelDrop => "codel_drop",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DropReason {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DropReason::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown drop reason `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DropRecord {
    pub packet: Packet,
    pub dropped_at: SimTime,
    pub reason: DropReason,
}

impl DropRecord {
    pub fn new(packet: Packet, dropped_at: SimTime, reason: DropReason) -> Self {
        debug_assert!(dropped_at >= packet.enqueued_at);
        DropRecord {
            packet,
            dropped_at,
            reason,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tagged(enqueued_us: u64) -> Packet {
        let mut p = Packet::new(0, 0, 1500, SimTime::ZERO);
        p.enqueued_at = SimTime::from_micros(enqueued_us);
        p
    }

    #[test]
    fn sojourn_examples() {
        assert_eq!(sojourn_time(&tagged(0), SimTime::ZERO).unwrap(), SimTime::ZERO);
        assert_eq!(
            sojourn_time(&tagged(10_000), SimTime::from_micros(110_000)).unwrap(),
            SimTime::from_micros(100_000)
        );
        assert!(matches!(
            sojourn_time(&tagged(5_000), SimTime::from_micros(4_000)),
            Err(Error::NegativeSojourn { .. })
        ));
    }

    #[test]
    fn drop_reason_names_round_trip() {
        for r in DropReason::ALL {
            assert_eq!(r.as_str().parse::<DropReason>().unwrap(), r);
        }
    }

    proptest! {
        #[test]
        fn sojourn_is_timestamp_difference(a in 0u64..1 << 40, b in 0u64..1 << 40) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let s = sojourn_time(&tagged(lo), SimTime::from_micros(hi)).unwrap();
            prop_assert_eq!(s.as_micros(), hi - lo);
        }
    }
}
