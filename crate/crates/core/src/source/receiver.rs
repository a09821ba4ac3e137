use std::collections::{BTreeMap, BTreeSet};

use super::Feedback;
use crate::packet::Packet;
use crate::time::SimTime;

/// What a receiver does with one delivered packet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reception {
    pub feedback: Feedback,
    /// Gap timer to arm: fire at `.0` with token `.1`.
    pub timer: Option<(SimTime, u64)>,
}

#[derive(Clone, Debug)]
pub enum Receiver {
    Cumulative(CumulativeReceiver),
    Datagram(DatagramReceiver),
}

impl Receiver {
    pub fn on_packet(&mut self, packet: &Packet, now: SimTime) -> Reception {
        match self {
            Receiver::Cumulative(r) => Reception {
                feedback: r.on_packet(packet),
                timer: None,
            },
            Receiver::Datagram(r) => r.on_packet(packet, now),
        }
    }

    pub fn on_timer(&mut self, token: u64) -> Option<Feedback> {
        match self {
            Receiver::Cumulative(_) => None,
            Receiver::Datagram(r) => r.on_timer(token),
        }
    }
}

/// TCP-style receiver: buffers out-of-order segments and acks every
/// arrival with the next expected sequence number.
#[derive(Clone, Debug, Default)]
pub struct CumulativeReceiver {
    next_expected: u64,
    out_of_order: BTreeSet<u64>,
}

impl CumulativeReceiver {
    pub fn next_expected(&self) -> u64 {
        self.next_expected
    }

    pub fn on_packet(&mut self, packet: &Packet) -> Feedback {
        let seq = packet.seq_no;
        if seq == self.next_expected {
            self.next_expected += 1;
            while self.out_of_order.remove(&self.next_expected) {
                self.next_expected += 1;
            }
        } else if seq > self.next_expected {
            self.out_of_order.insert(seq);
        }
        Feedback::Ack {
            ack_seq: self.next_expected,
            packet_id: packet.id,
            echo_sent_at: packet.created_at,
            echo_retransmission: packet.is_retransmission,
        }
    }
}

/// Datagram receiver: reports every delivery and declares a sequence gap
/// lost once it has stayed open for `gap_timeout`.
#[derive(Clone, Debug)]
pub struct DatagramReceiver {
    gap_timeout: SimTime,
    expected: u64,
    next_token: u64,
    /// token -> (first missing seq, count)
    open_gaps: BTreeMap<u64, (u64, u64)>,
    late: BTreeSet<u64>,
}

impl DatagramReceiver {
    pub fn new(gap_timeout: SimTime) -> Self {
        DatagramReceiver {
            gap_timeout,
            expected: 0,
            next_token: 0,
            open_gaps: BTreeMap::new(),
            late: BTreeSet::new(),
        }
    }

    pub fn on_packet(&mut self, packet: &Packet, now: SimTime) -> Reception {
        let seq = packet.seq_no;
        let mut timer = None;
        if seq > self.expected {
            let token = self.next_token;
            self.next_token += 1;
            self.open_gaps.insert(token, (self.expected, seq - self.expected));
            timer = Some((now + self.gap_timeout, token));
        } else if seq < self.expected {
            self.late.insert(seq);
        }
        self.expected = self.expected.max(seq + 1);
        Reception {
            feedback: Feedback::Delivered {
                seq,
                packet_id: packet.id,
                sent_at: packet.created_at,
                one_way_delay: now - packet.created_at,
            },
            timer,
        }
    }

    pub fn on_timer(&mut self, token: u64) -> Option<Feedback> {
        let (first, count) = self.open_gaps.remove(&token)?;
        let filled = self.late.range(first..first + count).count() as u64;
        let still_missing = count - filled;
        (still_missing > 0).then_some(Feedback::Lost {
            first_seq: first,
            count: still_missing,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(seq: u64) -> Packet {
        let mut p = Packet::new(seq, 0, 1500, SimTime::ZERO);
        p.seq_no = seq;
        p
    }

    fn ack_of(f: Feedback) -> u64 {
        match f {
            Feedback::Ack { ack_seq, .. } => ack_seq,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cumulative_acks_and_dupacks() {
        let mut r = CumulativeReceiver::default();
        assert_eq!(ack_of(r.on_packet(&pkt(0))), 1);
        // 1 lost: 2, 3, 4 each ack 1.
        for s in 2..5 {
            assert_eq!(ack_of(r.on_packet(&pkt(s))), 1);
        }
        // Retransmitted 1 fills the hole.
        assert_eq!(ack_of(r.on_packet(&pkt(1))), 5);
        // Duplicate delivery of old data re-acks.
        assert_eq!(ack_of(r.on_packet(&pkt(2))), 5);
    }

    #[test]
    fn datagram_gap_reported_after_timer() {
        let mut r = DatagramReceiver::new(SimTime::from_millis(20));
        assert!(r.on_packet(&pkt(0), SimTime::ZERO).timer.is_none());
        let rec = r.on_packet(&pkt(3), SimTime::from_millis(5));
        let (at, token) = rec.timer.unwrap();
        assert_eq!(at, SimTime::from_millis(25));
        assert_eq!(
            r.on_timer(token),
            Some(Feedback::Lost {
                first_seq: 1,
                count: 2
            })
        );
        assert_eq!(r.on_timer(token), None);
    }

    #[test]
    fn filled_gap_not_reported() {
        let mut r = DatagramReceiver::new(SimTime::from_millis(20));
        r.on_packet(&pkt(0), SimTime::ZERO);
        let (_, token) = r.on_packet(&pkt(2), SimTime::ZERO).timer.unwrap();
        r.on_packet(&pkt(1), SimTime::from_millis(1));
        assert_eq!(r.on_timer(token), None);
    }
}
