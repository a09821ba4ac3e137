use super::{packet_interval_us, Feedback, SourceAction, SourceStats, TrafficSource};
use crate::time::SimTime;

/// Open-loop constant-bitrate sender, evenly paced.
#[derive(Clone, Debug)]
pub struct CbrSource {
    rate_bps: f64,
    packet_size: u32,
    stop: Option<SimTime>,
    start: SimTime,
    next_seq: u64,
    stats: SourceStats,
}

impl CbrSource {
    pub fn new(rate_bps: f64, packet_size: u32, stop: Option<SimTime>) -> Self {
        assert!(rate_bps > 0.0, "CBR rate must be positive");
        CbrSource {
            rate_bps,
            packet_size,
            stop,
            start: SimTime::ZERO,
            next_seq: 0,
            stats: SourceStats::default(),
        }
    }

    pub fn interval(&self) -> SimTime {
        SimTime::from_micros(packet_interval_us(self.packet_size, self.rate_bps).round() as u64)
    }

    /// Departure time of the `seq`-th packet. Computed from the start time
    /// rather than accumulated, so rounding never drifts.
    fn departure(&self, seq: u64) -> SimTime {
        let offset = packet_interval_us(self.packet_size, self.rate_bps) * seq as f64;
        self.start + SimTime::from_micros(offset.round() as u64)
    }

    /// Next departure after the one at `now`.
    pub fn next_departure(&self, now: SimTime) -> SimTime {
        self.departure(self.next_seq).max(now)
    }

    fn emit(&mut self, now: SimTime, out: &mut Vec<SourceAction>) {
        if self.stop.is_some_and(|s| now >= s) {
            return;
        }
        out.push(SourceAction::Send {
            seq: self.next_seq,
            retransmission: false,
        });
        self.stats.sent += 1;
        self.next_seq += 1;
        out.push(SourceAction::Timer {
            at: self.next_departure(now),
            token: 0,
        });
    }
}

impl TrafficSource for CbrSource {
    fn on_start(&mut self, now: SimTime, out: &mut Vec<SourceAction>) {
        self.start = now;
        self.emit(now, out);
    }

    fn on_timer(&mut self, now: SimTime, _token: u64, out: &mut Vec<SourceAction>) {
        self.emit(now, out);
    }

    fn on_feedback(&mut self, _now: SimTime, _feedback: &Feedback, _out: &mut Vec<SourceAction>) {}

    fn stats(&self) -> SourceStats {
        self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gap(rate_mbps: f64) -> SimTime {
        let mut s = CbrSource::new(rate_mbps * 1e6, 1500, None);
        let mut out = Vec::new();
        s.on_start(SimTime::ZERO, &mut out);
        match out[1] {
            SourceAction::Timer { at, .. } => at,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pacing_examples() {
        assert_eq!(gap(2.0), SimTime::from_millis(6));
        assert_eq!(gap(4.0), SimTime::from_millis(3));
        assert_eq!(gap(0.6), SimTime::from_millis(20));
    }

    #[test]
    fn no_drift_and_stops() {
        // 7 Mbps: 1714.2857 µs per packet.
        let mut s = CbrSource::new(7e6, 1500, Some(SimTime::from_secs(1)));
        let mut out = Vec::new();
        s.on_start(SimTime::ZERO, &mut out);
        let mut now = SimTime::ZERO;
        while let Some(SourceAction::Timer { at, .. }) = out.last().copied() {
            now = at;
            out.clear();
            s.on_timer(now, 0, &mut out);
        }
        // 7e6 b/s for 1 s = 583.33 packets, departures at 0..=583 * 1714.29 µs < 1 s.
        assert_eq!(s.stats().sent, 584);
        assert!(now >= SimTime::from_secs(1));
    }
}
