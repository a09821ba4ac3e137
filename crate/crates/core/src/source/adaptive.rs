//! Rate-adaptive interactive sender, a stand-in for a video-call client.
//!
//! The source paces packets at its current rate. A loss report cuts the
//! rate multiplicatively; a delivery report whose one-way delay is under
//! the comfort threshold raises it additively, at most once per RTT.

use super::{packet_interval_us, Feedback, SourceAction, SourceStats, TrafficSource};
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveParams {
    pub initial_mbps: f64,
    pub min_mbps: f64,
    pub max_mbps: f64,
    pub increase_step_kbps: f64,
    /// In (0, 1).
    pub decrease_factor: f64,
    /// Delay below which deliveries count as good news. Defaults to the
    /// scenario's delay target when unset.
    pub comfort: Option<SimTime>,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        AdaptiveParams {
            initial_mbps: 1.0,
            min_mbps: 0.1,
            max_mbps: 6.0,
            increase_step_kbps: 100.0,
            decrease_factor: 0.85,
            comfort: None,
        }
    }
}

impl AdaptiveParams {
    pub fn validate(&self) -> Result<(), String> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.min_mbps) && pos(self.max_mbps) && pos(self.initial_mbps)) {
            return Err("adaptive rates must be positive".into());
        }
        if self.min_mbps > self.max_mbps {
            return Err("adaptive min_mbps exceeds max_mbps".into());
        }
        if !(self.min_mbps..=self.max_mbps).contains(&self.initial_mbps) {
            return Err("adaptive initial_mbps outside [min_mbps, max_mbps]".into());
        }
        if !(self.increase_step_kbps.is_finite() && self.increase_step_kbps >= 0.0) {
            return Err("adaptive increase_kbps must be non-negative".into());
        }
        if !(self.decrease_factor > 0.0 && self.decrease_factor < 1.0) {
            return Err("adaptive decrease_factor must lie in (0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AdaptiveSource {
    rate_bps: f64,
    min_bps: f64,
    max_bps: f64,
    step_bps: f64,
    decrease_factor: f64,
    comfort: SimTime,
    packet_size: u32,
    stop: Option<SimTime>,
    next_seq: u64,
    rtt: SimTime,
    last_increase: Option<SimTime>,
    stats: SourceStats,
}

impl AdaptiveSource {
    pub fn new(params: AdaptiveParams, packet_size: u32, stop: Option<SimTime>, min_rtt: SimTime) -> Self {
        AdaptiveSource {
            rate_bps: params.initial_mbps * 1e6,
            min_bps: params.min_mbps * 1e6,
            max_bps: params.max_mbps * 1e6,
            step_bps: params.increase_step_kbps * 1e3,
            decrease_factor: params.decrease_factor,
            comfort: params.comfort.unwrap_or(SimTime::from_millis(100)),
            packet_size,
            stop,
            next_seq: 0,
            rtt: min_rtt,
            last_increase: None,
            stats: SourceStats::default(),
        }
    }

    pub fn rate_bps(&self) -> f64 {
        self.rate_bps
    }

    pub fn on_lost(&mut self) {
        self.rate_bps = (self.rate_bps * self.decrease_factor).max(self.min_bps);
    }

    pub fn on_delivered(&mut self, now: SimTime, one_way_delay: SimTime, rtt: SimTime) {
        self.rtt = rtt;
        if one_way_delay >= self.comfort {
            return;
        }
        if self
            .last_increase
            .is_some_and(|t| now.saturating_sub(t) < self.rtt)
        {
            return;
        }
        self.rate_bps = (self.rate_bps + self.step_bps).min(self.max_bps);
        self.last_increase = Some(now);
    }

    fn emit(&mut self, now: SimTime, out: &mut Vec<SourceAction>) {
        if self.stop.is_some_and(|s| now >= s) {
            return;
        }
        out.push(SourceAction::Send {
            seq: self.next_seq,
            retransmission: false,
        });
        self.next_seq += 1;
        self.stats.sent += 1;
        let gap = packet_interval_us(self.packet_size, self.rate_bps).round() as u64;
        out.push(SourceAction::Timer {
            at: now + SimTime::from_micros(gap.max(1)),
            token: 0,
        });
    }
}

impl TrafficSource for AdaptiveSource {
    fn on_start(&mut self, now: SimTime, out: &mut Vec<SourceAction>) {
        self.emit(now, out);
    }

    fn on_timer(&mut self, now: SimTime, _token: u64, out: &mut Vec<SourceAction>) {
        self.emit(now, out);
    }

    fn on_feedback(&mut self, now: SimTime, feedback: &Feedback, _out: &mut Vec<SourceAction>) {
        match *feedback {
            Feedback::Delivered {
                sent_at,
                one_way_delay,
                ..
            } => self.on_delivered(now, one_way_delay, now - sent_at),
            Feedback::Lost { .. } => self.on_lost(),
            Feedback::Ack { .. } => {}
        }
    }

    fn stats(&self) -> SourceStats {
        self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source(initial: f64) -> AdaptiveSource {
        AdaptiveSource::new(
            AdaptiveParams {
                initial_mbps: initial,
                min_mbps: 0.1,
                max_mbps: 8.0,
                decrease_factor: 0.5,
                comfort: Some(SimTime::from_millis(100)),
                ..AdaptiveParams::default()
            },
            1500,
            None,
            SimTime::from_millis(10),
        )
    }

    #[test]
    fn loss_halves_rate() {
        let mut s = source(6.0);
        s.on_lost();
        assert_eq!(s.rate_bps(), 3e6);
    }

    #[test]
    fn loss_at_min_stays_at_min() {
        let mut s = source(0.1);
        s.on_lost();
        assert_eq!(s.rate_bps(), 0.1e6);
    }

    #[test]
    fn increase_at_most_once_per_rtt() {
        let mut s = source(1.0);
        let ms = SimTime::from_millis;
        s.on_delivered(ms(100), ms(5), ms(10));
        assert_eq!(s.rate_bps(), 1.1e6);
        s.on_delivered(ms(105), ms(5), ms(10));
        assert_eq!(s.rate_bps(), 1.1e6);
        s.on_delivered(ms(110), ms(5), ms(10));
        assert!((s.rate_bps() - 1.2e6).abs() < 1e-6);
        // Uncomfortable delay never raises the rate.
        s.on_delivered(ms(200), ms(150), ms(10));
        assert!((s.rate_bps() - 1.2e6).abs() < 1e-6);
    }

    #[test]
    fn rate_capped_at_max() {
        let mut s = source(8.0);
        s.on_delivered(SimTime::from_millis(1), SimTime::ZERO, SimTime::ZERO);
        assert_eq!(s.rate_bps(), 8e6);
    }

    #[test]
    fn validation() {
        assert!(AdaptiveParams::default().validate().is_ok());
        let bad = AdaptiveParams {
            decrease_factor: 1.0,
            ..AdaptiveParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = AdaptiveParams {
            initial_mbps: 10.0,
            ..AdaptiveParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
