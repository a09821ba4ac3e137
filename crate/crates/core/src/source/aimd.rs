//! Loss-based AIMD bulk sender (Reno congestion control with NewReno
//! partial-ack recovery).
//!
//! - slow start: `cwnd += 1` per new ack until `ssthresh`
//! - congestion avoidance: `cwnd += 1/cwnd` per new ack
//! - third duplicate ack: `ssthresh = max(cwnd/2, 2)`, fast retransmit,
//!   fast recovery with window inflation; an ack covering everything sent
//!   before the loss deflates `cwnd` to `ssthresh`
//! - retransmission timeout: `ssthresh = max(cwnd/2, 2)`, `cwnd = 1`,
//!   go-back-N from the oldest unacked segment, RTO doubles
//!
//! RTO follows the smoothed estimator `srtt + 4 * rttvar` with a 200 ms
//! floor; retransmitted segments are never sampled.

use super::{Feedback, SourceAction, SourceStats, TrafficSource};
use crate::time::SimTime;

pub const RTO_MIN: SimTime = SimTime::from_millis(200);
pub const RTO_MAX: SimTime = SimTime::from_secs(60);

#[derive(Clone, Debug, PartialEq)]
pub struct AimdParams {
    pub initial_cwnd: f64,
    pub rto_min: SimTime,
}

impl Default for AimdParams {
    fn default() -> Self {
        AimdParams {
            initial_cwnd: 10.0,
            rto_min: RTO_MIN,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AimdState {
    SlowStart,
    CongestionAvoidance,
    FastRecovery,
}

#[derive(Clone, Debug)]
pub struct AimdSource {
    cwnd: f64,
    ssthresh: f64,
    state: AimdState,
    srtt: Option<SimTime>,
    rttvar: SimTime,
    rto: SimTime,
    rto_min: SimTime,
    dupacks: u32,
    /// Oldest unacknowledged sequence number.
    snd_una: u64,
    /// Next sequence number to transmit.
    snd_nxt: u64,
    /// One past the highest sequence number ever transmitted.
    high_sent: u64,
    /// Highest sequence outstanding when the last recovery began.
    recover: Option<u64>,
    stop: Option<SimTime>,
    rto_deadline: Option<SimTime>,
    timer_at: Option<SimTime>,
    timer_token: u64,
    stats: SourceStats,
    max_in_flight_over_cwnd: f64,
}

impl AimdSource {
    pub fn new(params: AimdParams, stop: Option<SimTime>) -> Self {
        AimdSource {
            cwnd: params.initial_cwnd.max(1.0),
            ssthresh: f64::INFINITY,
            state: AimdState::SlowStart,
            srtt: None,
            rttvar: SimTime::ZERO,
            rto: params.rto_min,
            rto_min: params.rto_min,
            dupacks: 0,
            snd_una: 0,
            snd_nxt: 0,
            high_sent: 0,
            recover: None,
            stop,
            rto_deadline: None,
            timer_at: None,
            timer_token: 0,
            stats: SourceStats::default(),
            max_in_flight_over_cwnd: 0.0,
        }
    }

    pub fn cwnd(&self) -> f64 {
        self.cwnd
    }

    pub fn ssthresh(&self) -> f64 {
        self.ssthresh
    }

    pub fn state(&self) -> AimdState {
        self.state
    }

    pub fn rto(&self) -> SimTime {
        self.rto
    }

    pub fn srtt(&self) -> Option<SimTime> {
        self.srtt
    }

    pub fn rttvar(&self) -> SimTime {
        self.rttvar
    }

    pub fn in_flight(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    /// Largest `in_flight - cwnd` observed right after a transmission;
    /// never positive when the window is respected.
    pub fn worst_window_excess(&self) -> f64 {
        self.max_in_flight_over_cwnd
    }

    /// Test hook: places the sender in a given window state.
    pub fn force_window(&mut self, cwnd: f64, ssthresh: f64, state: AimdState) {
        self.cwnd = cwnd;
        self.ssthresh = ssthresh;
        self.state = state;
    }

    fn stopped(&self, now: SimTime) -> bool {
        self.stop.is_some_and(|s| now >= s)
    }

    fn transmit(&mut self, seq: u64, out: &mut Vec<SourceAction>) {
        let retransmission = seq < self.high_sent;
        out.push(SourceAction::Send {
            seq,
            retransmission,
        });
        self.stats.sent += 1;
        if retransmission {
            self.stats.retransmitted += 1;
        }
        self.high_sent = self.high_sent.max(seq + 1);
    }

    /// Sends while the window allows.
    fn fill_window(&mut self, now: SimTime, out: &mut Vec<SourceAction>) {
        while (self.in_flight() + 1) as f64 <= self.cwnd {
            if self.snd_nxt >= self.high_sent && self.stopped(now) {
                break;
            }
            let seq = self.snd_nxt;
            self.transmit(seq, out);
            self.snd_nxt += 1;
            let excess = self.in_flight() as f64 - self.cwnd;
            self.max_in_flight_over_cwnd = self.max_in_flight_over_cwnd.max(excess);
        }
        if self.in_flight() > 0 && self.rto_deadline.is_none() {
            self.arm(now, out);
        }
    }

    fn arm(&mut self, now: SimTime, out: &mut Vec<SourceAction>) {
        let deadline = now + self.rto;
        self.rto_deadline = Some(deadline);
        if self.timer_at.is_none_or(|t| t > deadline) {
            self.timer_token += 1;
            self.timer_at = Some(deadline);
            out.push(SourceAction::Timer {
                at: deadline,
                token: self.timer_token,
            });
        }
    }

    fn sample_rtt(&mut self, rtt: SimTime) {
        match self.srtt {
            None => {
                self.srtt = Some(rtt);
                self.rttvar = rtt / 2;
            }
            Some(srtt) => {
                let err = if srtt > rtt { srtt - rtt } else { rtt - srtt };
                self.rttvar = SimTime::from_micros((3 * self.rttvar.as_micros() + err.as_micros()) / 4);
                self.srtt = Some(SimTime::from_micros((7 * srtt.as_micros() + rtt.as_micros()) / 8));
            }
        }
        let srtt = self.srtt.expect("just set");
        let var = (self.rttvar * 4).max(SimTime::from_micros(1));
        self.rto = (srtt + var).max(self.rto_min).min(RTO_MAX);
    }

    fn enter_fast_recovery(&mut self, out: &mut Vec<SourceAction>) {
        self.ssthresh = (self.cwnd / 2.0).max(2.0);
        self.recover = Some(self.high_sent - 1);
        let seq = self.snd_una;
        self.transmit(seq, out);
        self.stats.fast_retransmits += 1;
        self.cwnd = self.ssthresh + 3.0;
        self.state = AimdState::FastRecovery;
    }

    /// Processes a cumulative ack.
    pub fn aimd_on_ack(
        &mut self,
        ack_seq: u64,
        echo_sent_at: SimTime,
        echo_retransmission: bool,
        now: SimTime,
        out: &mut Vec<SourceAction>,
    ) {
        if ack_seq > self.snd_una {
            if !echo_retransmission {
                self.sample_rtt(now - echo_sent_at);
            }
            let acked = ack_seq - self.snd_una;
            self.snd_una = ack_seq;
            self.snd_nxt = self.snd_nxt.max(self.snd_una);
            match self.state {
                AimdState::FastRecovery => {
                    if self.recover.is_some_and(|r| ack_seq > r) {
                        self.cwnd = self.ssthresh;
                        self.state = AimdState::CongestionAvoidance;
                        self.dupacks = 0;
                    } else {
                        // Partial ack: the next hole is lost too.
                        let seq = self.snd_una;
                        self.transmit(seq, out);
                        self.cwnd = (self.cwnd - acked as f64 + 1.0).max(1.0);
                    }
                }
                AimdState::SlowStart => {
                    self.cwnd += 1.0;
                    if self.cwnd >= self.ssthresh {
                        self.state = AimdState::CongestionAvoidance;
                    }
                    self.dupacks = 0;
                }
                AimdState::CongestionAvoidance => {
                    self.cwnd += 1.0 / self.cwnd;
                    self.dupacks = 0;
                }
            }
            self.rto_deadline = None;
            if self.in_flight() > 0 {
                self.arm(now, out);
            }
        } else if ack_seq == self.snd_una && self.in_flight() > 0 {
            self.dupacks += 1;
            if self.state == AimdState::FastRecovery {
                self.cwnd += 1.0;
            } else if self.dupacks == 3 && self.recover.is_none_or(|r| self.snd_una > r) {
                self.enter_fast_recovery(out);
            }
        }
        self.fill_window(now, out);
    }

    pub fn aimd_on_timeout(&mut self, now: SimTime, out: &mut Vec<SourceAction>) {
        self.ssthresh = (self.cwnd / 2.0).max(2.0);
        self.cwnd = 1.0;
        self.state = AimdState::SlowStart;
        self.dupacks = 0;
        self.recover = Some(self.high_sent.saturating_sub(1));
        self.snd_nxt = self.snd_una;
        self.rto = (self.rto * 2).min(RTO_MAX);
        self.stats.timeouts += 1;
        self.rto_deadline = None;
        self.fill_window(now, out);
    }
}

impl TrafficSource for AimdSource {
    fn on_start(&mut self, now: SimTime, out: &mut Vec<SourceAction>) {
        self.fill_window(now, out);
    }

    fn on_timer(&mut self, now: SimTime, token: u64, out: &mut Vec<SourceAction>) {
        if token != self.timer_token {
            return;
        }
        self.timer_at = None;
        match self.rto_deadline {
            None => {}
            Some(d) if now < d => {
                self.timer_token += 1;
                self.timer_at = Some(d);
                out.push(SourceAction::Timer {
                    at: d,
                    token: self.timer_token,
                });
            }
            Some(_) => self.aimd_on_timeout(now, out),
        }
    }

    fn on_feedback(&mut self, now: SimTime, feedback: &Feedback, out: &mut Vec<SourceAction>) {
        if let Feedback::Ack {
            ack_seq,
            echo_sent_at,
            echo_retransmission,
            ..
        } = *feedback
        {
            self.aimd_on_ack(ack_seq, echo_sent_at, echo_retransmission, now, out);
        }
    }

    fn stats(&self) -> SourceStats {
        self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(v: u64) -> SimTime {
        SimTime::from_millis(v)
    }

    fn sends(out: &[SourceAction]) -> Vec<(u64, bool)> {
        out.iter()
            .filter_map(|a| match *a {
                SourceAction::Send {
                    seq,
                    retransmission,
                } => Some((seq, retransmission)),
                _ => None,
            })
            .collect()
    }

    fn started(cwnd: f64) -> (AimdSource, Vec<SourceAction>) {
        let mut s = AimdSource::new(
            AimdParams {
                initial_cwnd: cwnd,
                ..AimdParams::default()
            },
            None,
        );
        let mut out = Vec::new();
        s.on_start(SimTime::ZERO, &mut out);
        (s, out)
    }

    #[test]
    fn initial_window_sent() {
        let (s, out) = started(10.0);
        assert_eq!(sends(&out).len(), 10);
        assert_eq!(s.in_flight(), 10);
    }

    #[test]
    fn congestion_avoidance_increment() {
        let (mut s, _) = started(8.0);
        s.force_window(8.0, 4.0, AimdState::CongestionAvoidance);
        let mut out = Vec::new();
        s.aimd_on_ack(1, SimTime::ZERO, false, ms(10), &mut out);
        assert_eq!(s.cwnd(), 8.125);
    }

    #[test]
    fn slow_start_increment_and_exit() {
        let (mut s, _) = started(2.0);
        s.force_window(2.0, 3.0, AimdState::SlowStart);
        let mut out = Vec::new();
        s.aimd_on_ack(1, SimTime::ZERO, false, ms(10), &mut out);
        assert_eq!((s.cwnd(), s.state()), (3.0, AimdState::CongestionAvoidance));
    }

    #[test]
    fn three_dupacks_fast_retransmit() {
        let (mut s, _) = started(10.0);
        s.force_window(10.0, f64::INFINITY, AimdState::CongestionAvoidance);
        let mut out = Vec::new();
        // Segment 0 lost; 1, 2, 3 arrive and each acks 0.
        for _ in 0..2 {
            s.aimd_on_ack(0, SimTime::ZERO, false, ms(10), &mut out);
        }
        assert!(sends(&out).is_empty());
        s.aimd_on_ack(0, SimTime::ZERO, false, ms(10), &mut out);
        assert_eq!(s.ssthresh(), 5.0);
        assert_eq!(sends(&out), vec![(0, true)]);
        assert_eq!(s.state(), AimdState::FastRecovery);
        assert_eq!(s.stats().fast_retransmits, 1);

        // Full ack ends recovery at ssthresh.
        out.clear();
        s.aimd_on_ack(10, ms(10), true, ms(20), &mut out);
        assert_eq!((s.cwnd(), s.state()), (5.0, AimdState::CongestionAvoidance));
        assert_eq!(sends(&out).len(), 5);
    }

    #[test]
    fn partial_ack_retransmits_next_hole() {
        let (mut s, _) = started(10.0);
        let mut out = Vec::new();
        for _ in 0..3 {
            s.aimd_on_ack(0, SimTime::ZERO, false, ms(10), &mut out);
        }
        out.clear();
        // Retransmitted 0 arrives; 5 was also lost so the ack stops at 5.
        s.aimd_on_ack(5, ms(10), true, ms(20), &mut out);
        assert_eq!(s.state(), AimdState::FastRecovery);
        assert!(sends(&out).contains(&(5, true)));
    }

    #[test]
    fn timeout_resets_window_and_backs_off() {
        let (mut s, _) = started(20.0);
        let mut out = Vec::new();
        s.aimd_on_timeout(ms(200), &mut out);
        assert_eq!(s.ssthresh(), 10.0);
        assert_eq!(s.cwnd(), 1.0);
        assert_eq!(s.state(), AimdState::SlowStart);
        assert_eq!(sends(&out), vec![(0, true)]);
        assert_eq!(s.rto(), ms(400));
    }

    #[test]
    fn consecutive_timeouts_double_rto() {
        let (mut s, out) = started(1.0);
        assert_eq!(s.rto(), ms(200));
        let mut timer = out
            .iter()
            .find_map(|a| match *a {
                SourceAction::Timer { at, token } => Some((at, token)),
                _ => None,
            })
            .unwrap();
        let mut fired = Vec::new();
        for _ in 0..3 {
            let mut out = Vec::new();
            fired.push(timer.0);
            s.on_timer(timer.0, timer.1, &mut out);
            assert_eq!(sends(&out), vec![(0, true)]);
            assert_eq!(s.in_flight(), 1);
            timer = out
                .iter()
                .find_map(|a| match *a {
                    SourceAction::Timer { at, token } => Some((at, token)),
                    _ => None,
                })
                .unwrap();
        }
        assert_eq!(fired, vec![ms(200), ms(600), ms(1400)]);
        assert_eq!(s.rto(), ms(1600));
        assert_eq!(s.stats().timeouts, 3);
    }

    #[test]
    fn stale_timer_ignored_and_rearmed_lazily() {
        let (mut s, out) = started(2.0);
        let first = out
            .iter()
            .find_map(|a| match *a {
                SourceAction::Timer { at, token } => Some((at, token)),
                _ => None,
            })
            .unwrap();
        let mut out = Vec::new();
        // Ack at 150 ms pushes the deadline to 350 ms.
        s.aimd_on_ack(1, SimTime::ZERO, false, ms(150), &mut out);
        let mut out = Vec::new();
        s.on_timer(first.0, first.1, &mut out);
        assert_eq!(s.stats().timeouts, 0);
        assert!(out
            .iter()
            .any(|a| matches!(a, SourceAction::Timer { at, .. } if *at > first.0)));
    }

    #[test]
    fn rtt_estimator() {
        let (mut s, _) = started(10.0);
        let mut out = Vec::new();
        s.aimd_on_ack(1, SimTime::ZERO, false, ms(100), &mut out);
        assert_eq!(s.srtt(), Some(ms(100)));
        assert_eq!(s.rttvar(), ms(50));
        assert_eq!(s.rto(), ms(300));
        s.aimd_on_ack(2, ms(100), false, ms(300), &mut out);
        // rttvar = 3/4*50 + 1/4*100 = 62.5; srtt = 7/8*100 + 1/8*200 = 112.5
        assert_eq!(s.rttvar(), SimTime::from_micros(62_500));
        assert_eq!(s.srtt(), Some(SimTime::from_micros(112_500)));
        assert_eq!(s.rto(), SimTime::from_micros(362_500));
        // Retransmitted segments are not sampled.
        s.aimd_on_ack(3, SimTime::ZERO, true, ms(5_000), &mut out);
        assert_eq!(s.srtt(), Some(SimTime::from_micros(112_500)));
    }
}
