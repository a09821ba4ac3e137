//! PIE with the basic linear control law.
//!
//! Every `update_interval` the queuing delay is estimated from the byte
//! backlog and the measured departure rate, and the drop probability moves
//! by `alpha * (qdelay - ref_delay) + beta * (qdelay - qdelay_old)`
//! (delays in seconds), clamped to [0, 1]. Arrivals are dropped with that
//! probability. Gains are fixed; there is no auto-scaling, burst allowance
//! or de-randomization.

use rand::Rng;

use super::{DequeueResult, EnqueueResult, PacketQueue, QueueDiscipline, SimRng};
use crate::packet::{DropReason, Packet};
use crate::time::SimTime;

/// Backlog needed to start a departure-rate measurement cycle.
const DQ_THRESHOLD_BYTES: u64 = 16 * 1024;
/// Weight of a new departure-rate sample.
const RATE_WEIGHT: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PieParams {
    pub ref_delay: SimTime,
    pub alpha: f64,
    pub beta: f64,
    pub update_interval: SimTime,
    pub capacity_bytes: u64,
}

impl PieParams {
    pub const DEFAULT_ALPHA: f64 = 0.125;
    pub const DEFAULT_BETA: f64 = 1.25;
    pub const DEFAULT_UPDATE_INTERVAL: SimTime = SimTime::from_millis(30);
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PieState {
    pub drop_prob: f64,
    /// Seconds.
    pub qdelay_old: f64,
    /// Bytes per second; zero until the first measurement completes.
    pub avg_dequeue_rate: f64,
}

#[derive(Clone, Copy, Debug)]
struct Measurement {
    start: SimTime,
    bytes: u64,
}

#[derive(Clone, Debug)]
pub struct Pie {
    params: PieParams,
    state: PieState,
    next_update: SimTime,
    measurement: Option<Measurement>,
    queue: PacketQueue,
}

impl Pie {
    pub fn new(params: PieParams) -> Self {
        assert!(params.update_interval > SimTime::ZERO);
        Pie {
            next_update: params.update_interval,
            params,
            state: PieState::default(),
            measurement: None,
            queue: PacketQueue::new(),
        }
    }

    pub fn params(&self) -> &PieParams {
        &self.params
    }

    pub fn state(&self) -> &PieState {
        &self.state
    }

    /// Overrides the control variables; for tests and warm starts.
    pub fn set_state(&mut self, state: PieState) {
        self.state = state;
    }

    /// Current queuing-delay estimate in seconds.
    pub fn qdelay(&self) -> f64 {
        if self.state.avg_dequeue_rate > 0.0 {
            self.queue.bytes() as f64 / self.state.avg_dequeue_rate
        } else {
            0.0
        }
    }

    /// One application of the control law using the current backlog.
    pub fn pie_update(&mut self) {
        let qdelay = self.qdelay();
        self.apply_law(qdelay);
    }

    /// The control law for a given delay estimate (seconds).
    pub fn apply_law(&mut self, qdelay: f64) {
        let reference = self.params.ref_delay.as_secs_f64();
        let p = self.state.drop_prob
            + self.params.alpha * (qdelay - reference)
            + self.params.beta * (qdelay - self.state.qdelay_old);
        self.state.drop_prob = p.clamp(0.0, 1.0);
        self.state.qdelay_old = qdelay;
    }

    /// Runs every periodic update due at or before `now`. Between events
    /// the backlog is constant, so catching up lazily matches a timer.
    fn catch_up(&mut self, now: SimTime) {
        while self.next_update <= now {
            self.pie_update();
            self.next_update += self.params.update_interval;
        }
    }

    fn record_departure(&mut self, bytes: u64, backlog_before: u64, now: SimTime) {
        if self.measurement.is_none() && backlog_before >= DQ_THRESHOLD_BYTES {
            self.measurement = Some(Measurement { start: now, bytes: 0 });
            return;
        }
        let Some(m) = self.measurement.as_mut() else {
            return;
        };
        m.bytes += bytes;
        if m.bytes >= DQ_THRESHOLD_BYTES {
            let elapsed = (now - m.start).as_secs_f64();
            if elapsed > 0.0 {
                let sample = m.bytes as f64 / elapsed;
                let avg = &mut self.state.avg_dequeue_rate;
                *avg = if *avg == 0.0 {
                    sample
                } else {
                    (1.0 - RATE_WEIGHT) * *avg + RATE_WEIGHT * sample
                };
            }
            self.measurement = (self.queue.bytes() >= DQ_THRESHOLD_BYTES)
                .then_some(Measurement { start: now, bytes: 0 });
        } else if self.queue.is_empty() {
            self.measurement = None;
        }
    }
}

impl QueueDiscipline for Pie {
    fn enqueue(&mut self, mut packet: Packet, now: SimTime, rng: &mut SimRng) -> EnqueueResult {
        self.catch_up(now);
        self.queue.offer(&mut packet, now);
        // Always draw so the generator advances identically whatever p is.
        let draw: f64 = rng.gen();
        if draw < self.state.drop_prob {
            let rec = self.queue.reject(packet, now, DropReason::ProbabilisticEarly);
            return EnqueueResult::rejected(rec);
        }
        if self.queue.bytes() + u64::from(packet.size_bytes) > self.params.capacity_bytes {
            let rec = self.queue.reject(packet, now, DropReason::TailOverflow);
            return EnqueueResult::rejected(rec);
        }
        self.queue.push(packet);
        EnqueueResult::accepted()
    }

    fn dequeue(&mut self, now: SimTime) -> DequeueResult {
        self.catch_up(now);
        let backlog = self.queue.bytes();
        let served = self.queue.serve_front();
        if let Some(p) = &served {
            self.record_departure(u64::from(p.size_bytes), backlog, now);
        }
        DequeueResult {
            served,
            drops: Vec::new(),
        }
    }

    fn queue(&self) -> &PacketQueue {
        &self.queue
    }
}
