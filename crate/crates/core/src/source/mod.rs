//! Traffic sources and their receivers.
//!
//! Sources never see the bottleneck directly. They emit [`SourceAction`]s
//! and learn about the network only from [`Feedback`] that receivers send
//! back over the return path.

mod adaptive;
mod aimd;
mod cbr;
mod receiver;

pub use adaptive::{AdaptiveParams, AdaptiveSource};
pub use aimd::{AimdParams, AimdSource, AimdState};
pub use cbr::CbrSource;
pub use receiver::{CumulativeReceiver, DatagramReceiver, Receiver, Reception};

use crate::packet::{ClassId, FlowId, PacketId};
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq)]
pub enum SourceKind {
    Cbr { rate_mbps: f64 },
    Adaptive(AdaptiveParams),
    Aimd(AimdParams),
}

impl SourceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::Cbr { .. } => "cbr",
            SourceKind::Adaptive(_) => "adaptive",
            SourceKind::Aimd(_) => "aimd",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceConfig {
    pub kind: SourceKind,
    pub class: ClassId,
    pub packet_size: u32,
    pub start: SimTime,
    /// No new data is generated at or after this time.
    pub stop: Option<SimTime>,
}

impl SourceConfig {
    pub fn new(kind: SourceKind) -> Self {
        SourceConfig {
            kind,
            class: 0,
            packet_size: 1500,
            start: SimTime::ZERO,
            stop: None,
        }
    }

    pub fn with_class(mut self, class: ClassId) -> Self {
        self.class = class;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feedback {
    /// Cumulative acknowledgement: every sequence number below `ack_seq`
    /// has arrived. Echoes the triggering packet's send time.
    Ack {
        ack_seq: u64,
        packet_id: PacketId,
        echo_sent_at: SimTime,
        echo_retransmission: bool,
    },
    /// Per-packet delivery report for datagram flows.
    Delivered {
        seq: u64,
        packet_id: PacketId,
        sent_at: SimTime,
        one_way_delay: SimTime,
    },
    /// A sequence gap outlived the receiver's gap timer.
    Lost { first_seq: u64, count: u64 },
}

impl Feedback {
    /// Packet whose delivery generated this feedback, if any.
    pub fn packet_id(&self) -> Option<PacketId> {
        match *self {
            Feedback::Ack { packet_id, .. } | Feedback::Delivered { packet_id, .. } => {
                Some(packet_id)
            }
            Feedback::Lost { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceAction {
    Send { seq: u64, retransmission: bool },
    /// Wake the source at `at` with `token`.
    Timer { at: SimTime, token: u64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SourceStats {
    pub sent: u64,
    pub retransmitted: u64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
}

pub trait TrafficSource {
    fn on_start(&mut self, now: SimTime, out: &mut Vec<SourceAction>);
    fn on_timer(&mut self, now: SimTime, token: u64, out: &mut Vec<SourceAction>);
    fn on_feedback(&mut self, now: SimTime, feedback: &Feedback, out: &mut Vec<SourceAction>);
    fn stats(&self) -> SourceStats;
}

/// A configured source bound to a flow.
#[derive(Clone, Debug)]
pub enum Source {
    Cbr(CbrSource),
    Adaptive(AdaptiveSource),
    Aimd(AimdSource),
}

impl Source {
    pub fn from_config(cfg: &SourceConfig, min_rtt: SimTime, comfort: SimTime) -> Self {
        match &cfg.kind {
            SourceKind::Cbr { rate_mbps } => {
                Source::Cbr(CbrSource::new(rate_mbps * 1e6, cfg.packet_size, cfg.stop))
            }
            SourceKind::Adaptive(p) => {
                let mut p = p.clone();
                p.comfort.get_or_insert(comfort);
                Source::Adaptive(AdaptiveSource::new(p, cfg.packet_size, cfg.stop, min_rtt))
            }
            SourceKind::Aimd(p) => Source::Aimd(AimdSource::new(p.clone(), cfg.stop)),
        }
    }

    pub fn receiver(&self, gap_timeout: SimTime) -> Receiver {
        match self {
            Source::Aimd(_) => Receiver::Cumulative(CumulativeReceiver::default()),
            _ => Receiver::Datagram(DatagramReceiver::new(gap_timeout)),
        }
    }

    fn inner_mut(&mut self) -> &mut dyn TrafficSource {
        match self {
            Source::Cbr(s) => s,
            Source::Adaptive(s) => s,
            Source::Aimd(s) => s,
        }
    }

    fn inner(&self) -> &dyn TrafficSource {
        match self {
            Source::Cbr(s) => s,
            Source::Adaptive(s) => s,
            Source::Aimd(s) => s,
        }
    }
}

impl TrafficSource for Source {
    fn on_start(&mut self, now: SimTime, out: &mut Vec<SourceAction>) {
        self.inner_mut().on_start(now, out)
    }

    fn on_timer(&mut self, now: SimTime, token: u64, out: &mut Vec<SourceAction>) {
        self.inner_mut().on_timer(now, token, out)
    }

    fn on_feedback(&mut self, now: SimTime, feedback: &Feedback, out: &mut Vec<SourceAction>) {
        self.inner_mut().on_feedback(now, feedback, out)
    }

    fn stats(&self) -> SourceStats {
        self.inner().stats()
    }
}

/// Per-flow identity carried alongside a source in the engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlowInfo {
    pub flow_id: FlowId,
    pub class: ClassId,
    pub packet_size: u32,
}

/// Serialization time of one packet at `rate_bps`, in fractional µs.
pub(crate) fn packet_interval_us(packet_size: u32, rate_bps: f64) -> f64 {
    f64::from(packet_size) * 8.0 * 1e6 / rate_bps
}
