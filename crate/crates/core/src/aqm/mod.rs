//! Queue disciplines for the bottleneck buffer.
//!
//! Every discipline keeps packets in strict FIFO order and differs only in
//! when it drops: BoDe at egress on sojourn time, CoDel at egress on its
//! control law, PIE at ingress with a controlled probability, and the two
//! plain FIFOs at ingress on overflow.

mod bode;
mod codel;
mod fifo;
mod pie;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

pub use bode::{Bode, BodeParams};
pub use codel::{CoDel, CoDelParams};
pub use fifo::{HeadDrop, TailDrop};
pub use pie::{Pie, PieParams, PieState};

use crate::error::{Error, Result};
use crate::packet::{DropReason, DropRecord, Packet};
use crate::time::SimTime;

/// Generator used for every probabilistic decision in a run.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Default FIFO capacity.
pub const DEFAULT_CAPACITY_BYTES: u64 = 1_500_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Admission {
    Accepted,
    Dropped(DropRecord),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnqueueResult {
    pub admission: Admission,
    /// Packets already in the queue that were evicted to make room.
    pub evicted: Vec<DropRecord>,
}

impl EnqueueResult {
    fn accepted() -> Self {
        EnqueueResult {
            admission: Admission::Accepted,
            evicted: Vec::new(),
        }
    }

    fn rejected(record: DropRecord) -> Self {
        EnqueueResult {
            admission: Admission::Dropped(record),
            evicted: Vec::new(),
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self.admission, Admission::Accepted)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DequeueResult {
    pub served: Option<Packet>,
    pub drops: Vec<DropRecord>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueueCounters {
    /// Packets offered at ingress, accepted or not.
    pub offered: u64,
    pub served: u64,
    pub dropped: u64,
    pub peak_bytes: u64,
    pub peak_packets: usize,
}

/// FIFO packet store shared by every discipline. Tracks byte occupancy and
/// the counters behind the conservation invariant
/// `offered == served + dropped + len`.
#[derive(Clone, Debug, Default)]
pub struct PacketQueue {
    packets: VecDeque<Packet>,
    bytes: u64,
    counters: QueueCounters,
}

impl PacketQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    pub fn front(&self) -> Option<&Packet> {
        self.packets.front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.packets.iter()
    }

    pub fn counters(&self) -> QueueCounters {
        self.counters
    }

    /// Counts an arrival and tags it with its ingress time.
    fn offer(&mut self, packet: &mut Packet, now: SimTime) {
        self.counters.offered += 1;
        packet.enqueued_at = now;
    }

    fn push(&mut self, packet: Packet) {
        self.bytes += u64::from(packet.size_bytes);
        self.packets.push_back(packet);
        self.counters.peak_bytes = self.counters.peak_bytes.max(self.bytes);
        self.counters.peak_packets = self.counters.peak_packets.max(self.packets.len());
    }

    fn reject(&mut self, packet: Packet, now: SimTime, reason: DropReason) -> DropRecord {
        self.counters.dropped += 1;
        DropRecord::new(packet, now, reason)
    }

    fn pop_front(&mut self) -> Option<Packet> {
        let p = self.packets.pop_front()?;
        self.bytes -= u64::from(p.size_bytes);
        Some(p)
    }

    fn serve_front(&mut self) -> Option<Packet> {
        let p = self.pop_front()?;
        self.counters.served += 1;
        Some(p)
    }

    fn drop_front(&mut self, now: SimTime, reason: DropReason) -> Option<DropRecord> {
        let p = self.pop_front()?;
        self.counters.dropped += 1;
        Some(DropRecord::new(p, now, reason))
    }

    /// Checks byte accounting and packet conservation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let sum: u64 = self.packets.iter().map(|p| u64::from(p.size_bytes)).sum();
        if sum != self.bytes {
            return Err(format!("byte occupancy {} != queued bytes {sum}", self.bytes));
        }
        let c = self.counters;
        if c.offered != c.served + c.dropped + self.packets.len() as u64 {
            return Err(format!(
                "conservation: offered {} != served {} + dropped {} + queued {}",
                c.offered,
                c.served,
                c.dropped,
                self.packets.len()
            ));
        }
        if self
            .packets
            .iter()
            .zip(self.packets.iter().skip(1))
            .any(|(a, b)| b.enqueued_at < a.enqueued_at)
        {
            return Err("queue is not in arrival order".into());
        }
        Ok(())
    }
}

/// The contract every bottleneck discipline implements.
pub trait QueueDiscipline {
    fn enqueue(&mut self, packet: Packet, now: SimTime, rng: &mut SimRng) -> EnqueueResult;

    /// Called at a delivery opportunity. Serves at most one packet.
    fn dequeue(&mut self, now: SimTime) -> DequeueResult;

    fn queue(&self) -> &PacketQueue;

    fn len(&self) -> usize {
        self.queue().len()
    }

    fn is_empty(&self) -> bool {
        self.queue().is_empty()
    }

    fn byte_occupancy(&self) -> u64 {
        self.queue().bytes()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DisciplineKind {
    Bode,
    CoDel,
    Pie,
    TailDrop,
    HeadDrop,
}

impl DisciplineKind {
    pub const ALL: [DisciplineKind; 5] = [
        DisciplineKind::Bode,
        DisciplineKind::CoDel,
        DisciplineKind::Pie,
        DisciplineKind::TailDrop,
        DisciplineKind::HeadDrop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DisciplineKind::Bode => "bode",
            DisciplineKind::CoDel => "codel",
            DisciplineKind::Pie => "pie",
            DisciplineKind::TailDrop => "taildrop",
            DisciplineKind::HeadDrop => "headdrop",
        }
    }
}

impl fmt::Display for DisciplineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DisciplineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', '_'], "");
        DisciplineKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown discipline `{s}` (expected bode, codel, pie, taildrop or headdrop)"
                ))
            })
    }
}

/// BoDe's optional hard buffer limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BufferCap {
    Unbounded,
    Bytes(u64),
    /// `num/den` times the buffer requirement computed from the trace's
    /// peak rate over windows one bounded delay long, the packet size and
    /// the bounded delay.
    Auto { num: u64, den: u64 },
}

impl BufferCap {
    pub const AUTO: BufferCap = BufferCap::Auto { num: 1, den: 1 };
}

impl fmt::Display for BufferCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BufferCap::Unbounded => f.write_str("none"),
            BufferCap::Bytes(b) => write!(f, "{b}"),
            BufferCap::Auto { num: 1, den: 1 } => f.write_str("auto"),
            BufferCap::Auto { num, den: 1 } => write!(f, "auto*{num}"),
            BufferCap::Auto { num: 1, den } => write!(f, "auto/{den}"),
            BufferCap::Auto { num, den } => write!(f, "auto*{num}/{den}"),
        }
    }
}

impl FromStr for BufferCap {
    type Err = Error;
    /// Accepts `none`, a byte count, `auto`, `auto*N`, `auto/N` and
    /// `auto*N/M`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("bad buffer cap `{s}`"));
        let s = s.trim();
        if s == "none" {
            return Ok(BufferCap::Unbounded);
        }
        if let Ok(b) = s.parse::<u64>() {
            return Ok(BufferCap::Bytes(b));
        }
        let rest = s.strip_prefix("auto").ok_or_else(bad)?;
        let (mut num, mut den) = (1u64, 1u64);
        let mut rest = rest;
        if let Some(r) = rest.strip_prefix('*') {
            let end = r.find('/').unwrap_or(r.len());
            num = r[..end].trim().parse().map_err(|_| bad())?;
            rest = &r[end..];
        }
        if let Some(r) = rest.strip_prefix('/') {
            den = r.trim().parse().map_err(|_| bad())?;
            rest = "";
        }
        if !rest.is_empty() || num == 0 || den == 0 {
            return Err(bad());
        }
        Ok(BufferCap::Auto { num, den })
    }
}

/// Buffer needed to hold everything that may wait up to `bounded_delay`
/// at `max_rate_bps`: `ceil(rate / (8 * packet_size) * delay)` packets.
pub fn compute_buffer_requirement(
    max_rate_bps: f64,
    packet_size_bytes: u32,
    bounded_delay: SimTime,
) -> Result<u64> {
    if !(max_rate_bps.is_finite() && max_rate_bps > 0.0) {
        return Err(Error::Validation(format!(
            "max rate must be positive, got {max_rate_bps} bps"
        )));
    }
    if packet_size_bytes == 0 {
        return Err(Error::Validation("packet size must be positive".into()));
    }
    if bounded_delay == SimTime::ZERO {
        return Err(Error::Validation("bounded delay must be positive".into()));
    }
    // rate [b/s] * delay [µs] / (bits per packet * 1e6 µs/s); both operands
    // stay exact integers in f64 for realistic inputs.
    let numerator = max_rate_bps * bounded_delay.as_micros() as f64;
    let denominator = f64::from(packet_size_bytes) * 8.0 * 1e6;
    Ok((numerator / denominator).ceil() as u64)
}

/// Resolved, buildable discipline parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum DisciplineSpec {
    Bode {
        bounded_delay: SimTime,
        protect_threshold: usize,
        cap: BufferCap,
    },
    CoDel {
        target: SimTime,
        interval: SimTime,
        capacity_bytes: u64,
    },
    Pie {
        ref_delay: SimTime,
        alpha: f64,
        beta: f64,
        update_interval: SimTime,
        capacity_bytes: u64,
    },
    TailDrop {
        capacity_bytes: u64,
    },
    HeadDrop {
        capacity_bytes: u64,
    },
}

impl DisciplineSpec {
    /// Standard parameters for `kind`, derived from the delay target `d`
    /// and the path's minimum RTT: BoDe bounds sojourn at `d`, CoDel
    /// targets `d/2` over `5 * min_rtt`, PIE references `d` with gains
    /// 0.125/1.25, and the FIFOs hold 1.5 MB.
    pub fn defaults(kind: DisciplineKind, d: SimTime, min_rtt: SimTime) -> Self {
        match kind {
            DisciplineKind::Bode => DisciplineSpec::Bode {
                bounded_delay: d,
                protect_threshold: BodeParams::DEFAULT_PROTECT_THRESHOLD,
                cap: BufferCap::Unbounded,
            },
            DisciplineKind::CoDel => DisciplineSpec::CoDel {
                target: d / 2,
                interval: min_rtt * 5,
                capacity_bytes: DEFAULT_CAPACITY_BYTES,
            },
            DisciplineKind::Pie => DisciplineSpec::Pie {
                ref_delay: d,
                alpha: PieParams::DEFAULT_ALPHA,
                beta: PieParams::DEFAULT_BETA,
                update_interval: PieParams::DEFAULT_UPDATE_INTERVAL,
                capacity_bytes: DEFAULT_CAPACITY_BYTES,
            },
            DisciplineKind::TailDrop => DisciplineSpec::TailDrop {
                capacity_bytes: DEFAULT_CAPACITY_BYTES,
            },
            DisciplineKind::HeadDrop => DisciplineSpec::HeadDrop {
                capacity_bytes: DEFAULT_CAPACITY_BYTES,
            },
        }
    }

    pub fn kind(&self) -> DisciplineKind {
        match self {
            DisciplineSpec::Bode { .. } => DisciplineKind::Bode,
            DisciplineSpec::CoDel { .. } => DisciplineKind::CoDel,
            DisciplineSpec::Pie { .. } => DisciplineKind::Pie,
            DisciplineSpec::TailDrop { .. } => DisciplineKind::TailDrop,
            DisciplineSpec::HeadDrop { .. } => DisciplineKind::HeadDrop,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("{}: {m}", self.kind())));
        let cap_ok = |c: u64| c >= u64::from(crate::packet::MAX_PACKET_BYTES);
        match *self {
            DisciplineSpec::Bode {
                bounded_delay,
                protect_threshold,
                cap,
            } => {
                if bounded_delay == SimTime::ZERO {
                    return bad("bounded delay must be positive");
                }
                if protect_threshold == 0 {
                    return bad("protect threshold must be at least 1");
                }
                if let BufferCap::Bytes(0) = cap {
                    return bad("byte cap must be positive");
                }
            }
            DisciplineSpec::CoDel {
                target,
                interval,
                capacity_bytes,
            } => {
                if target == SimTime::ZERO {
                    return bad("target must be positive");
                }
                if interval == SimTime::ZERO {
                    return bad("interval must be positive (is the minimum RTT zero?)");
                }
                if !cap_ok(capacity_bytes) {
                    return bad("capacity must be at least 1500 bytes");
                }
            }
            DisciplineSpec::Pie {
                ref_delay,
                alpha,
                beta,
                update_interval,
                capacity_bytes,
            } => {
                if ref_delay == SimTime::ZERO {
                    return bad("reference delay must be positive");
                }
                if !(alpha.is_finite() && alpha >= 0.0 && beta.is_finite() && beta >= 0.0) {
                    return bad("alpha and beta must be finite and non-negative");
                }
                if update_interval == SimTime::ZERO {
                    return bad("update interval must be positive");
                }
                if !cap_ok(capacity_bytes) {
                    return bad("capacity must be at least 1500 bytes");
                }
            }
            DisciplineSpec::TailDrop { capacity_bytes }
            | DisciplineSpec::HeadDrop { capacity_bytes } => {
                if !cap_ok(capacity_bytes) {
                    return bad("capacity must be at least 1500 bytes");
                }
            }
        }
        Ok(())
    }

    /// Instantiates the discipline. `auto_cap_bytes` resolves
    /// [`BufferCap::Auto`] and is only consulted for BoDe.
    pub fn build(&self, auto_cap_bytes: impl FnOnce() -> Result<u64>) -> Result<Discipline> {
        self.validate()?;
        Ok(match *self {
            DisciplineSpec::Bode {
                bounded_delay,
                protect_threshold,
                cap,
            } => {
                let cap_bytes = match cap {
                    BufferCap::Unbounded => None,
                    BufferCap::Bytes(b) => Some(b),
                    BufferCap::Auto { num, den } => Some(auto_cap_bytes()? * num / den),
                };
                Discipline::Bode(Bode::new(BodeParams {
                    bounded_delay,
                    protect_threshold,
                    cap_bytes,
                }))
            }
            DisciplineSpec::CoDel {
                target,
                interval,
                capacity_bytes,
            } => Discipline::CoDel(CoDel::new(CoDelParams {
                target,
                interval,
                capacity_bytes,
            })),
            DisciplineSpec::Pie {
                ref_delay,
                alpha,
                beta,
                update_interval,
                capacity_bytes,
            } => Discipline::Pie(Pie::new(PieParams {
                ref_delay,
                alpha,
                beta,
                update_interval,
                capacity_bytes,
            })),
            DisciplineSpec::TailDrop { capacity_bytes } => {
                Discipline::TailDrop(TailDrop::new(capacity_bytes))
            }
            DisciplineSpec::HeadDrop { capacity_bytes } => {
                Discipline::HeadDrop(HeadDrop::new(capacity_bytes))
            }
        })
    }
}

/// A concrete discipline instance.
#[derive(Clone, Debug)]
pub enum Discipline {
    Bode(Bode),
    CoDel(CoDel),
    Pie(Pie),
    TailDrop(TailDrop),
    HeadDrop(HeadDrop),
}

impl Discipline {
    pub fn kind(&self) -> DisciplineKind {
        match self {
            Discipline::Bode(_) => DisciplineKind::Bode,
            Discipline::CoDel(_) => DisciplineKind::CoDel,
            Discipline::Pie(_) => DisciplineKind::Pie,
            Discipline::TailDrop(_) => DisciplineKind::TailDrop,
            Discipline::HeadDrop(_) => DisciplineKind::HeadDrop,
        }
    }

    fn inner(&self) -> &dyn QueueDiscipline {
        match self {
            Discipline::Bode(d) => d,
            Discipline::CoDel(d) => d,
            Discipline::Pie(d) => d,
            Discipline::TailDrop(d) => d,
            Discipline::HeadDrop(d) => d,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn QueueDiscipline {
        match self {
            Discipline::Bode(d) => d,
            Discipline::CoDel(d) => d,
            Discipline::Pie(d) => d,
            Discipline::TailDrop(d) => d,
            Discipline::HeadDrop(d) => d,
        }
    }
}

impl QueueDiscipline for Discipline {
    fn enqueue(&mut self, packet: Packet, now: SimTime, rng: &mut SimRng) -> EnqueueResult {
        self.inner_mut().enqueue(packet, now, rng)
    }

    fn dequeue(&mut self, now: SimTime) -> DequeueResult {
        self.inner_mut().dequeue(now)
    }

    fn queue(&self) -> &PacketQueue {
        self.inner().queue()
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::SeedableRng;

    pub fn rng() -> SimRng {
        SimRng::seed_from_u64(1)
    }

    pub fn pkt(id: u64, size: u32) -> Packet {
        Packet::new(id, 0, size, SimTime::ZERO)
    }

    pub fn ms(v: u64) -> SimTime {
        SimTime::from_millis(v)
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn buffer_requirement_examples() {
        assert_eq!(compute_buffer_requirement(96e6, 1500, ms(10)).unwrap(), 80);
        assert_eq!(
            compute_buffer_requirement(12e6, 1500, SimTime::from_secs(1)).unwrap(),
            1000
        );
        assert!(compute_buffer_requirement(96e6, 1500, SimTime::ZERO).is_err());
        assert!(compute_buffer_requirement(0.0, 1500, ms(10)).is_err());
        assert!(compute_buffer_requirement(-1.0, 1500, ms(10)).is_err());
        assert!(compute_buffer_requirement(96e6, 0, ms(10)).is_err());
        // Non-integral requirement rounds up.
        assert_eq!(compute_buffer_requirement(20e6, 1500, ms(20)).unwrap(), 34);
    }

    #[test]
    fn buffer_cap_parsing() {
        assert_eq!("auto".parse::<BufferCap>().unwrap(), BufferCap::AUTO);
        assert_eq!(
            "auto*10".parse::<BufferCap>().unwrap(),
            BufferCap::Auto { num: 10, den: 1 }
        );
        assert_eq!(
            "auto/10".parse::<BufferCap>().unwrap(),
            BufferCap::Auto { num: 1, den: 10 }
        );
        assert_eq!(
            "auto*3/2".parse::<BufferCap>().unwrap(),
            BufferCap::Auto { num: 3, den: 2 }
        );
        assert_eq!("120000".parse::<BufferCap>().unwrap(), BufferCap::Bytes(120_000));
        assert_eq!("none".parse::<BufferCap>().unwrap(), BufferCap::Unbounded);
        for bad in ["auto*", "auto/0", "autox", "12kb", "auto*0"] {
            assert!(bad.parse::<BufferCap>().is_err(), "{bad}");
        }
        for cap in [
            BufferCap::Unbounded,
            BufferCap::Bytes(9000),
            BufferCap::AUTO,
            BufferCap::Auto { num: 10, den: 1 },
            BufferCap::Auto { num: 1, den: 10 },
            BufferCap::Auto { num: 3, den: 2 },
        ] {
            assert_eq!(cap.to_string().parse::<BufferCap>().unwrap(), cap);
        }
    }

    #[test]
    fn discipline_kind_names() {
        for k in DisciplineKind::ALL {
            assert_eq!(k.as_str().parse::<DisciplineKind>().unwrap(), k);
        }
        assert_eq!("Tail-Drop".parse::<DisciplineKind>().unwrap(), DisciplineKind::TailDrop);
        assert!("red".parse::<DisciplineKind>().is_err());
    }

    #[test]
    fn defaults_follow_delay_target() {
        let d = ms(20);
        let rtt = ms(10);
        match DisciplineSpec::defaults(DisciplineKind::CoDel, d, rtt) {
            DisciplineSpec::CoDel {
                target, interval, ..
            } => {
                assert_eq!(target, ms(10));
                assert_eq!(interval, ms(50));
            }
            other => panic!("{other:?}"),
        }
        match DisciplineSpec::defaults(DisciplineKind::Pie, d, rtt) {
            DisciplineSpec::Pie {
                ref_delay,
                alpha,
                beta,
                ..
            } => {
                assert_eq!(ref_delay, d);
                assert_eq!(alpha, 0.125);
                assert_eq!(beta, 1.25);
            }
            other => panic!("{other:?}"),
        }
        assert!(DisciplineSpec::defaults(DisciplineKind::CoDel, d, SimTime::ZERO)
            .validate()
            .is_err());
    }

    #[test]
    fn one_packet_per_opportunity_for_every_kind() {
        for kind in DisciplineKind::ALL {
            let mut q = DisciplineSpec::defaults(kind, ms(20), ms(10))
                .build(|| Ok(120_000))
                .unwrap();
            let mut rng = rng();
            for i in 0..5 {
                q.enqueue(pkt(i, 1500), ms(i), &mut rng);
            }
            let before = q.len();
            let r = q.dequeue(ms(5));
            assert!(r.served.is_some(), "{kind}");
            assert_eq!(q.len() + 1 + r.drops.len(), before, "{kind}");
            q.queue().check_invariants().unwrap();
        }
    }
}
