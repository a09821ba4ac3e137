//! Discrete-event simulation of one bottleneck path.
//!
//! A packet leaves its source, travels `min_rtt / 2` to the bottleneck,
//! waits in the (possibly multi-class) queue until a delivery opportunity
//! serves it, reaches the receiver at once, and the receiver's feedback
//! travels the remaining `min_rtt - min_rtt / 2` back to the source.
//!
//! Events at equal timestamps are ordered: feedback, then source and
//! receiver timers, then arrivals (by flow id), then delivery
//! opportunities, then insertion order.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::Write;
use std::path::PathBuf;

use rand::SeedableRng;

use crate::aqm::{
    compute_buffer_requirement, Admission, DequeueResult, DisciplineKind, DisciplineSpec,
    EnqueueResult, QueueCounters, QueueDiscipline, SimRng,
};
use crate::diffserv::{ClassConfig, PriorityScheduler};
use crate::error::{Error, Result};
use crate::metrics::{summarize, Summary};
use crate::packet::{ClassId, DropReason, DropRecord, FlowId, Packet, PacketId, MAX_PACKET_BYTES};
use crate::source::{
    Feedback, FlowInfo, Receiver, Source, SourceAction, SourceConfig, SourceKind, SourceStats,
    TrafficSource,
};
use crate::time::SimTime;
use crate::trace::{generate_trace, load_trace, CursorState, SyntheticTraceSpec, Trace};

#[derive(Clone, Debug, PartialEq)]
pub enum TraceSource {
    File(PathBuf),
    Synthetic(SyntheticTraceSpec),
}

impl TraceSource {
    pub fn materialize(&self) -> Result<Trace> {
        match self {
            TraceSource::File(p) => load_trace(p),
            TraceSource::Synthetic(spec) => generate_trace(spec),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OutputOptions {
    /// Write the per-packet event log.
    pub events: bool,
    /// Write the queuing-delay CDF.
    pub cdf: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub trace: TraceSource,
    pub duration: SimTime,
    pub min_rtt: SimTime,
    pub seed: u64,
    /// Delay target D from which discipline defaults were derived.
    pub delay_target: SimTime,
    pub classes: Vec<ClassConfig>,
    pub sources: Vec<SourceConfig>,
    pub outputs: OutputOptions,
    /// Disciplines swept by `compare` when none are given explicitly.
    pub compare: Vec<DisciplineKind>,
}

impl Scenario {
    /// One class running `kind` with its standard parameters.
    pub fn single(
        name: impl Into<String>,
        trace: TraceSource,
        kind: DisciplineKind,
        delay_target: SimTime,
        sources: Vec<SourceConfig>,
    ) -> Self {
        let min_rtt = SimTime::from_millis(10);
        Scenario {
            name: name.into(),
            trace,
            duration: SimTime::from_secs(300),
            min_rtt,
            seed: 0,
            delay_target,
            classes: vec![ClassConfig::new(DisciplineSpec::defaults(
                kind,
                delay_target,
                min_rtt,
            ))],
            sources,
            outputs: OutputOptions::default(),
            compare: Vec::new(),
        }
    }

    /// Replaces every class's discipline with `kind` at standard
    /// parameters, keeping delay requirements. A class with a requirement
    /// uses it in place of the scenario's delay target.
    pub fn with_discipline(&self, kind: DisciplineKind) -> Self {
        let mut s = self.clone();
        for c in &mut s.classes {
            let d = c.delay_requirement.unwrap_or(s.delay_target);
            c.discipline = DisciplineSpec::defaults(kind, d, s.min_rtt);
        }
        s
    }

    /// Short label for the bottleneck configuration, e.g. `bode` or
    /// `diffserv[bode,bode,taildrop]`.
    pub fn discipline_label(&self) -> String {
        let names: Vec<&str> = self
            .classes
            .iter()
            .map(|c| c.discipline.kind().as_str())
            .collect();
        if names.len() == 1 {
            names[0].to_string()
        } else {
            format!("diffserv[{}]", names.join(","))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.duration == SimTime::ZERO {
            return bad("duration must be positive".into());
        }
        if self.delay_target == SimTime::ZERO {
            return bad("delay target must be positive".into());
        }
        if self.classes.is_empty() {
            return bad("at least one class is required".into());
        }
        for (k, c) in self.classes.iter().enumerate() {
            c.discipline
                .validate()
                .map_err(|e| Error::Validation(format!("class {k}: {e}")))?;
        }
        if self.sources.is_empty() {
            return bad("at least one source is required".into());
        }
        for (i, s) in self.sources.iter().enumerate() {
            if s.class >= self.classes.len() {
                return bad(format!(
                    "source {i}: class {} not configured ({} classes)",
                    s.class,
                    self.classes.len()
                ));
            }
            if s.packet_size == 0 || s.packet_size > MAX_PACKET_BYTES {
                return bad(format!(
                    "source {i}: packet size must lie in 1..={MAX_PACKET_BYTES}"
                ));
            }
            if s.stop.is_some_and(|stop| stop <= s.start) {
                return bad(format!("source {i}: stop must come after start"));
            }
            match &s.kind {
                SourceKind::Cbr { rate_mbps } => {
                    if !(rate_mbps.is_finite() && *rate_mbps > 0.0) {
                        return bad(format!("source {i}: CBR rate must be positive"));
                    }
                }
                SourceKind::Adaptive(p) => {
                    p.validate().map_err(|e| Error::Validation(format!("source {i}: {e}")))?
                }
                SourceKind::Aimd(p) => {
                    if p.initial_cwnd < 1.0 || !p.initial_cwnd.is_finite() {
                        return bad(format!("source {i}: initial window must be at least 1"));
                    }
                }
            }
        }
        if let TraceSource::Synthetic(spec) = &self.trace {
            spec.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Served(SimTime),
    Dropped(SimTime, DropReason),
}

impl Outcome {
    pub fn at(self) -> SimTime {
        match self {
            Outcome::Served(t) | Outcome::Dropped(t, _) => t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacketRecord {
    pub id: PacketId,
    pub flow: FlowId,
    pub class: ClassId,
    pub seq: u64,
    pub retransmission: bool,
    pub size_bytes: u32,
    pub created_at: SimTime,
    pub enqueued_at: Option<SimTime>,
    pub outcome: Option<Outcome>,
    /// When the feedback triggered by this packet reached its source.
    pub acked_at: Option<SimTime>,
}

impl PacketRecord {
    pub fn queuing_delay(&self) -> Option<SimTime> {
        match (self.enqueued_at, self.outcome) {
            (Some(e), Some(Outcome::Served(s))) => Some(s - e),
            _ => None,
        }
    }
}

/// Per-packet history, indexed by packet id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    records: Vec<PacketRecord>,
}

pub const EVENTS_CSV_HEADER: &str =
    "id,flow,class,seq,retransmission,size_bytes,created_us,enqueued_us,outcome,outcome_us,reason,acked_us";

impl EventLog {
    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    pub fn get(&self, id: PacketId) -> Option<&PacketRecord> {
        self.records.get(id as usize)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn push(&mut self, rec: PacketRecord) {
        debug_assert_eq!(rec.id as usize, self.records.len());
        self.records.push(rec);
    }

    fn record_mut(&mut self, id: PacketId) -> &mut PacketRecord {
        &mut self.records[id as usize]
    }

    fn settle(&mut self, id: PacketId, outcome: Outcome) -> std::result::Result<(), String> {
        let r = self.record_mut(id);
        if let Some(prev) = r.outcome {
            return Err(format!("packet {id} already settled as {prev:?}"));
        }
        r.outcome = Some(outcome);
        Ok(())
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        fn opt(t: Option<SimTime>) -> String {
            t.map(|t| t.as_micros().to_string()).unwrap_or_default()
        }
        writeln!(w, "{EVENTS_CSV_HEADER}")?;
        for r in &self.records {
            let (outcome, at, reason) = match r.outcome {
                None => ("pending", None, ""),
                Some(Outcome::Served(t)) => ("served", Some(t), ""),
                Some(Outcome::Dropped(t, why)) => ("dropped", Some(t), why.as_str()),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.id,
                r.flow,
                r.class,
                r.seq,
                u8::from(r.retransmission),
                r.size_bytes,
                r.created_at.as_micros(),
                opt(r.enqueued_at),
                outcome,
                opt(at),
                reason,
                opt(r.acked_at),
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Rank {
    Feedback = 0,
    Timer = 1,
    Arrival = 2,
    Opportunity = 3,
}

#[derive(Clone, Debug)]
enum EventKind {
    SourceStart,
    SourceTimer(u64),
    ReceiverTimer(u64),
    Feedback(Feedback),
    Arrival(Packet),
    Opportunity,
}

#[derive(Debug)]
struct Event {
    at: SimTime,
    rank: Rank,
    flow: FlowId,
    seq: u64,
    kind: EventKind,
}

impl Event {
    fn key(&self) -> (SimTime, Rank, FlowId, u64) {
        (self.at, self.rank, self.flow, self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// What one [`Engine::step`] did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepEvent {
    SourceWake { flow: FlowId, sent: usize },
    ReceiverTimer { flow: FlowId, lost: bool },
    Feedback { flow: FlowId },
    Arrival { packet: PacketId, class: ClassId, accepted: bool, evicted: usize },
    Opportunity { class: Option<ClassId>, served: Option<PacketId>, dropped: usize },
}

struct Flow {
    info: FlowInfo,
    kind: &'static str,
    start: SimTime,
    source: Source,
    receiver: Receiver,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowReport {
    pub info: FlowInfo,
    pub kind: &'static str,
    pub stats: SourceStats,
}

#[derive(Clone, Debug)]
pub struct SimReport {
    pub scenario: String,
    pub discipline: String,
    pub duration: SimTime,
    pub log: EventLog,
    pub summary: Summary,
    pub flows: Vec<FlowReport>,
    pub queues: Vec<QueueCounters>,
    /// Resolved BoDe byte caps per class (`None` when unbounded or not BoDe).
    pub caps: Vec<Option<u64>>,
}

pub struct Engine {
    scenario: Scenario,
    trace: Trace,
    cursor: CursorState,
    now: SimTime,
    events: BinaryHeap<Reverse<Event>>,
    next_event_seq: u64,
    scheduler: PriorityScheduler,
    flows: Vec<Flow>,
    rng: SimRng,
    log: EventLog,
    in_flight: u64,
    forward: SimTime,
    backward: SimTime,
    actions: Vec<SourceAction>,
    caps: Vec<Option<u64>>,
    finished: bool,
}

impl Engine {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let trace = scenario.trace.materialize()?;
        let d = scenario.delay_target;

        let mut classes = Vec::with_capacity(scenario.classes.len());
        let mut caps = Vec::with_capacity(scenario.classes.len());
        for (k, c) in scenario.classes.iter().enumerate() {
            let size = scenario
                .sources
                .iter()
                .filter(|s| s.class == k)
                .map(|s| s.packet_size)
                .max()
                .unwrap_or(MAX_PACKET_BYTES);
            let bounded = match c.discipline {
                DisciplineSpec::Bode { bounded_delay, .. } => bounded_delay,
                _ => d,
            };
            let q = c.discipline.build(|| {
                // A packet stays at most the bounded delay, so the rate that
                // matters is the peak over windows of that length.
                let window_ms = bounded.as_micros().div_ceil(1000);
                let rate = trace.peak_rate_bps(window_ms, MAX_PACKET_BYTES);
                Ok(compute_buffer_requirement(rate, size, bounded)? * u64::from(size))
            })?;
            caps.push(match &q {
                crate::aqm::Discipline::Bode(b) => b.params().cap_bytes,
                _ => None,
            });
            classes.push(q);
        }
        let scheduler = PriorityScheduler::new(classes)?;

        let gap_timeout = scenario.min_rtt * 2;
        let flows = scenario
            .sources
            .iter()
            .enumerate()
            .map(|(i, cfg)| {
                let source = Source::from_config(cfg, scenario.min_rtt, d);
                let receiver = source.receiver(gap_timeout);
                Flow {
                    info: FlowInfo {
                        flow_id: i as FlowId,
                        class: cfg.class,
                        packet_size: cfg.packet_size,
                    },
                    kind: cfg.kind.name(),
                    start: cfg.start,
                    source,
                    receiver,
                }
            })
            .collect::<Vec<_>>();

        let forward = scenario.min_rtt / 2;
        let backward = scenario.min_rtt - forward;
        let mut engine = Engine {
            rng: SimRng::seed_from_u64(scenario.seed),
            trace,
            cursor: CursorState::default(),
            now: SimTime::ZERO,
            events: BinaryHeap::new(),
            next_event_seq: 0,
            scheduler,
            flows,
            log: EventLog::default(),
            in_flight: 0,
            forward,
            backward,
            actions: Vec::new(),
            caps,
            finished: false,
            scenario,
        };
        for i in 0..engine.flows.len() {
            let start = engine.flows[i].start;
            engine.schedule(start, Rank::Timer, i as FlowId, EventKind::SourceStart);
        }
        engine.schedule_opportunity();
        Ok(engine)
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn scheduler(&self) -> &PriorityScheduler {
        &self.scheduler
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    /// Packets generated but not yet at the bottleneck.
    pub fn in_flight(&self) -> u64 {
        self.in_flight
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    fn schedule(&mut self, at: SimTime, rank: Rank, flow: FlowId, kind: EventKind) {
        let seq = self.next_event_seq;
        self.next_event_seq += 1;
        self.events.push(Reverse(Event {
            at,
            rank,
            flow,
            seq,
            kind,
        }));
    }

    fn schedule_opportunity(&mut self) {
        let t = self.cursor.next_time(&self.trace);
        if t <= self.scenario.duration {
            self.schedule(t, Rank::Opportunity, 0, EventKind::Opportunity);
        }
    }

    /// Processes the next event, or returns `None` once the next event lies
    /// beyond the scenario duration.
    pub fn step(&mut self) -> Result<Option<(SimTime, StepEvent)>> {
        if self.finished {
            return Ok(None);
        }
        let due = matches!(self.events.peek(), Some(Reverse(e)) if e.at <= self.scenario.duration);
        if !due {
            self.finished = true;
            return Ok(None);
        }
        let Reverse(ev) = self.events.pop().expect("peeked");
        if ev.at < self.now {
            return Err(self.invariant(format!("event at {} scheduled in the past", ev.at)));
        }
        self.now = ev.at;
        let now = self.now;
        let flow = ev.flow;
        let outcome = match ev.kind {
            EventKind::SourceStart => {
                let mut out = std::mem::take(&mut self.actions);
                self.flows[flow as usize].source.on_start(now, &mut out);
                let sent = self.apply_actions(flow, &mut out);
                self.actions = out;
                StepEvent::SourceWake { flow, sent }
            }
            EventKind::SourceTimer(token) => {
                let mut out = std::mem::take(&mut self.actions);
                self.flows[flow as usize].source.on_timer(now, token, &mut out);
                let sent = self.apply_actions(flow, &mut out);
                self.actions = out;
                StepEvent::SourceWake { flow, sent }
            }
            EventKind::ReceiverTimer(token) => {
                let fb = self.flows[flow as usize].receiver.on_timer(token);
                let lost = fb.is_some();
                if let Some(fb) = fb {
                    self.schedule(now + self.backward, Rank::Feedback, flow, EventKind::Feedback(fb));
                }
                StepEvent::ReceiverTimer { flow, lost }
            }
            EventKind::Feedback(fb) => {
                if let Some(id) = fb.packet_id() {
                    let r = self.log.record_mut(id);
                    r.acked_at.get_or_insert(now);
                }
                let mut out = std::mem::take(&mut self.actions);
                self.flows[flow as usize].source.on_feedback(now, &fb, &mut out);
                self.apply_actions(flow, &mut out);
                self.actions = out;
                StepEvent::Feedback { flow }
            }
            EventKind::Arrival(packet) => self.on_arrival(packet)?,
            EventKind::Opportunity => self.on_opportunity()?,
        };
        Ok(Some((now, outcome)))
    }

    fn apply_actions(&mut self, flow: FlowId, out: &mut Vec<SourceAction>) -> usize {
        let mut sent = 0;
        for action in out.drain(..) {
            match action {
                SourceAction::Send {
                    seq,
                    retransmission,
                } => {
                    let info = self.flows[flow as usize].info;
                    let id = self.log.len() as PacketId;
                    let mut p = Packet::new(id, flow, info.packet_size, self.now);
                    p.class_id = info.class;
                    p.seq_no = seq;
                    p.is_retransmission = retransmission;
                    self.log.push(PacketRecord {
                        id,
                        flow,
                        class: info.class,
                        seq,
                        retransmission,
                        size_bytes: info.packet_size,
                        created_at: self.now,
                        enqueued_at: None,
                        outcome: None,
                        acked_at: None,
                    });
                    self.in_flight += 1;
                    sent += 1;
                    let at = self.now + self.forward;
                    self.events.push(Reverse(Event {
                        at,
                        rank: Rank::Arrival,
                        flow,
                        seq: self.next_event_seq,
                        kind: EventKind::Arrival(p),
                    }));
                    self.next_event_seq += 1;
                }
                SourceAction::Timer { at, token } => {
                    let at = at.max(self.now);
                    self.events.push(Reverse(Event {
                        at,
                        rank: Rank::Timer,
                        flow,
                        seq: self.next_event_seq,
                        kind: EventKind::SourceTimer(token),
                    }));
                    self.next_event_seq += 1;
                }
            }
        }
        sent
    }

    fn on_arrival(&mut self, packet: Packet) -> Result<StepEvent> {
        let id = packet.id;
        self.in_flight -= 1;
        self.log.record_mut(id).enqueued_at = Some(self.now);
        let class = packet.class_id;
        let EnqueueResult { admission, evicted } =
            self.scheduler.enqueue(packet, self.now, &mut self.rng)?;
        let accepted = match admission {
            Admission::Accepted => true,
            Admission::Dropped(rec) => {
                self.record_drop(&rec)?;
                false
            }
        };
        for rec in &evicted {
            self.record_drop(rec)?;
        }
        Ok(StepEvent::Arrival {
            packet: id,
            class,
            accepted,
            evicted: evicted.len(),
        })
    }

    fn on_opportunity(&mut self) -> Result<StepEvent> {
        let now = self.now;
        let (class, DequeueResult { served, drops }) = self.scheduler.priority_dequeue(now);
        for rec in &drops {
            self.record_drop(rec)?;
        }
        let served_id = served.as_ref().map(|p| p.id);
        if let Some(p) = served {
            self.log
                .settle(p.id, Outcome::Served(now))
                .map_err(|m| self.invariant(m))?;
            let flow = p.flow_id;
            let rx = self.flows[flow as usize].receiver.on_packet(&p, now);
            self.schedule(
                now + self.backward,
                Rank::Feedback,
                flow,
                EventKind::Feedback(rx.feedback),
            );
            if let Some((at, token)) = rx.timer {
                self.schedule(at, Rank::Timer, flow, EventKind::ReceiverTimer(token));
            }
        }
        self.schedule_opportunity();
        Ok(StepEvent::Opportunity {
            class,
            served: served_id,
            dropped: drops.len(),
        })
    }

    fn record_drop(&mut self, rec: &DropRecord) -> Result<()> {
        self.log
            .settle(rec.packet.id, Outcome::Dropped(rec.dropped_at, rec.reason))
            .map_err(|m| self.invariant(m))
    }

    fn invariant(&self, message: String) -> Error {
        Error::Invariant {
            at: self.now,
            message,
        }
    }

    /// Checks packet conservation and per-queue bookkeeping.
    pub fn check_invariants(&self) -> Result<()> {
        let mut settled = 0u64;
        for r in self.log.records() {
            if let Some(o) = r.outcome {
                settled += 1;
                let e = r.enqueued_at.ok_or_else(|| {
                    self.invariant(format!("packet {} settled without arriving", r.id))
                })?;
                if !(r.created_at <= e && e <= o.at()) {
                    return Err(self.invariant(format!("packet {} timestamps out of order", r.id)));
                }
            }
        }
        let queued = self.scheduler.len() as u64;
        let generated = self.log.len() as u64;
        if generated != self.in_flight + queued + settled {
            return Err(self.invariant(format!(
                "conservation: generated {generated} != in flight {} + queued {queued} + settled {settled}",
                self.in_flight
            )));
        }
        for (k, q) in self.scheduler.classes().iter().enumerate() {
            q.queue()
                .check_invariants()
                .map_err(|m| self.invariant(format!("class {k}: {m}")))?;
        }
        Ok(())
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while self.step()?.is_some() {}
        Ok(())
    }

    pub fn into_report(self) -> Result<SimReport> {
        self.check_invariants()?;
        let delay_reqs: Vec<Option<SimTime>> = self
            .scenario
            .classes
            .iter()
            .map(|c| c.delay_requirement)
            .collect();
        let summary = summarize(&self.log, self.scenario.duration, &delay_reqs)?;
        Ok(SimReport {
            discipline: self.scenario.discipline_label(),
            scenario: self.scenario.name.clone(),
            duration: self.scenario.duration,
            flows: self
                .flows
                .iter()
                .map(|f| FlowReport {
                    info: f.info,
                    kind: f.kind,
                    stats: f.source.stats(),
                })
                .collect(),
            queues: self
                .scheduler
                .classes()
                .iter()
                .map(|q| q.queue().counters())
                .collect(),
            caps: self.caps,
            summary,
            log: self.log,
        })
    }
}

/// Runs `scenario` to completion.
pub fn run(scenario: &Scenario) -> Result<SimReport> {
    let mut engine = Engine::new(scenario.clone())?;
    engine.run_to_end()?;
    engine.into_report()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::SyntheticKind;

    fn constant(rate_mbps: f64, secs: u64) -> TraceSource {
        TraceSource::Synthetic(SyntheticTraceSpec::new(
            SyntheticKind::Constant { rate_mbps },
            secs,
        ))
    }

    fn cbr(rate_mbps: f64) -> SourceConfig {
        SourceConfig::new(SourceKind::Cbr { rate_mbps })
    }

    fn scenario(kind: DisciplineKind, secs: u64) -> Scenario {
        let mut s = Scenario::single(
            "t",
            constant(12.0, secs),
            kind,
            SimTime::from_millis(20),
            vec![cbr(1.0)],
        );
        s.duration = SimTime::from_secs(secs);
        s
    }

    #[test]
    fn underloaded_cbr() {
        let r = run(&scenario(DisciplineKind::Bode, 10)).unwrap();
        let o = &r.summary.overall;
        assert!((o.throughput_mbps - 1.0).abs() < 0.01, "{}", o.throughput_mbps);
        assert!(o.p99_queuing_delay_ms.unwrap() <= 1.0);
        assert_eq!(o.dropped, 0);
    }

    #[test]
    fn deterministic_logs() {
        let s = scenario(DisciplineKind::Pie, 5);
        assert_eq!(run(&s).unwrap().log, run(&s).unwrap().log);
    }

    #[test]
    fn first_arrival_is_queued() {
        let mut s = scenario(DisciplineKind::TailDrop, 1);
        // Sparse trace so the first opportunity comes after the arrival.
        s.trace = constant(0.12, 1);
        let mut e = Engine::new(s).unwrap();
        loop {
            let (_, ev) = e.step().unwrap().unwrap();
            if let StepEvent::Arrival { accepted, .. } = ev {
                assert!(accepted);
                assert_eq!(e.scheduler().len(), 1);
                break;
            }
        }
    }

    #[test]
    fn empty_opportunity_changes_only_clock() {
        let mut s = scenario(DisciplineKind::Bode, 1);
        s.sources[0].start = SimTime::from_millis(500);
        let mut e = Engine::new(s).unwrap();
        let (t, ev) = e.step().unwrap().unwrap();
        assert_eq!(t, SimTime::from_millis(1));
        assert_eq!(
            ev,
            StepEvent::Opportunity {
                class: None,
                served: None,
                dropped: 0
            }
        );
        assert!(e.log().is_empty());
        assert!(e.scheduler().is_empty());
    }

    #[test]
    fn base_rtt_is_min_rtt() {
        let mut s = scenario(DisciplineKind::TailDrop, 1);
        s.min_rtt = SimTime::from_millis(10);
        let r = run(&s).unwrap();
        let rec = &r.log.records()[0];
        assert_eq!(rec.enqueued_at, Some(SimTime::from_millis(5)));
        let served = rec.outcome.unwrap().at();
        assert_eq!(rec.acked_at, Some(served + SimTime::from_millis(5)));
    }

    #[test]
    fn conservation_holds_every_step() {
        let mut s = scenario(DisciplineKind::Bode, 2);
        s.sources = vec![cbr(20.0)];
        let mut e = Engine::new(s).unwrap();
        while e.step().unwrap().is_some() {
            e.check_invariants().unwrap();
        }
    }

    #[test]
    fn rejects_unknown_class() {
        let mut s = scenario(DisciplineKind::Bode, 1);
        s.sources[0].class = 3;
        assert!(matches!(Engine::new(s), Err(Error::Validation(_))));
    }
}
