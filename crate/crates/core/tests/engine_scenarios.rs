use std::path::Path;

use bodesim::aqm::{DisciplineKind, DisciplineSpec, QueueDiscipline};
use bodesim::engine::{Outcome, StepEvent, TraceSource};
use bodesim::packet::DropReason;
use bodesim::scenario::preset;
use bodesim::source::{AimdParams, SourceConfig, SourceKind};
use bodesim::trace::{SyntheticKind, SyntheticTraceSpec};
use bodesim::{run, Engine, Scenario, SimTime};

fn ms(v: u64) -> SimTime {
    SimTime::from_millis(v)
}

fn constant(rate_mbps: f64, duration_s: u64) -> TraceSource {
    TraceSource::Synthetic(SyntheticTraceSpec::new(
        SyntheticKind::Constant { rate_mbps },
        duration_s,
    ))
}

fn file_trace(dir: &Path, lines: &str) -> TraceSource {
    let path = dir.join("trace.txt");
    std::fs::write(&path, lines).unwrap();
    TraceSource::File(path)
}

fn aimd() -> SourceConfig {
    SourceConfig::new(SourceKind::Aimd(AimdParams::default()))
}

/// Bits served between `from` and `to`, per second, in Mbps.
fn served_mbps(records: &[bodesim::engine::PacketRecord], from: SimTime, to: SimTime) -> f64 {
    let bytes: u64 = records
        .iter()
        .filter(|r| matches!(r.outcome, Some(Outcome::Served(t)) if t >= from && t < to))
        .map(|r| u64::from(r.size_bytes))
        .sum();
    bytes as f64 * 8.0 / (to - from).as_secs_f64() / 1e6
}

#[test]
fn adaptive_source_follows_capacity_step_under_bode() {
    let report = run(&preset("fig2-bode").unwrap()).unwrap();
    let (from, to) = (SimTime::from_secs(15), SimTime::from_secs(20));
    let bytes: u64 = report
        .log
        .records()
        .iter()
        .filter(|r| r.created_at >= from && r.created_at < to)
        .map(|r| u64::from(r.size_bytes))
        .sum();
    let rate = bytes as f64 * 8.0 / 5.0 / 1e6;
    assert!(rate <= 0.7, "send rate {rate:.3} Mbps in the 5 s after the step");
}

#[test]
fn aimd_fills_a_constant_link() {
    let mut s = Scenario::single(
        "aimd-12",
        constant(12.0, 30),
        DisciplineKind::TailDrop,
        ms(20),
        vec![aimd()],
    );
    s.duration = SimTime::from_secs(30);
    let report = run(&s).unwrap();
    let rate = served_mbps(report.log.records(), SimTime::from_secs(5), SimTime::from_secs(30));
    assert!((rate - 12.0).abs() <= 1.2, "steady-state delivery {rate:.3} Mbps");
}

#[test]
fn blackholed_aimd_backs_off_one_packet_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Scenario::single(
        "blackhole",
        file_trace(dir.path(), "100000\n"),
        DisciplineKind::TailDrop,
        ms(20),
        vec![aimd()],
    );
    s.classes[0].discipline = DisciplineSpec::TailDrop { capacity_bytes: 1500 };
    s.duration = SimTime::from_secs(30);
    let report = run(&s).unwrap();
    let later: Vec<_> = report
        .log
        .records()
        .iter()
        .filter(|r| r.created_at > SimTime::ZERO)
        .collect();
    assert!(later.len() >= 5, "expected several timeouts, got {}", later.len());
    assert!(later.iter().all(|r| r.retransmission && r.seq == 0));
    let times: Vec<u64> = later.iter().map(|r| r.created_at.as_micros()).collect();
    let gaps: Vec<u64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    assert_eq!(times[0], 200_000, "first timeout at the minimum RTO");
    assert_eq!(gaps[0], 400_000);
    for w in gaps.windows(2) {
        assert_eq!(w[1], 2 * w[0], "backoff doubles: {gaps:?}");
    }
}

#[test]
fn first_egress_drop_is_repaired_by_fast_retransmit() {
    let mut s = Scenario::single("isolated", constant(6.0, 10), DisciplineKind::Bode, ms(20), vec![aimd()]);
    s.duration = SimTime::from_secs(10);
    let report = run(&s).unwrap();
    let records = report.log.records();
    let (drop_at, lost) = records
        .iter()
        .filter_map(|r| match r.outcome {
            Some(Outcome::Dropped(t, DropReason::ExpiredAtEgress)) => Some((t, r)),
            _ => None,
        })
        .min_by_key(|(t, r)| (*t, r.id))
        .expect("slow start overshoots into an egress drop");
    let mut later: Vec<SimTime> = records
        .iter()
        .filter_map(|r| match r.outcome {
            Some(Outcome::Served(t)) if t >= drop_at && r.seq > lost.seq => Some(t),
            _ => None,
        })
        .collect();
    later.sort();
    let third = later[2];
    let retx = records
        .iter()
        .find(|r| r.retransmission && r.seq == lost.seq)
        .expect("lost segment is retransmitted");
    assert_eq!(retx.created_at, third + (s.min_rtt - s.min_rtt / 2), "third dupack triggers it");
    assert!(retx.created_at < drop_at + ms(200), "before any timeout could fire");
    assert!(report.flows[0].stats.fast_retransmits >= 1);
}

#[test]
fn five_expired_heads_resolve_in_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let mut cbr = SourceConfig::new(SourceKind::Cbr { rate_mbps: 12.0 });
    cbr.stop = Some(ms(5));
    let mut s = Scenario::single("expired", file_trace(dir.path(), "200\n"), DisciplineKind::Bode, ms(20), vec![cbr]);
    s.duration = SimTime::from_secs(1);
    let mut engine = Engine::new(s).unwrap();
    let (at, ev) = loop {
        let (at, ev) = engine.step().unwrap().expect("opportunity before the end");
        if matches!(ev, StepEvent::Opportunity { .. }) {
            break (at, ev);
        }
    };
    assert_eq!(at, ms(200));
    assert_eq!(
        ev,
        StepEvent::Opportunity {
            class: Some(0),
            served: Some(3),
            dropped: 3
        }
    );
    assert_eq!(engine.scheduler().class(0).len(), 1);
    for id in 0..3 {
        assert_eq!(
            engine.log().get(id).unwrap().outcome,
            Some(Outcome::Dropped(ms(200), DropReason::ExpiredAtEgress))
        );
    }
    engine.check_invariants().unwrap();
}

#[test]
fn underloaded_cbr_waits_at_most_one_gap() {
    let mut s = Scenario::single(
        "cbr",
        constant(12.0, 10),
        DisciplineKind::TailDrop,
        ms(20),
        vec![SourceConfig::new(SourceKind::Cbr { rate_mbps: 1.0 })],
    );
    s.duration = SimTime::from_secs(10);
    let report = run(&s).unwrap();
    let o = &report.summary.overall;
    assert!((o.throughput_mbps - 1.0).abs() < 0.02, "{}", o.throughput_mbps);
    assert!(o.p99_queuing_delay_ms.unwrap() <= 1.0);
    assert_eq!(o.dropped, 0);
}
