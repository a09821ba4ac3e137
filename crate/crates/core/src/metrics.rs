//! Throughput, tail queuing delay and power, computed from a finished
//! [`EventLog`].
//!
//! Queuing delay is measured at the bottleneck only, from enqueue to
//! service. Percentiles use the nearest-rank rule.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::engine::{EventLog, Outcome, PacketRecord};
use crate::error::{Error, Result};
use crate::packet::{ClassId, DropReason, FlowId};
use crate::time::SimTime;

/// Written in CSV cells whose value is undefined.
pub const NA: &str = "NA";

/// Nearest-rank percentile: the element at index `ceil(q * N) - 1` of the
/// ascending sort.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, q)
}

/// [`percentile`] over samples already sorted ascending.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Validation("percentile of an empty sample".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Validation(format!("percentile fraction {q} outside (0, 1]")));
    }
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    Ok(sorted[rank - 1])
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassSummary {
    /// `None` for the all-classes row.
    pub class: Option<ClassId>,
    pub generated: u64,
    /// Packets that reached the bottleneck.
    pub offered: u64,
    pub served: u64,
    pub dropped: u64,
    pub drops_by_reason: [u64; 5],
    pub retransmissions: u64,
    pub throughput_mbps: f64,
    pub p99_queuing_delay_ms: Option<f64>,
    pub peak_queuing_delay_ms: Option<f64>,
    pub mean_queuing_delay_ms: Option<f64>,
    /// Throughput in Mbps over p99 queuing delay in ms. Undefined without
    /// delay samples or when the p99 is zero.
    pub power: Option<f64>,
    pub drop_rate: f64,
    pub retransmission_fraction: f64,
    pub delay_requirement_ms: Option<f64>,
    pub requirement_met: Option<bool>,
}

impl ClassSummary {
    pub fn drops(&self, reason: DropReason) -> u64 {
        self.drops_by_reason[reason.index()]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub overall: ClassSummary,
    pub per_class: Vec<ClassSummary>,
}

#[derive(Default)]
struct Acc {
    generated: u64,
    offered: u64,
    served: u64,
    dropped: u64,
    drops_by_reason: [u64; 5],
    retransmissions: u64,
    served_bits: u64,
    delays_ms: Vec<f64>,
}

impl Acc {
    fn add(&mut self, r: &PacketRecord) {
        self.generated += 1;
        self.retransmissions += u64::from(r.retransmission);
        if r.enqueued_at.is_some() {
            self.offered += 1;
        }
        match r.outcome {
            Some(Outcome::Served(_)) => {
                self.served += 1;
                self.served_bits += u64::from(r.size_bytes) * 8;
                if let Some(d) = r.queuing_delay() {
                    self.delays_ms.push(d.as_millis_f64());
                }
            }
            Some(Outcome::Dropped(_, why)) => {
                self.dropped += 1;
                self.drops_by_reason[why.index()] += 1;
            }
            None => {}
        }
    }

    fn finish(
        mut self,
        class: Option<ClassId>,
        duration: SimTime,
        requirement: Option<SimTime>,
    ) -> ClassSummary {
        self.delays_ms.sort_by(f64::total_cmp);
        let d = &self.delays_ms;
        let p99 = percentile_sorted(d, 0.99).ok();
        let throughput_mbps = self.served_bits as f64 / duration.as_secs_f64() / 1e6;
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let delay_requirement_ms = requirement.map(SimTime::as_millis_f64);
        ClassSummary {
            class,
            generated: self.generated,
            offered: self.offered,
            served: self.served,
            dropped: self.dropped,
            drops_by_reason: self.drops_by_reason,
            retransmissions: self.retransmissions,
            throughput_mbps,
            p99_queuing_delay_ms: p99,
            peak_queuing_delay_ms: d.last().copied(),
            mean_queuing_delay_ms: (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64),
            power: p99.filter(|&p| p > 0.0).map(|p| throughput_mbps / p),
            drop_rate: ratio(self.dropped, self.offered),
            retransmission_fraction: ratio(self.retransmissions, self.generated),
            delay_requirement_ms,
            requirement_met: delay_requirement_ms.zip(p99).map(|(req, p)| p <= req),
        }
    }
}

/// Summarizes a run. `requirements` has one entry per class.
pub fn summarize(log: &EventLog, duration: SimTime, requirements: &[Option<SimTime>]) -> Result<Summary> {
    if duration == SimTime::ZERO {
        return Err(Error::Validation("cannot summarize a zero-length run".into()));
    }
    let mut overall = Acc::default();
    let mut classes: Vec<Acc> = requirements.iter().map(|_| Acc::default()).collect();
    for r in log.records() {
        overall.add(r);
        classes
            .get_mut(r.class)
            .ok_or(Error::UnknownClass {
                class: r.class,
                configured: requirements.len(),
            })?
            .add(r);
    }
    Ok(Summary {
        overall: overall.finish(None, duration, None),
        per_class: classes
            .into_iter()
            .zip(requirements)
            .enumerate()
            .map(|(k, (acc, req))| acc.finish(Some(k), duration, *req))
            .collect(),
    })
}

/// End-to-end delay including retransmissions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RetxDelays {
    /// Per sequence number: first transmission to first delivery, in ms.
    pub samples_ms: Vec<f64>,
    /// Sequence numbers never delivered.
    pub undelivered: u64,
}

/// For every (flow, sequence number), the time from the first send to the
/// first successful delivery at the receiver, across all retransmissions.
pub fn e2e_delay_with_retx(log: &EventLog) -> RetxDelays {
    // (first created_at, first delivery)
    let mut by_seq: BTreeMap<(FlowId, u64), (SimTime, Option<SimTime>)> = BTreeMap::new();
    for r in log.records() {
        let served = match r.outcome {
            Some(Outcome::Served(t)) => Some(t),
            _ => None,
        };
        let e = by_seq.entry((r.flow, r.seq)).or_insert((r.created_at, None));
        e.0 = e.0.min(r.created_at);
        e.1 = match (e.1, served) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
    let mut out = RetxDelays::default();
    for (first_sent, delivered) in by_seq.into_values() {
        match delivered {
            Some(t) => out.samples_ms.push((t - first_sent).as_millis_f64()),
            None => out.undelivered += 1,
        }
    }
    out
}

/// Empirical CDF rows `(value, cumulative fraction)`, ascending, with
/// duplicate values collapsed onto their final fraction.
pub fn cdf_rows(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.into_iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match rows.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => rows.push((v, frac)),
        }
    }
    rows
}

pub fn write_cdf(samples: &[f64], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "value,cumulative_fraction")?;
    for (v, f) in cdf_rows(samples) {
        writeln!(w, "{v},{f}")?;
    }
    Ok(())
}

pub fn export_cdf(samples: &[f64], path: &Path) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Validation("cannot export the CDF of an empty sample".into()));
    }
    let mut buf = Vec::new();
    write_cdf(samples, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Queuing delays of every served packet, in ms, in log order.
pub fn queuing_delays_ms(log: &EventLog) -> Vec<f64> {
    log.records()
        .iter()
        .filter_map(|r| r.queuing_delay().map(SimTime::as_millis_f64))
        .collect()
}

/// Column order of the summary CSV.
pub fn summary_csv_header() -> String {
    let mut cols = vec![
        "scenario",
        "discipline",
        "class",
        "generated",
        "offered",
        "served",
        "dropped",
        "throughput_mbps",
        "p99_queuing_delay_ms",
        "peak_queuing_delay_ms",
        "mean_queuing_delay_ms",
        "power",
        "drop_rate",
        "retransmission_fraction",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    cols.extend(DropReason::ALL.iter().map(|r| format!("drops_{}", r.as_str())));
    cols.push("delay_requirement_ms".into());
    cols.push("requirement_met".into());
    cols.join(",")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| NA.to_string())
}

/// One CSV line (no newline) for `row`.
pub fn summary_csv_row(scenario: &str, discipline: &str, row: &ClassSummary) -> String {
    let class = row
        .class
        .map(|k| k.to_string())
        .unwrap_or_else(|| "all".into());
    let mut cells = vec![
        scenario.to_string(),
        discipline.to_string(),
        class,
        row.generated.to_string(),
        row.offered.to_string(),
        row.served.to_string(),
        row.dropped.to_string(),
        format!("{:.6}", row.throughput_mbps),
        fmt_opt(row.p99_queuing_delay_ms),
        fmt_opt(row.peak_queuing_delay_ms),
        fmt_opt(row.mean_queuing_delay_ms),
        fmt_opt(row.power),
        format!("{:.6}", row.drop_rate),
        format!("{:.6}", row.retransmission_fraction),
    ];
    cells.extend(row.drops_by_reason.iter().map(u64::to_string));
    cells.push(fmt_opt(row.delay_requirement_ms));
    cells.push(
        row.requirement_met
            .map(|m| m.to_string())
            .unwrap_or_else(|| NA.into()),
    );
    cells.join(",")
}

/// Writes the overall row followed by one row per class. A single-class
/// run gets just the overall row and its class 0 row.
pub fn write_summary_csv(
    w: &mut impl Write,
    runs: &[(&str, &str, &Summary)],
) -> std::io::Result<()> {
    writeln!(w, "{}", summary_csv_header())?;
    for (scenario, discipline, s) in runs {
        writeln!(w, "{}", summary_csv_row(scenario, discipline, &s.overall))?;
        for c in &s.per_class {
            writeln!(w, "{}", summary_csv_row(scenario, discipline, c))?;
        }
    }
    Ok(())
}
