//! Trace-driven link capacity.
//!
//! A trace is a list of delivery opportunities in integer milliseconds. Each
//! opportunity can carry exactly one packet of up to 1500 bytes; an
//! opportunity that finds the queue empty is wasted. When the trace runs
//! out it replays from the start, shifted by `wrap_length_ms`.
//!
//! File format: one non-negative integer per line, newline-terminated,
//! non-decreasing, duplicates allowed.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    opportunities: Vec<u64>,
    wrap_length_ms: u64,
}

impl Trace {
    /// Builds a trace whose wrap length is its last timestamp.
    pub fn new(opportunities: Vec<u64>) -> Result<Self> {
        let wrap = *opportunities
            .last()
            .ok_or_else(|| Error::TraceValidation("trace is empty".into()))?;
        Trace::with_wrap(opportunities, wrap)
    }

    pub fn with_wrap(opportunities: Vec<u64>, wrap_length_ms: u64) -> Result<Self> {
        let Some(&last) = opportunities.last() else {
            return Err(Error::TraceValidation("trace is empty".into()));
        };
        if let Some(i) = opportunities.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::TraceValidation(format!(
                "timestamps must be non-decreasing ({} follows {} at entry {})",
                opportunities[i + 1],
                opportunities[i],
                i + 2
            )));
        }
        if wrap_length_ms < last {
            return Err(Error::TraceValidation(format!(
                "wrap length {wrap_length_ms} ms is shorter than the last timestamp {last} ms"
            )));
        }
        if wrap_length_ms == 0 {
            return Err(Error::TraceValidation(
                "wrap length must be positive (all opportunities at 0 ms would replay forever)"
                    .into(),
            ));
        }
        Ok(Trace {
            opportunities,
            wrap_length_ms,
        })
    }

    pub fn opportunities(&self) -> &[u64] {
        &self.opportunities
    }

    pub fn wrap_length_ms(&self) -> u64 {
        self.wrap_length_ms
    }

    pub fn len(&self) -> usize {
        self.opportunities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opportunities.is_empty()
    }

    /// Earliest opportunity strictly after `now`, replaying the trace
    /// indefinitely.
    pub fn next_opportunity(&self, now: SimTime) -> SimTime {
        let mut cursor = self.cursor_after(now);
        cursor.next_time()
    }

    /// A replay cursor positioned on the first opportunity strictly after
    /// `now`. Successive calls to [`OpportunityCursor::next_time`] return
    /// every opportunity, duplicates included.
    pub fn cursor_after(&self, now: SimTime) -> OpportunityCursor<'_> {
        let wrap_us = self.wrap_length_ms * 1_000;
        let period = now.as_micros() / wrap_us;
        let offset = now.as_micros() % wrap_us;
        // First index whose timestamp (in µs) within this period exceeds offset.
        let index = self
            .opportunities
            .partition_point(|&ms| ms * 1_000 <= offset);
        OpportunityCursor {
            trace: self,
            period,
            index,
        }
    }

    /// A replay cursor positioned on the very first opportunity.
    pub fn cursor(&self) -> OpportunityCursor<'_> {
        OpportunityCursor {
            trace: self,
            period: 0,
            index: 0,
        }
    }

    /// Largest rate the trace sustains over any `window_ms` window starting
    /// at an opportunity, in bits per second, assuming `packet_size` bytes
    /// per opportunity. Windows may straddle the wrap point.
    pub fn peak_rate_bps(&self, window_ms: u64, packet_size: u32) -> f64 {
        let window_ms = window_ms.max(1);
        let n = self.opportunities.len();
        // Two periods back to back so windows can cross the wrap.
        let ts: Vec<u64> = self
            .opportunities
            .iter()
            .copied()
            .chain(self.opportunities.iter().map(|t| t + self.wrap_length_ms))
            .collect();
        let mut best = 0usize;
        let mut hi = 0usize;
        for lo in 0..n {
            if hi < lo {
                hi = lo;
            }
            while hi < ts.len() && ts[hi] < ts[lo] + window_ms {
                hi += 1;
            }
            best = best.max(hi - lo);
        }
        best as f64 * f64::from(packet_size) * 8.0 * 1_000.0 / window_ms as f64
    }

    /// Mean capacity over one period, bits per second.
    pub fn mean_rate_bps(&self, packet_size: u32) -> f64 {
        self.opportunities.len() as f64 * f64::from(packet_size) * 8.0 * 1_000.0
            / self.wrap_length_ms as f64
    }

    /// Largest gap between consecutive opportunities in the first `horizon`
    /// of replay.
    pub fn max_gap(&self, horizon: SimTime) -> SimTime {
        let mut cursor = self.cursor();
        let mut prev = cursor.next_time();
        let mut gap = prev;
        while prev <= horizon {
            let t = cursor.next_time();
            gap = gap.max(t - prev);
            prev = t;
        }
        gap
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.opportunities.len() * 6);
        for t in &self.opportunities {
            s.push_str(&t.to_string());
            s.push('\n');
        }
        s
    }

    pub fn write_to_path(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_text().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// Parses trace text. Line numbers in errors are 1-based.
pub fn parse_trace(text: &str) -> Result<Trace> {
    let mut opportunities = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t: u64 = line.trim().parse().map_err(|_| Error::TraceParse {
            line: i + 1,
            message: format!("expected a non-negative integer, found `{line}`"),
        })?;
        if let Some(&prev) = opportunities.last() {
            if t < prev {
                return Err(Error::TraceParse {
                    line: i + 1,
                    message: format!("timestamps must be non-decreasing ({t} after {prev})"),
                });
            }
        }
        opportunities.push(t);
    }
    Trace::new(opportunities)
}

pub fn load_trace(path: &Path) -> Result<Trace> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text).map_err(|e| match e {
        Error::TraceParse { line, message } => Error::TraceParse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Iterator over the infinite replay of a trace.
#[derive(Clone, Debug)]
pub struct OpportunityCursor<'a> {
    trace: &'a Trace,
    period: u64,
    index: usize,
}

impl OpportunityCursor<'_> {
    pub fn peek_time(&self) -> SimTime {
        let ms = self.period * self.trace.wrap_length_ms + self.trace.opportunities[self.index];
        SimTime::from_millis(ms)
    }

    pub fn next_time(&mut self) -> SimTime {
        let t = self.peek_time();
        self.index += 1;
        if self.index == self.trace.opportunities.len() {
            self.index = 0;
            self.period += 1;
        }
        t
    }
}

impl Iterator for OpportunityCursor<'_> {
    type Item = SimTime;
    fn next(&mut self) -> Option<SimTime> {
        Some(self.next_time())
    }
}

/// Owned cursor state, for holders that cannot borrow the trace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CursorState {
    period: u64,
    index: usize,
}

impl CursorState {
    pub fn next_time(&mut self, trace: &Trace) -> SimTime {
        let mut c = OpportunityCursor {
            trace,
            period: self.period,
            index: self.index,
        };
        let t = c.next_time();
        self.period = c.period;
        self.index = c.index;
        t
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SyntheticKind {
    Constant {
        rate_mbps: f64,
    },
    Step {
        rate_before_mbps: f64,
        rate_after_mbps: f64,
        step_at_s: u64,
    },
    /// Capacity follows a bounded random walk in log-rate space, changing
    /// every `step_interval_ms`.
    RandomWalk {
        min_mbps: f64,
        max_mbps: f64,
        step_interval_ms: u64,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTraceSpec {
    pub kind: SyntheticKind,
    pub duration_s: u64,
    pub packet_size_bytes: u32,
}

impl SyntheticTraceSpec {
    pub fn new(kind: SyntheticKind, duration_s: u64) -> Self {
        SyntheticTraceSpec {
            kind,
            duration_s,
            packet_size_bytes: 1500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::TraceValidation(m));
        if self.duration_s == 0 {
            return bad("duration must be positive".into());
        }
        if self.packet_size_bytes == 0 || self.packet_size_bytes > crate::packet::MAX_PACKET_BYTES {
            return bad(format!(
                "packet size {} outside 1..=1500 bytes",
                self.packet_size_bytes
            ));
        }
        let rates: Vec<f64> = match self.kind {
            SyntheticKind::Constant { rate_mbps } => vec![rate_mbps],
            SyntheticKind::Step {
                rate_before_mbps,
                rate_after_mbps,
                step_at_s,
            } => {
                if step_at_s >= self.duration_s {
                    return bad(format!(
                        "step at {step_at_s} s must precede the end of the trace ({} s)",
                        self.duration_s
                    ));
                }
                vec![rate_before_mbps, rate_after_mbps]
            }
            SyntheticKind::RandomWalk {
                min_mbps,
                max_mbps,
                step_interval_ms,
                ..
            } => {
                if max_mbps < min_mbps {
                    return bad(format!("random walk max {max_mbps} below min {min_mbps}"));
                }
                if step_interval_ms == 0 {
                    return bad("random walk step interval must be positive".into());
                }
                vec![min_mbps, max_mbps]
            }
        };
        let duration_ms = self.duration_s * 1_000;
        for r in rates {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("rate must be positive, got {r} Mbps"));
            }
            let spacing_ms = f64::from(self.packet_size_bytes) * 8.0 / (r * 1e3);
            if spacing_ms > duration_ms as f64 {
                return bad(format!(
                    "rate {r} Mbps spaces opportunities {spacing_ms:.1} ms apart, beyond the {duration_ms} ms trace"
                ));
            }
        }
        Ok(())
    }
}

/// Converts a rate in Mbps to whole bits per second.
fn rate_bps(mbps: f64) -> u64 {
    (mbps * 1e6).round() as u64
}

/// Renders a capacity profile into opportunities. Each millisecond earns
/// `rate_bps` bit-milliseconds of credit; an opportunity is emitted every
/// time one packet's worth has accumulated. Integer arithmetic keeps the
/// spacing exact: 12 Mbps with 1500 B packets gives one opportunity per ms.
fn render(duration_ms: u64, packet_size: u32, mut rate_at: impl FnMut(u64) -> u64) -> Vec<u64> {
    let packet_cost = u64::from(packet_size) * 8 * 1_000;
    let mut credit = 0u64;
    let mut out = Vec::new();
    for ms in 1..=duration_ms {
        credit += rate_at(ms);
        while credit >= packet_cost {
            credit -= packet_cost;
            out.push(ms);
        }
    }
    out
}

pub fn generate_trace(spec: &SyntheticTraceSpec) -> Result<Trace> {
    spec.validate()?;
    let duration_ms = spec.duration_s * 1_000;
    let size = spec.packet_size_bytes;
    let ops = match spec.kind {
        SyntheticKind::Constant { rate_mbps } => {
            let r = rate_bps(rate_mbps);
            render(duration_ms, size, |_| r)
        }
        SyntheticKind::Step {
            rate_before_mbps,
            rate_after_mbps,
            step_at_s,
        } => {
            let (before, after) = (rate_bps(rate_before_mbps), rate_bps(rate_after_mbps));
            let step_ms = step_at_s * 1_000;
            render(duration_ms, size, |ms| if ms <= step_ms { before } else { after })
        }
        SyntheticKind::RandomWalk {
            min_mbps,
            max_mbps,
            step_interval_ms,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (lo, hi) = (min_mbps.ln(), max_mbps.ln());
            let reach = (hi - lo) / 4.0;
            let mut x = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            let mut rate = rate_bps(x.exp());
            render(duration_ms, size, |ms| {
                if ms > 1 && (ms - 1) % step_interval_ms == 0 && hi > lo {
                    x += rng.gen_range(-reach..=reach);
                    // Reflect at the bounds.
                    if x > hi {
                        x = 2.0 * hi - x;
                    }
                    if x < lo {
                        x = 2.0 * lo - x;
                    }
                    x = x.clamp(lo, hi);
                    rate = rate_bps(x.exp());
                }
                rate
            })
        }
    };
    if ops.is_empty() {
        return Err(Error::TraceValidation(
            "rate too low: no opportunity fits in the trace duration".into(),
        ));
    }
    Trace::with_wrap(ops, duration_ms)
}
