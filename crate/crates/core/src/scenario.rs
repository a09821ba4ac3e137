//! TOML scenario files and the bundled presets.
//!
//! ```toml
//! preset = "interactive"          # D defaults to 100 ms, else 20 ms
//!
//! [trace]
//! kind = "step"                   # file | constant | step | random-walk
//! before_mbps = 6.0
//! after_mbps = 0.6
//! step_at_s = 10
//!
//! [engine]
//! duration_s = 20
//!
//! [aqm]
//! discipline = "bode"
//!
//! [[sources]]
//! kind = "adaptive"
//! ```
//!
//! Omitted discipline parameters take their standard values derived from
//! D and the minimum RTT. Unknown keys are rejected, and so are keys that
//! do not apply to the chosen `kind` or `discipline`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aqm::{BufferCap, DisciplineKind, DisciplineSpec};
use crate::diffserv::ClassConfig;
use crate::engine::{OutputOptions, Scenario, TraceSource};
use crate::error::{Error, Result};
use crate::source::{AdaptiveParams, AimdParams, SourceConfig, SourceKind};
use crate::time::SimTime;
use crate::trace::{SyntheticKind, SyntheticTraceSpec};

pub const DEFAULT_DURATION_S: i64 = 300;
pub const DEFAULT_MIN_RTT_MS: f64 = 10.0;
pub const INTERACTIVE_DELAY_MS: u64 = 100;
pub const DEFAULT_DELAY_MS: u64 = 20;

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delay_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    compare: Option<Vec<String>>,
    trace: TraceSection,
    #[serde(default)]
    engine: EngineSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    aqm: Option<DisciplineSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    classes: Vec<DisciplineSection>,
    #[serde(default)]
    sources: Vec<SourceSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outputs: Option<OutputsSection>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TraceSection {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    before_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    after_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    step_at_s: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    step_interval_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    duration_s: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    packet_size: Option<u32>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct EngineSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    duration_s: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_rtt_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
enum CapValue {
    Bytes(u64),
    Text(String),
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct DisciplineSection {
    discipline: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    delay_requirement_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounded_delay_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    protect_threshold: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cap: Option<CapValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interval_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ref_delay_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    update_interval_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    capacity_bytes: Option<u64>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SourceSection {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    start_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    packet_size: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    increase_kbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decrease_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comfort_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_cwnd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rto_min_ms: Option<f64>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct OutputsSection {
    #[serde(default)]
    events: bool,
    #[serde(default)]
    cdf: bool,
}

/// Maps (table, array index, key) to 1-based line numbers in the source
/// text, for error messages.
struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn line_of_offset(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    /// Line of `key` inside the `index`-th occurrence of `table` (`""` for
    /// the root table). Falls back to the table header, then to `None`.
    fn find(&self, table: &str, index: usize, key: Option<&str>) -> Option<usize> {
        let mut current = String::new();
        let mut seen: std::collections::HashMap<String, usize> = Default::default();
        let mut header_line = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if line.starts_with('[') {
                let name = line
                    .trim_start_matches('[')
                    .split(']')
                    .next()
                    .unwrap_or("")
                    .trim()
                    .to_string();
                let n = seen.entry(name.clone()).or_insert(0);
                let this_index = *n;
                *n += 1;
                current = format!("{name}#{this_index}");
                if name == table && this_index == index {
                    header_line = Some(i + 1);
                    if key.is_none() {
                        return header_line;
                    }
                }
                continue;
            }
            if current == format!("{table}#{index}") || (table.is_empty() && current.is_empty()) {
                if let Some(k) = key {
                    let lhs = line.split('=').next().unwrap_or("").trim();
                    if line.contains('=') && lhs == k {
                        return Some(i + 1);
                    }
                }
            }
        }
        header_line
    }
}

struct Ctx<'a> {
    origin: &'a str,
    loc: Locator<'a>,
}

impl Ctx<'_> {
    fn err(&self, line: Option<usize>, message: impl Into<String>) -> Error {
        Error::Scenario {
            origin: match line {
                Some(l) => format!("{}:{l}", self.origin),
                None => self.origin.to_string(),
            },
            message: message.into(),
        }
    }

    fn at(&self, table: &str, index: usize, key: Option<&str>, message: impl Into<String>) -> Error {
        self.err(self.loc.find(table, index, key), message)
    }

    /// Rejects any present key not in `allowed`.
    fn only(
        &self,
        table: &str,
        index: usize,
        what: &str,
        present: &[(&str, bool)],
        allowed: &[&str],
    ) -> Result<()> {
        for (key, set) in present {
            if *set && !allowed.contains(key) {
                return Err(self.at(table, index, Some(key), format!("`{key}` does not apply to {what}")));
            }
        }
        Ok(())
    }

    fn required<T: Copy>(&self, table: &str, index: usize, key: &str, v: Option<T>, what: &str) -> Result<T> {
        v.ok_or_else(|| self.at(table, index, None, format!("{what} requires `{key}`")))
    }

    fn millis(&self, table: &str, index: usize, key: &str, v: f64) -> Result<SimTime> {
        if !(v.is_finite() && v >= 0.0) {
            return Err(self.at(table, index, Some(key), format!("`{key}` must be a non-negative number")));
        }
        Ok(SimTime::from_millis_f64(v))
    }

    fn positive_millis(&self, table: &str, index: usize, key: &str, v: f64) -> Result<SimTime> {
        let t = self.millis(table, index, key, v)?;
        if t == SimTime::ZERO {
            return Err(self.at(table, index, Some(key), format!("`{key}` must be positive")));
        }
        Ok(t)
    }
}

/// Parses a scenario file. Relative trace paths resolve against the file's
/// directory.
pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let default_name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario")
        .to_string();
    parse_str(&text, &path.display().to_string(), Some(&base), &default_name)
}

/// Parses scenario text. `origin` prefixes error messages; `base`, when
/// given, anchors relative trace paths.
pub fn parse_str(text: &str, origin: &str, base: Option<&Path>, default_name: &str) -> Result<Scenario> {
    let ctx = Ctx {
        origin,
        loc: Locator { text },
    };
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| ctx.loc.line_of_offset(s.start));
        ctx.err(line, e.message().trim().to_string())
    })?;
    resolve(file, &ctx, base, default_name)
}

fn resolve(file: ScenarioFile, ctx: &Ctx<'_>, base: Option<&Path>, default_name: &str) -> Result<Scenario> {
    let interactive = match file.preset.as_deref() {
        None | Some("default") => false,
        Some("interactive") => true,
        Some(other) => {
            return Err(ctx.at(
                "",
                0,
                Some("preset"),
                format!("unknown preset `{other}` (expected `interactive` or `default`)"),
            ))
        }
    };
    let delay_target = match file.delay_ms {
        Some(v) => ctx.positive_millis("", 0, "delay_ms", v)?,
        None if interactive => SimTime::from_millis(INTERACTIVE_DELAY_MS),
        None => SimTime::from_millis(DEFAULT_DELAY_MS),
    };

    let eng = &file.engine;
    let duration_s = eng.duration_s.unwrap_or(DEFAULT_DURATION_S);
    if duration_s <= 0 {
        return Err(ctx.at("engine", 0, Some("duration_s"), format!("duration_s must be positive, got {duration_s}")));
    }
    let duration = SimTime::from_secs(duration_s as u64);
    let min_rtt = ctx.millis("engine", 0, "min_rtt_ms", eng.min_rtt_ms.unwrap_or(DEFAULT_MIN_RTT_MS))?;
    let seed = eng.seed.unwrap_or(0);

    let trace = resolve_trace(&file.trace, ctx, base, duration_s as u64)?;

    let sections: Vec<(&str, usize, &DisciplineSection)> = match (&file.aqm, file.classes.is_empty()) {
        (Some(_), false) => {
            return Err(ctx.at("aqm", 0, None, "use either [aqm] or [[classes]], not both"));
        }
        (Some(a), true) => vec![("aqm", 0, a)],
        (None, false) => file.classes.iter().enumerate().map(|(i, c)| ("classes", i, c)).collect(),
        (None, true) => Vec::new(),
    };
    let classes = if sections.is_empty() {
        vec![ClassConfig::new(DisciplineSpec::defaults(DisciplineKind::Bode, delay_target, min_rtt))]
    } else {
        sections
            .into_iter()
            .map(|(table, i, s)| resolve_class(s, ctx, table, i, delay_target, min_rtt))
            .collect::<Result<Vec<_>>>()?
    };

    if file.sources.is_empty() {
        return Err(ctx.err(None, "at least one [[sources]] entry is required"));
    }
    let sources = file
        .sources
        .iter()
        .enumerate()
        .map(|(i, s)| resolve_source(s, ctx, i, classes.len()))
        .collect::<Result<Vec<_>>>()?;

    let compare = match &file.compare {
        None => Vec::new(),
        Some(names) => names
            .iter()
            .map(|n| n.parse::<DisciplineKind>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| ctx.at("", 0, Some("compare"), e.to_string()))?,
    };

    let outputs = file
        .outputs
        .as_ref()
        .map(|o| OutputOptions {
            events: o.events,
            cdf: o.cdf,
        })
        .unwrap_or_default();

    let scenario = Scenario {
        name: file.name.clone().unwrap_or_else(|| default_name.to_string()),
        trace,
        duration,
        min_rtt,
        seed,
        delay_target,
        classes,
        sources,
        outputs,
        compare,
    };
    scenario.validate().map_err(|e| ctx.err(None, e.to_string()))?;
    Ok(scenario)
}

fn resolve_trace(t: &TraceSection, ctx: &Ctx<'_>, base: Option<&Path>, engine_duration_s: u64) -> Result<TraceSource> {
    let present = [
        ("path", t.path.is_some()),
        ("rate_mbps", t.rate_mbps.is_some()),
        ("before_mbps", t.before_mbps.is_some()),
        ("after_mbps", t.after_mbps.is_some()),
        ("step_at_s", t.step_at_s.is_some()),
        ("min_mbps", t.min_mbps.is_some()),
        ("max_mbps", t.max_mbps.is_some()),
        ("step_interval_ms", t.step_interval_ms.is_some()),
        ("seed", t.seed.is_some()),
        ("duration_s", t.duration_s.is_some()),
        ("packet_size", t.packet_size.is_some()),
    ];
    let synth = ["duration_s", "packet_size"];
    let what = format!("trace kind `{}`", t.kind);
    let kind = match t.kind.as_str() {
        "file" => {
            ctx.only("trace", 0, &what, &present, &["path"])?;
            let raw = t
                .path
                .as_deref()
                .ok_or_else(|| ctx.at("trace", 0, None, "file trace requires `path`"))?;
            let mut p = PathBuf::from(raw);
            if p.is_relative() {
                if let Some(b) = base {
                    p = b.join(p);
                }
            }
            if !p.is_file() {
                return Err(ctx.at("trace", 0, Some("path"), format!("trace file {} not found", p.display())));
            }
            return Ok(TraceSource::File(p));
        }
        "constant" => {
            ctx.only("trace", 0, &what, &present, &[&["rate_mbps"][..], &synth].concat())?;
            SyntheticKind::Constant {
                rate_mbps: ctx.required("trace", 0, "rate_mbps", t.rate_mbps, &what)?,
            }
        }
        "step" => {
            ctx.only("trace", 0, &what, &present, &[&["before_mbps", "after_mbps", "step_at_s"][..], &synth].concat())?;
            SyntheticKind::Step {
                rate_before_mbps: ctx.required("trace", 0, "before_mbps", t.before_mbps, &what)?,
                rate_after_mbps: ctx.required("trace", 0, "after_mbps", t.after_mbps, &what)?,
                step_at_s: ctx.required("trace", 0, "step_at_s", t.step_at_s, &what)?,
            }
        }
        "random-walk" => {
            ctx.only(
                "trace",
                0,
                &what,
                &present,
                &[&["min_mbps", "max_mbps", "step_interval_ms", "seed"][..], &synth].concat(),
            )?;
            SyntheticKind::RandomWalk {
                min_mbps: ctx.required("trace", 0, "min_mbps", t.min_mbps, &what)?,
                max_mbps: ctx.required("trace", 0, "max_mbps", t.max_mbps, &what)?,
                step_interval_ms: t.step_interval_ms.unwrap_or(DEFAULT_WALK_STEP_MS),
                seed: t.seed.unwrap_or(0),
            }
        }
        other => {
            return Err(ctx.at(
                "trace",
                0,
                Some("kind"),
                format!("unknown trace kind `{other}` (expected file, constant, step or random-walk)"),
            ))
        }
    };
    let spec = SyntheticTraceSpec {
        kind,
        duration_s: t.duration_s.unwrap_or(engine_duration_s),
        packet_size_bytes: t.packet_size.unwrap_or(crate::packet::MAX_PACKET_BYTES),
    };
    spec.validate().map_err(|e| ctx.at("trace", 0, None, e.to_string()))?;
    Ok(TraceSource::Synthetic(spec))
}

/// Random-walk step interval when a file leaves it out.
pub const DEFAULT_WALK_STEP_MS: u64 = 50;

fn resolve_class(
    s: &DisciplineSection,
    ctx: &Ctx<'_>,
    table: &str,
    index: usize,
    d: SimTime,
    min_rtt: SimTime,
) -> Result<ClassConfig> {
    let kind: DisciplineKind = s
        .discipline
        .parse()
        .map_err(|e: Error| ctx.at(table, index, Some("discipline"), e.to_string()))?;
    let present = [
        ("delay_requirement_ms", s.delay_requirement_ms.is_some()),
        ("bounded_delay_ms", s.bounded_delay_ms.is_some()),
        ("protect_threshold", s.protect_threshold.is_some()),
        ("cap", s.cap.is_some()),
        ("target_ms", s.target_ms.is_some()),
        ("interval_ms", s.interval_ms.is_some()),
        ("ref_delay_ms", s.ref_delay_ms.is_some()),
        ("alpha", s.alpha.is_some()),
        ("beta", s.beta.is_some()),
        ("update_interval_ms", s.update_interval_ms.is_some()),
        ("capacity_bytes", s.capacity_bytes.is_some()),
    ];
    let allowed: &[&str] = match kind {
        DisciplineKind::Bode => &["delay_requirement_ms", "bounded_delay_ms", "protect_threshold", "cap"],
        DisciplineKind::CoDel => &["delay_requirement_ms", "target_ms", "interval_ms", "capacity_bytes"],
        DisciplineKind::Pie => &[
            "delay_requirement_ms",
            "ref_delay_ms",
            "alpha",
            "beta",
            "update_interval_ms",
            "capacity_bytes",
        ],
        DisciplineKind::TailDrop | DisciplineKind::HeadDrop => &["delay_requirement_ms", "capacity_bytes"],
    };
    ctx.only(table, index, &format!("discipline `{kind}`"), &present, allowed)?;

    let ms = |key: &str, v: Option<f64>| -> Result<Option<SimTime>> {
        v.map(|v| ctx.positive_millis(table, index, key, v)).transpose()
    };
    let requirement = ms("delay_requirement_ms", s.delay_requirement_ms)?;
    // A class's own requirement, when set, stands in for the global D.
    let class_d = requirement.unwrap_or(d);
    let mut spec = DisciplineSpec::defaults(kind, class_d, min_rtt);
    match &mut spec {
        DisciplineSpec::Bode {
            bounded_delay,
            protect_threshold,
            cap,
        } => {
            if let Some(v) = ms("bounded_delay_ms", s.bounded_delay_ms)? {
                *bounded_delay = v;
            }
            if let Some(v) = s.protect_threshold {
                *protect_threshold = v;
            }
            if let Some(c) = &s.cap {
                *cap = match c {
                    CapValue::Bytes(b) => BufferCap::Bytes(*b),
                    CapValue::Text(t) => t
                        .parse()
                        .map_err(|e: Error| ctx.at(table, index, Some("cap"), e.to_string()))?,
                };
            }
        }
        DisciplineSpec::CoDel {
            target,
            interval,
            capacity_bytes,
        } => {
            if let Some(v) = ms("target_ms", s.target_ms)? {
                *target = v;
            }
            if let Some(v) = ms("interval_ms", s.interval_ms)? {
                *interval = v;
            }
            if let Some(v) = s.capacity_bytes {
                *capacity_bytes = v;
            }
        }
        DisciplineSpec::Pie {
            ref_delay,
            alpha,
            beta,
            update_interval,
            capacity_bytes,
        } => {
            if let Some(v) = ms("ref_delay_ms", s.ref_delay_ms)? {
                *ref_delay = v;
            }
            if let Some(v) = s.alpha {
                *alpha = v;
            }
            if let Some(v) = s.beta {
                *beta = v;
            }
            if let Some(v) = ms("update_interval_ms", s.update_interval_ms)? {
                *update_interval = v;
            }
            if let Some(v) = s.capacity_bytes {
                *capacity_bytes = v;
            }
        }
        DisciplineSpec::TailDrop { capacity_bytes } | DisciplineSpec::HeadDrop { capacity_bytes } => {
            if let Some(v) = s.capacity_bytes {
                *capacity_bytes = v;
            }
        }
    }
    spec.validate()
        .map_err(|e| ctx.at(table, index, None, e.to_string()))?;
    Ok(ClassConfig {
        discipline: spec,
        delay_requirement: requirement,
    })
}

fn resolve_source(s: &SourceSection, ctx: &Ctx<'_>, index: usize, classes: usize) -> Result<SourceConfig> {
    let t = "sources";
    let present = [
        ("rate_mbps", s.rate_mbps.is_some()),
        ("initial_mbps", s.initial_mbps.is_some()),
        ("min_mbps", s.min_mbps.is_some()),
        ("max_mbps", s.max_mbps.is_some()),
        ("increase_kbps", s.increase_kbps.is_some()),
        ("decrease_factor", s.decrease_factor.is_some()),
        ("comfort_ms", s.comfort_ms.is_some()),
        ("initial_cwnd", s.initial_cwnd.is_some()),
        ("rto_min_ms", s.rto_min_ms.is_some()),
    ];
    let what = format!("source kind `{}`", s.kind);
    let kind = match s.kind.as_str() {
        "cbr" => {
            ctx.only(t, index, &what, &present, &["rate_mbps"])?;
            let rate_mbps = ctx.required(t, index, "rate_mbps", s.rate_mbps, &what)?;
            if !(rate_mbps.is_finite() && rate_mbps > 0.0) {
                return Err(ctx.at(t, index, Some("rate_mbps"), "rate_mbps must be positive"));
            }
            SourceKind::Cbr { rate_mbps }
        }
        "adaptive" => {
            ctx.only(
                t,
                index,
                &what,
                &present,
                &["initial_mbps", "min_mbps", "max_mbps", "increase_kbps", "decrease_factor", "comfort_ms"],
            )?;
            let d = AdaptiveParams::default();
            let p = AdaptiveParams {
                initial_mbps: s.initial_mbps.unwrap_or(d.initial_mbps),
                min_mbps: s.min_mbps.unwrap_or(d.min_mbps),
                max_mbps: s.max_mbps.unwrap_or(d.max_mbps),
                increase_step_kbps: s.increase_kbps.unwrap_or(d.increase_step_kbps),
                decrease_factor: s.decrease_factor.unwrap_or(d.decrease_factor),
                comfort: s
                    .comfort_ms
                    .map(|v| ctx.positive_millis(t, index, "comfort_ms", v))
                    .transpose()?,
            };
            p.validate().map_err(|m| ctx.at(t, index, None, m))?;
            SourceKind::Adaptive(p)
        }
        "aimd" => {
            ctx.only(t, index, &what, &present, &["initial_cwnd", "rto_min_ms"])?;
            let d = AimdParams::default();
            let p = AimdParams {
                initial_cwnd: s.initial_cwnd.unwrap_or(d.initial_cwnd),
                rto_min: match s.rto_min_ms {
                    Some(v) => ctx.positive_millis(t, index, "rto_min_ms", v)?,
                    None => d.rto_min,
                },
            };
            if !(p.initial_cwnd.is_finite() && p.initial_cwnd >= 1.0) {
                return Err(ctx.at(t, index, Some("initial_cwnd"), "initial_cwnd must be at least 1"));
            }
            SourceKind::Aimd(p)
        }
        other => {
            return Err(ctx.at(
                t,
                index,
                Some("kind"),
                format!("unknown source kind `{other}` (expected cbr, adaptive or aimd)"),
            ))
        }
    };
    let class = s.class.unwrap_or(0);
    if class >= classes {
        return Err(ctx.at(
            t,
            index,
            Some("class"),
            format!("class {class} not configured ({classes} classes)"),
        ));
    }
    let seconds = |key: &str, v: f64| -> Result<SimTime> {
        if !(v.is_finite() && v >= 0.0) {
            return Err(ctx.at(t, index, Some(key), format!("`{key}` must be a non-negative number")));
        }
        Ok(SimTime::from_secs_f64(v))
    };
    let start = seconds("start_s", s.start_s.unwrap_or(0.0))?;
    let stop = s.stop_s.map(|v| seconds("stop_s", v)).transpose()?;
    if stop.is_some_and(|stop| stop <= start) {
        return Err(ctx.at(t, index, Some("stop_s"), "stop_s must come after start_s"));
    }
    let packet_size = s.packet_size.unwrap_or(crate::packet::MAX_PACKET_BYTES);
    if packet_size == 0 || packet_size > crate::packet::MAX_PACKET_BYTES {
        return Err(ctx.at(t, index, Some("packet_size"), "packet_size must lie in 1..=1500"));
    }
    Ok(SourceConfig {
        kind,
        class,
        packet_size,
        start,
        stop,
    })
}

/// Serializes `scenario` with every parameter explicit, so that parsing
/// the result yields an equal scenario.
pub fn emit(scenario: &Scenario) -> Result<String> {
    let bad = |m: &str| Error::Validation(format!("cannot emit scenario: {m}"));
    let us = scenario.duration.as_micros();
    if !us.is_multiple_of(1_000_000) {
        return Err(bad("duration is not a whole number of seconds"));
    }
    let ms = |t: SimTime| t.as_micros() as f64 / 1e3;
    let trace = match &scenario.trace {
        TraceSource::File(p) => TraceSection {
            kind: "file".into(),
            path: Some(p.to_str().ok_or_else(|| bad("trace path is not UTF-8"))?.to_string()),
            ..Default::default()
        },
        TraceSource::Synthetic(spec) => {
            let mut t = TraceSection {
                duration_s: Some(spec.duration_s),
                packet_size: Some(spec.packet_size_bytes),
                ..Default::default()
            };
            match spec.kind {
                SyntheticKind::Constant { rate_mbps } => {
                    t.kind = "constant".into();
                    t.rate_mbps = Some(rate_mbps);
                }
                SyntheticKind::Step {
                    rate_before_mbps,
                    rate_after_mbps,
                    step_at_s,
                } => {
                    t.kind = "step".into();
                    t.before_mbps = Some(rate_before_mbps);
                    t.after_mbps = Some(rate_after_mbps);
                    t.step_at_s = Some(step_at_s);
                }
                SyntheticKind::RandomWalk {
                    min_mbps,
                    max_mbps,
                    step_interval_ms,
                    seed,
                } => {
                    t.kind = "random-walk".into();
                    t.min_mbps = Some(min_mbps);
                    t.max_mbps = Some(max_mbps);
                    t.step_interval_ms = Some(step_interval_ms);
                    t.seed = Some(seed);
                }
            }
            t
        }
    };
    let classes = scenario
        .classes
        .iter()
        .map(|c| {
            let mut s = DisciplineSection {
                discipline: c.discipline.kind().as_str().into(),
                delay_requirement_ms: c.delay_requirement.map(ms),
                ..Default::default()
            };
            match c.discipline {
                DisciplineSpec::Bode {
                    bounded_delay,
                    protect_threshold,
                    cap,
                } => {
                    s.bounded_delay_ms = Some(ms(bounded_delay));
                    s.protect_threshold = Some(protect_threshold);
                    s.cap = Some(match cap {
                        BufferCap::Bytes(b) => CapValue::Bytes(b),
                        other => CapValue::Text(other.to_string()),
                    });
                }
                DisciplineSpec::CoDel {
                    target,
                    interval,
                    capacity_bytes,
                } => {
                    s.target_ms = Some(ms(target));
                    s.interval_ms = Some(ms(interval));
                    s.capacity_bytes = Some(capacity_bytes);
                }
                DisciplineSpec::Pie {
                    ref_delay,
                    alpha,
                    beta,
                    update_interval,
                    capacity_bytes,
                } => {
                    s.ref_delay_ms = Some(ms(ref_delay));
                    s.alpha = Some(alpha);
                    s.beta = Some(beta);
                    s.update_interval_ms = Some(ms(update_interval));
                    s.capacity_bytes = Some(capacity_bytes);
                }
                DisciplineSpec::TailDrop { capacity_bytes } | DisciplineSpec::HeadDrop { capacity_bytes } => {
                    s.capacity_bytes = Some(capacity_bytes);
                }
            }
            s
        })
        .collect();
    let sources = scenario
        .sources
        .iter()
        .map(|src| {
            let mut s = SourceSection {
                kind: src.kind.name().into(),
                class: Some(src.class),
                start_s: Some(src.start.as_micros() as f64 / 1e6),
                stop_s: src.stop.map(|t| t.as_micros() as f64 / 1e6),
                packet_size: Some(src.packet_size),
                ..Default::default()
            };
            match &src.kind {
                SourceKind::Cbr { rate_mbps } => s.rate_mbps = Some(*rate_mbps),
                SourceKind::Adaptive(p) => {
                    s.initial_mbps = Some(p.initial_mbps);
                    s.min_mbps = Some(p.min_mbps);
                    s.max_mbps = Some(p.max_mbps);
                    s.increase_kbps = Some(p.increase_step_kbps);
                    s.decrease_factor = Some(p.decrease_factor);
                    s.comfort_ms = p.comfort.map(ms);
                }
                SourceKind::Aimd(p) => {
                    s.initial_cwnd = Some(p.initial_cwnd);
                    s.rto_min_ms = Some(ms(p.rto_min));
                }
            }
            s
        })
        .collect();
    let file = ScenarioFile {
        name: Some(scenario.name.clone()),
        preset: None,
        delay_ms: Some(ms(scenario.delay_target)),
        compare: (!scenario.compare.is_empty())
            .then(|| scenario.compare.iter().map(|k| k.as_str().to_string()).collect()),
        trace,
        engine: EngineSection {
            duration_s: Some((us / 1_000_000) as i64),
            min_rtt_ms: Some(ms(scenario.min_rtt)),
            seed: Some(scenario.seed),
        },
        aqm: None,
        classes,
        sources,
        outputs: Some(OutputsSection {
            events: scenario.outputs.events,
            cdf: scenario.outputs.cdf,
        }),
    };
    toml::to_string(&file).map_err(|e| bad(&e.to_string()))
}

struct Preset {
    name: &'static str,
    text: &'static str,
}

const PRESETS: &[Preset] = &[
    Preset {
        name: "fig2-taildrop",
        text: include_str!("../presets/fig2-taildrop.toml"),
    },
    Preset {
        name: "fig2-bode",
        text: include_str!("../presets/fig2-bode.toml"),
    },
    Preset {
        name: "multiclass-bode",
        text: include_str!("../presets/multiclass-bode.toml"),
    },
    Preset {
        name: "multiclass-fifo",
        text: include_str!("../presets/multiclass-fifo.toml"),
    },
    Preset {
        name: "aqm-sweep",
        text: include_str!("../presets/aqm-sweep.toml"),
    },
];

/// Names of the bundled presets, in listing order.
pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.name)
}

/// One-line description: the preset file's leading comment.
pub fn preset_description(name: &str) -> Option<&'static str> {
    let p = PRESETS.iter().find(|p| p.name == name)?;
    p.text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .map(str::trim)
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.name == name).map(|p| p.text)
}

pub fn preset(name: &str) -> Result<Scenario> {
    let text = preset_text(name).ok_or_else(|| {
        Error::Usage(format!(
            "unknown preset `{name}` (available: {})",
            preset_names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    parse_str(text, &format!("preset {name}"), None, name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario> {
        parse_str(text, "test.toml", None, "test")
    }

    const MINIMAL: &str = r#"
[trace]
kind = "constant"
rate_mbps = 12.0

[[sources]]
kind = "cbr"
rate_mbps = 1.0
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse(MINIMAL).unwrap();
        assert_eq!(s.duration, SimTime::from_secs(300));
        assert_eq!(s.min_rtt, SimTime::from_millis(10));
        assert_eq!(s.delay_target, SimTime::from_millis(20));
        assert_eq!(
            s.classes[0].discipline,
            DisciplineSpec::defaults(DisciplineKind::Bode, SimTime::from_millis(20), SimTime::from_millis(10))
        );
        match &s.trace {
            TraceSource::Synthetic(spec) => assert_eq!(spec.duration_s, 300),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn interactive_preset_sets_d() {
        let s = parse(&format!("preset = \"interactive\"\n{MINIMAL}")).unwrap();
        assert_eq!(s.delay_target, SimTime::from_millis(100));
        match s.classes[0].discipline {
            DisciplineSpec::Bode { bounded_delay, .. } => assert_eq!(bounded_delay, SimTime::from_millis(100)),
            ref other => panic!("{other:?}"),
        }
    }

    #[test]
    fn codel_and_pie_defaults() {
        let s = parse(&format!("{MINIMAL}\n[aqm]\ndiscipline = \"codel\"\n")).unwrap();
        assert_eq!(
            s.classes[0].discipline,
            DisciplineSpec::CoDel {
                target: SimTime::from_millis(10),
                interval: SimTime::from_millis(50),
                capacity_bytes: 1_500_000
            }
        );
    }

    #[test]
    fn negative_duration_is_line_anchored() {
        let e = parse(&format!("{MINIMAL}\n[engine]\nduration_s = -5\n")).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("test.toml:11"), "{msg}");
        assert!(msg.contains("duration_s"), "{msg}");
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let e = parse(&format!("{MINIMAL}\n[engine]\nduraton_s = 5\n")).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("test.toml:11"), "{msg}");
    }

    #[test]
    fn inapplicable_key_rejected() {
        let text = MINIMAL.replace("rate_mbps = 1.0", "rate_mbps = 1.0\ninitial_cwnd = 4.0");
        let e = parse(&text).unwrap_err().to_string();
        assert!(e.contains("initial_cwnd") && e.contains("test.toml:9"), "{e}");
    }

    #[test]
    fn missing_trace_file() {
        let text = "[trace]\nkind = \"file\"\npath = \"/nonexistent/x.trace\"\n[[sources]]\nkind = \"cbr\"\nrate_mbps = 1.0\n";
        let e = parse(text).unwrap_err().to_string();
        assert!(e.contains("test.toml:3") && e.contains("not found"), "{e}");
    }

    #[test]
    fn unknown_class_rejected() {
        let text = MINIMAL.replace("kind = \"cbr\"", "kind = \"cbr\"\nclass = 2");
        assert!(parse(&text).unwrap_err().to_string().contains("class 2"));
    }

    #[test]
    fn all_presets_parse_and_round_trip() {
        for name in preset_names() {
            let s = preset(name).unwrap();
            assert!(preset_description(name).is_some(), "{name}");
            let text = emit(&s).unwrap();
            assert_eq!(parse(&text).unwrap(), s, "{name}");
        }
    }

    #[test]
    fn cap_values() {
        let text = format!("{MINIMAL}\n[aqm]\ndiscipline = \"bode\"\ncap = \"auto/10\"\n");
        match parse(&text).unwrap().classes[0].discipline {
            DisciplineSpec::Bode { cap, .. } => assert_eq!(cap, BufferCap::Auto { num: 1, den: 10 }),
            ref other => panic!("{other:?}"),
        }
        let text = format!("{MINIMAL}\n[aqm]\ndiscipline = \"bode\"\ncap = 120000\n");
        match parse(&text).unwrap().classes[0].discipline {
            DisciplineSpec::Bode { cap, .. } => assert_eq!(cap, BufferCap::Bytes(120_000)),
            ref other => panic!("{other:?}"),
        }
    }
}
