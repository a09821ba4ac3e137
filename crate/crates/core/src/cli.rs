//! Command-line front end: `run`, `compare`, `gen-trace` and `presets`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::aqm::DisciplineKind;
use crate::engine::{run, Scenario, SimReport};
use crate::error::{Error, Result};
use crate::metrics::{self, Summary};
use crate::scenario::{parse_scenario, preset, preset_description, preset_names, preset_text};
use crate::trace::{generate_trace, SyntheticKind, SyntheticTraceSpec};

#[derive(Debug, Parser)]
#[command(name = "bodesim", version, about = "Trace-driven bottleneck simulator for delay-bounding AQM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write summary.csv (plus events.csv / cdf.csv
    /// when the scenario asks for them).
    Run(RunArgs),
    /// Run every scenario under every discipline and tabulate results
    /// normalized to BoDe.
    Compare(CompareArgs),
    /// Write a synthetic trace file.
    GenTrace(GenTraceArgs),
    /// Inspect the bundled scenarios.
    Presets {
        #[command(subcommand)]
        command: PresetsCommand,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub scenario: Option<PathBuf>,
    /// Bundled scenario name (see `presets list`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Runs every class under this discipline instead.
    #[arg(long)]
    pub discipline: Option<DisciplineKind>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Scenario files (repeatable).
    #[arg(long)]
    pub scenario: Vec<PathBuf>,
    /// Bundled scenarios (repeatable).
    #[arg(long)]
    pub preset: Vec<String>,
    /// Disciplines to compare (repeatable). Defaults to the scenarios'
    /// own `compare` list.
    #[arg(long)]
    pub discipline: Vec<DisciplineKind>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    #[command(subcommand)]
    pub kind: TraceKindArgs,
    /// Destination file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 60)]
    pub duration_s: u64,
    #[arg(long, global = true, default_value_t = 1500)]
    pub packet_size: u32,
}

#[derive(Debug, Subcommand)]
pub enum TraceKindArgs {
    Constant {
        #[arg(long)]
        rate_mbps: f64,
    },
    Step {
        #[arg(long)]
        before_mbps: f64,
        #[arg(long)]
        after_mbps: f64,
        #[arg(long)]
        step_at_s: u64,
    },
    RandomWalk {
        #[arg(long)]
        min_mbps: f64,
        #[arg(long)]
        max_mbps: f64,
        #[arg(long, default_value_t = crate::scenario::DEFAULT_WALK_STEP_MS)]
        step_interval_ms: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum PresetsCommand {
    List,
    /// Print a preset's TOML.
    Show { name: String },
}

/// Entry point used by the binary. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) => 2,
                _ => 1,
            }
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => {
            let mut scenario = load(a.scenario.as_deref(), a.preset.as_deref())?;
            if let Some(seed) = a.seed {
                scenario.seed = seed;
            }
            if let Some(kind) = a.discipline {
                scenario = scenario.with_discipline(kind);
            }
            let report = cmd_run(&scenario, &a.out)?;
            if !a.quiet {
                print_summary(&report);
            }
            Ok(())
        }
        Command::Compare(a) => {
            let mut scenarios = Vec::new();
            for p in &a.scenario {
                scenarios.push(parse_scenario(p)?);
            }
            for name in &a.preset {
                scenarios.push(preset(name)?);
            }
            if let Some(seed) = a.seed {
                for s in &mut scenarios {
                    s.seed = seed;
                }
            }
            let table = cmd_compare(&scenarios, &a.discipline, &a.out)?;
            if !a.quiet {
                print!("{}", table.render());
            }
            Ok(())
        }
        Command::GenTrace(a) => {
            let out = a
                .out
                .ok_or_else(|| Error::Usage("gen-trace needs --out".into()))?;
            let kind = match a.kind {
                TraceKindArgs::Constant { rate_mbps } => SyntheticKind::Constant { rate_mbps },
                TraceKindArgs::Step {
                    before_mbps,
                    after_mbps,
                    step_at_s,
                } => SyntheticKind::Step {
                    rate_before_mbps: before_mbps,
                    rate_after_mbps: after_mbps,
                    step_at_s,
                },
                TraceKindArgs::RandomWalk {
                    min_mbps,
                    max_mbps,
                    step_interval_ms,
                    seed,
                } => SyntheticKind::RandomWalk {
                    min_mbps,
                    max_mbps,
                    step_interval_ms,
                    seed,
                },
            };
            let spec = SyntheticTraceSpec {
                kind,
                duration_s: a.duration_s,
                packet_size_bytes: a.packet_size,
            };
            cmd_gen_trace(&spec, &out)
        }
        Command::Presets { command } => {
            match command {
                PresetsCommand::List => {
                    for name in preset_names() {
                        println!("{name:<16} {}", preset_description(name).unwrap_or(""));
                    }
                }
                PresetsCommand::Show { name } => {
                    let text = preset_text(&name)
                        .ok_or_else(|| Error::Usage(format!("unknown preset `{name}`")))?;
                    print!("{text}");
                }
            }
            Ok(())
        }
    }
}

fn load(path: Option<&Path>, preset_name: Option<&str>) -> Result<Scenario> {
    match (path, preset_name) {
        (Some(p), None) => parse_scenario(p),
        (None, Some(n)) => preset(n),
        _ => Err(Error::Usage("give exactly one of --scenario or --preset".into())),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Runs `scenario` and writes its outputs into `out_dir`.
pub fn cmd_run(scenario: &Scenario, out_dir: &Path) -> Result<SimReport> {
    let report = run(scenario)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_file(&out_dir.join("summary.csv"), |w| {
        metrics::write_summary_csv(w, &[(&report.scenario, &report.discipline, &report.summary)])
    })?;
    if scenario.outputs.events {
        write_file(&out_dir.join("events.csv"), |w| report.log.write_csv(w))?;
    }
    if scenario.outputs.cdf {
        let delays = metrics::queuing_delays_ms(&report.log);
        if !delays.is_empty() {
            metrics::export_cdf(&delays, &out_dir.join("cdf.csv"))?;
        }
        let e2e = metrics::e2e_delay_with_retx(&report.log);
        if !e2e.samples_ms.is_empty() {
            metrics::export_cdf(&e2e.samples_ms, &out_dir.join("e2e_cdf.csv"))?;
        }
    }
    Ok(report)
}

fn print_summary(r: &SimReport) {
    let s = &r.summary;
    println!("{} ({})", r.scenario, r.discipline);
    println!(
        "{:<6} {:>14} {:>12} {:>12} {:>10} {:>10}",
        "class", "throughput", "p99 delay", "peak delay", "power", "drop rate"
    );
    let show = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| metrics::NA.into());
    let rows = std::iter::once(&s.overall).chain(s.per_class.iter().filter(|_| s.per_class.len() > 1));
    for c in rows {
        println!(
            "{:<6} {:>9.3} Mbps {:>9} ms {:>9} ms {:>10} {:>10.4}",
            c.class.map(|k| k.to_string()).unwrap_or_else(|| "all".into()),
            c.throughput_mbps,
            show(c.p99_queuing_delay_ms),
            show(c.peak_queuing_delay_ms),
            show(c.power),
            c.drop_rate,
        );
    }
}

/// One (scenario, discipline) cell of a comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub scenario: String,
    pub discipline: DisciplineKind,
    pub summary: Summary,
    pub norm_throughput: Option<f64>,
    pub norm_p99: Option<f64>,
    pub norm_power: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareMean {
    pub discipline: DisciplineKind,
    pub norm_throughput: Option<f64>,
    pub norm_p99: Option<f64>,
    pub norm_power: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
    /// Arithmetic mean of the normalized metrics across scenarios.
    pub means: Vec<CompareMean>,
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b != 0.0 => Some(a / b),
        _ => None,
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Disciplines to compare: the explicit list, or else the scenarios' own.
pub fn resolve_disciplines(scenarios: &[Scenario], explicit: &[DisciplineKind]) -> Result<Vec<DisciplineKind>> {
    let mut list: Vec<DisciplineKind> = if explicit.is_empty() {
        let mut l = Vec::new();
        for s in scenarios {
            for k in &s.compare {
                if !l.contains(k) {
                    l.push(*k);
                }
            }
        }
        l
    } else {
        explicit.to_vec()
    };
    list.dedup();
    if list.is_empty() {
        return Err(Error::Usage("compare needs disciplines (--discipline, repeatable)".into()));
    }
    if list.len() < 2 {
        return Err(Error::Usage("compare needs at least two disciplines".into()));
    }
    if !list.contains(&DisciplineKind::Bode) {
        return Err(Error::Usage("compare normalizes to bode, so bode must be among the disciplines".into()));
    }
    Ok(list)
}

/// Runs the cross product of `scenarios` and disciplines in parallel and
/// writes `summary.csv`, `compare.csv` and `compare_mean.csv` to `out_dir`.
pub fn cmd_compare(scenarios: &[Scenario], disciplines: &[DisciplineKind], out_dir: &Path) -> Result<CompareTable> {
    if scenarios.is_empty() {
        return Err(Error::Usage("compare needs at least one scenario".into()));
    }
    let kinds = resolve_disciplines(scenarios, disciplines)?;
    let jobs: Vec<(usize, DisciplineKind)> = (0..scenarios.len())
        .flat_map(|i| kinds.iter().map(move |k| (i, *k)))
        .collect();
    let reports: Vec<SimReport> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let s = scenarios[i].with_discipline(k);
            run(&s).map_err(|e| Error::Validation(format!("scenario `{}` under {k}: {e}", s.name)))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(jobs.len());
    for (i, chunk) in reports.chunks(kinds.len()).enumerate() {
        let bode = &chunk[kinds.iter().position(|k| *k == DisciplineKind::Bode).expect("checked")].summary.overall;
        for (k, r) in kinds.iter().zip(chunk) {
            let o = &r.summary.overall;
            rows.push(CompareRow {
                scenario: scenarios[i].name.clone(),
                discipline: *k,
                summary: r.summary.clone(),
                norm_throughput: ratio(Some(o.throughput_mbps), Some(bode.throughput_mbps)),
                norm_p99: ratio(o.p99_queuing_delay_ms, bode.p99_queuing_delay_ms),
                norm_power: ratio(o.power, bode.power),
            });
        }
    }
    let means = kinds
        .iter()
        .map(|k| {
            let of = |f: fn(&CompareRow) -> Option<f64>| mean(rows.iter().filter(|r| r.discipline == *k).map(f));
            CompareMean {
                discipline: *k,
                norm_throughput: of(|r| r.norm_throughput),
                norm_p99: of(|r| r.norm_p99),
                norm_power: of(|r| r.norm_power),
            }
        })
        .collect();
    let table = CompareTable { rows, means };

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let runs: Vec<(&str, &str, &Summary)> = reports
        .iter()
        .map(|r| (r.scenario.as_str(), r.discipline.as_str(), &r.summary))
        .collect();
    write_file(&out_dir.join("summary.csv"), |w| metrics::write_summary_csv(w, &runs))?;
    write_file(&out_dir.join("compare.csv"), |w| table.write_csv(w))?;
    write_file(&out_dir.join("compare_mean.csv"), |w| table.write_mean_csv(w))?;
    Ok(table)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| metrics::NA.into())
}

impl CompareTable {
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "scenario,discipline,throughput_mbps,p99_queuing_delay_ms,power,drop_rate,norm_throughput,norm_p99_queuing_delay,norm_power"
        )?;
        for r in &self.rows {
            let o = &r.summary.overall;
            writeln!(
                w,
                "{},{},{:.6},{},{},{:.6},{},{},{}",
                r.scenario,
                r.discipline,
                o.throughput_mbps,
                cell(o.p99_queuing_delay_ms),
                cell(o.power),
                o.drop_rate,
                cell(r.norm_throughput),
                cell(r.norm_p99),
                cell(r.norm_power)
            )?;
        }
        Ok(())
    }

    pub fn write_mean_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "discipline,norm_throughput,norm_p99_queuing_delay,norm_power")?;
        for m in &self.means {
            writeln!(
                w,
                "{},{},{},{}",
                m.discipline,
                cell(m.norm_throughput),
                cell(m.norm_p99),
                cell(m.norm_power)
            )?;
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let show = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| metrics::NA.into());
        s += &format!(
            "{:<20} {:<9} {:>11} {:>11} {:>9} {:>9} {:>9} {:>9}\n",
            "scenario", "aqm", "tput Mbps", "p99 ms", "power", "n.tput", "n.p99", "n.power"
        );
        for r in &self.rows {
            let o = &r.summary.overall;
            s += &format!(
                "{:<20} {:<9} {:>11.3} {:>11} {:>9} {:>9} {:>9} {:>9}\n",
                r.scenario,
                r.discipline.as_str(),
                o.throughput_mbps,
                show(o.p99_queuing_delay_ms),
                show(o.power),
                show(r.norm_throughput),
                show(r.norm_p99),
                show(r.norm_power)
            );
        }
        s += "\nmean normalized to bode\n";
        for m in &self.means {
            s += &format!(
                "{:<9} tput {:>8}  p99 {:>8}  power {:>8}\n",
                m.discipline.as_str(),
                show(m.norm_throughput),
                show(m.norm_p99),
                show(m.norm_power)
            );
        }
        s
    }
}

/// Generates a synthetic trace and writes it to `out`. Invalid parameters
/// are usage errors.
pub fn cmd_gen_trace(spec: &SyntheticTraceSpec, out: &Path) -> Result<()> {
    let trace = generate_trace(spec).map_err(|e| match e {
        Error::TraceValidation(m) => Error::Usage(m),
        other => other,
    })?;
    trace.write_to_path(out)
}
