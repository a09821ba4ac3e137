//! C interface to the bodesim simulator.
//!
//! Every function returns a [`BodesimStatus`] (or a plain value where it
//! cannot fail) and never unwinds across the boundary. On failure the
//! thread's last error message is available through
//! [`bodesim_last_error_length`] and [`bodesim_last_error_message`].
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free` function. Times cross the boundary as
//! microseconds.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use bodesim::aqm::{compute_buffer_requirement, Bode, BodeParams, QueueDiscipline};
use bodesim::metrics::{write_summary_csv, ClassSummary};
use bodesim::packet::{DropReason, Packet};
use bodesim::scenario::{parse_scenario, parse_str, preset};
use bodesim::{Error, Scenario, SimReport, SimTime};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BodesimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Trace = 4,
    Scenario = 5,
    Validation = 6,
    Usage = 7,
    Runtime = 8,
    OutOfRange = 9,
    Panic = 99,
}

/// A parsed, validated scenario.
pub struct BodesimScenario(Scenario);

/// The outcome of one simulation run.
pub struct BodesimReport(SimReport);

/// A standalone BoDe queue driven directly by the caller.
pub struct BodesimBodeQueue {
    bode: Bode,
    next_id: u64,
    now: SimTime,
}

/// Headline metrics for one class or for all classes together.
/// Undefined delay metrics and power are NaN; `requirement_met` is -1 when
/// the class has no delay requirement.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BodesimSummary {
    pub generated: u64,
    pub offered: u64,
    pub served: u64,
    pub dropped: u64,
    pub retransmissions: u64,
    pub drops_tail_overflow: u64,
    pub drops_head_overflow: u64,
    pub drops_expired_at_egress: u64,
    pub drops_codel: u64,
    pub drops_probabilistic_early: u64,
    pub throughput_mbps: f64,
    pub p99_queuing_delay_ms: f64,
    pub peak_queuing_delay_ms: f64,
    pub mean_queuing_delay_ms: f64,
    pub power: f64,
    pub drop_rate: f64,
    pub retransmission_fraction: f64,
    pub requirement_met: i32,
}

impl From<&ClassSummary> for BodesimSummary {
    fn from(c: &ClassSummary) -> Self {
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        BodesimSummary {
            generated: c.generated,
            offered: c.offered,
            served: c.served,
            dropped: c.dropped,
            retransmissions: c.retransmissions,
            drops_tail_overflow: c.drops(DropReason::TailOverflow),
            drops_head_overflow: c.drops(DropReason::HeadOverflow),
            drops_expired_at_egress: c.drops(DropReason::ExpiredAtEgress),
            drops_codel: c.drops(DropReason::CoDelDrop),
            drops_probabilistic_early: c.drops(DropReason::ProbabilisticEarly),
            throughput_mbps: c.throughput_mbps,
            p99_queuing_delay_ms: nan(c.p99_queuing_delay_ms),
            peak_queuing_delay_ms: nan(c.peak_queuing_delay_ms),
            mean_queuing_delay_ms: nan(c.mean_queuing_delay_ms),
            power: nan(c.power),
            drop_rate: c.drop_rate,
            retransmission_fraction: c.retransmission_fraction,
            requirement_met: c.requirement_met.map_or(-1, i32::from),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let mut bytes = message.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let msg = CString::new(bytes).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(BodesimStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => BodesimStatus::Io,
            Error::TraceParse { .. } | Error::TraceValidation(_) => BodesimStatus::Trace,
            Error::Scenario { .. } => BodesimStatus::Scenario,
            Error::Validation(_) | Error::UnknownClass { .. } => BodesimStatus::Validation,
            Error::Usage(_) => BodesimStatus::Usage,
            Error::NegativeSojourn { .. } | Error::Invariant { .. } => BodesimStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(BodesimStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, translating errors and panics into a status and the
/// thread's last error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BodesimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_last_error();
            BodesimStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            BodesimStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(BodesimStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn mut_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

fn write_to(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure(BodesimStatus::Io, format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    f(&mut w).and_then(|_| w.flush()).map_err(io)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bodesim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Size in bytes, including the terminating NUL, of the calling thread's
/// last error message, or 0 when the last call succeeded.
#[no_mangle]
pub extern "C" fn bodesim_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |m| m.as_bytes_with_nul().len()))
}

/// Copies the last error message into `buf`. Returns the number of bytes
/// written excluding the NUL, 0 when there is no error, or -1 when `buf`
/// is null or shorter than [`bodesim_last_error_length`].
///
/// # Safety
/// `buf` must be valid for writes of `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn bodesim_last_error_message(buf: *mut c_char, len: usize) -> isize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(m) => {
            let bytes = m.as_bytes_with_nul();
            if buf.is_null() || len < bytes.len() {
                return -1;
            }
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
            (bytes.len() - 1) as isize
        }
    })
}

/// Parses scenario TOML held in memory. Relative trace paths resolve
/// against the current directory.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bodesim_scenario_from_toml(
    toml: *const c_char,
    out: *mut *mut BodesimScenario,
) -> BodesimStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        let s = parse_str(text, "<string>", Some(Path::new(".")), "scenario")?;
        put(out, boxed(BodesimScenario(s)), "out")
    })
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bodesim_scenario_from_file(
    path: *const c_char,
    out: *mut *mut BodesimScenario,
) -> BodesimStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let s = parse_scenario(Path::new(path))?;
        put(out, boxed(BodesimScenario(s)), "out")
    })
}

/// Loads a bundled scenario by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bodesim_scenario_from_preset(
    name: *const c_char,
    out: *mut *mut BodesimScenario,
) -> BodesimStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        put(out, boxed(BodesimScenario(preset(name)?)), "out")
    })
}

/// Replaces the scenario's random seed.
///
/// # Safety
/// `scenario` must come from a `bodesim_scenario_from_*` call.
#[no_mangle]
pub unsafe extern "C" fn bodesim_scenario_set_seed(scenario: *mut BodesimScenario, seed: u64) -> BodesimStatus {
    guard(|| {
        mut_arg(scenario, "scenario")?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or come from a `bodesim_scenario_from_*` call,
/// and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bodesim_scenario_free(scenario: *mut BodesimScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the scenario to completion.
///
/// # Safety
/// `scenario` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bodesim_run(scenario: *const BodesimScenario, out: *mut *mut BodesimReport) -> BodesimStatus {
    guard(|| {
        let s = ref_arg(scenario, "scenario")?;
        let report = bodesim::run(&s.0)?;
        put(out, boxed(BodesimReport(report)), "out")
    })
}

/// Number of traffic classes in the report.
///
/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn bodesim_report_class_count(report: *const BodesimReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.summary.per_class.len())
}

/// Summary over all classes.
///
/// # Safety
/// `report` must be a live report handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bodesim_report_overall(report: *const BodesimReport, out: *mut BodesimSummary) -> BodesimStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        put(out, BodesimSummary::from(&r.0.summary.overall), "out")
    })
}

/// Summary for one class.
///
/// # Safety
/// `report` must be a live report handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bodesim_report_class_summary(
    report: *const BodesimReport,
    class: usize,
    out: *mut BodesimSummary,
) -> BodesimStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        let c = r.0.summary.per_class.get(class).ok_or_else(|| {
            Failure(
                BodesimStatus::OutOfRange,
                format!("class {class} out of range ({} classes)", r.0.summary.per_class.len()),
            )
        })?;
        put(out, BodesimSummary::from(c), "out")
    })
}

/// Writes the summary CSV (overall row plus one row per class).
///
/// # Safety
/// `report` must be a live report handle and `path` a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn bodesim_report_write_summary_csv(
    report: *const BodesimReport,
    path: *const c_char,
) -> BodesimStatus {
    guard(|| {
        let r = &ref_arg(report, "report")?.0;
        let path = str_arg(path, "path")?;
        write_to(Path::new(path), |w| {
            write_summary_csv(w, &[(&r.scenario, &r.discipline, &r.summary)])
        })
    })
}

/// Writes the per-packet event log CSV.
///
/// # Safety
/// `report` must be a live report handle and `path` a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn bodesim_report_write_events_csv(
    report: *const BodesimReport,
    path: *const c_char,
) -> BodesimStatus {
    guard(|| {
        let r = &ref_arg(report, "report")?.0;
        let path = str_arg(path, "path")?;
        write_to(Path::new(path), |w| r.log.write_csv(w))
    })
}

/// # Safety
/// `report` must be null or come from [`bodesim_run`], and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bodesim_report_free(report: *mut BodesimReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Packets needed to hold `bounded_delay_us` worth of traffic at
/// `max_rate_bps`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bodesim_buffer_requirement(
    max_rate_bps: f64,
    packet_size_bytes: u32,
    bounded_delay_us: u64,
    out: *mut u64,
) -> BodesimStatus {
    guard(|| {
        let n = compute_buffer_requirement(max_rate_bps, packet_size_bytes, SimTime::from_micros(bounded_delay_us))?;
        put(out, n, "out")
    })
}

/// Creates a BoDe queue. `cap_bytes` of 0 means unbounded.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bodesim_bode_queue_new(
    bounded_delay_us: u64,
    protect_threshold: u32,
    cap_bytes: u64,
    out: *mut *mut BodesimBodeQueue,
) -> BodesimStatus {
    guard(|| {
        if bounded_delay_us == 0 || protect_threshold == 0 {
            return Err(Failure(
                BodesimStatus::Validation,
                "bounded delay and protect threshold must be positive".into(),
            ));
        }
        let q = BodesimBodeQueue {
            bode: Bode::new(BodeParams {
                bounded_delay: SimTime::from_micros(bounded_delay_us),
                protect_threshold: protect_threshold as usize,
                cap_bytes: (cap_bytes > 0).then_some(cap_bytes),
            }),
            next_id: 0,
            now: SimTime::ZERO,
        };
        put(out, boxed(q), "out")
    })
}

fn advance(q: &mut BodesimBodeQueue, now_us: u64) -> Result<SimTime, Failure> {
    let now = SimTime::from_micros(now_us);
    if now < q.now {
        return Err(Failure(
            BodesimStatus::OutOfRange,
            format!("time went backwards: {now} after {}", q.now),
        ));
    }
    q.now = now;
    Ok(now)
}

/// Offers a packet at `now_us`. Writes its id to `out_id` and whether it
/// was admitted (1) or rejected by the byte cap (0) to `out_accepted`.
/// Times must not decrease across calls on one queue.
///
/// # Safety
/// `queue` must be a live queue handle; `out_id` and `out_accepted` must
/// be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bodesim_bode_queue_enqueue(
    queue: *mut BodesimBodeQueue,
    size_bytes: u32,
    now_us: u64,
    out_id: *mut u64,
    out_accepted: *mut i32,
) -> BodesimStatus {
    guard(|| {
        let q = mut_arg(queue, "queue")?;
        if out_id.is_null() || out_accepted.is_null() {
            return Err(null("output pointer"));
        }
        if size_bytes == 0 || size_bytes > bodesim::packet::MAX_PACKET_BYTES {
            return Err(Failure(BodesimStatus::Validation, format!("packet size {size_bytes} outside 1..=1500")));
        }
        let now = advance(q, now_us)?;
        let id = q.next_id;
        q.next_id += 1;
        let r = q.bode.bode_enqueue(Packet::new(id, 0, size_bytes, now), now);
        put(out_id, id, "out_id")?;
        put(out_accepted, i32::from(r.is_accepted()), "out_accepted")
    })
}

/// Runs one delivery opportunity at `now_us`. Writes the served packet's
/// id to `out_served` (`UINT64_MAX` when the queue was empty), the number
/// of packets dropped as expired to `out_drop_count`, and the first
/// `drop_capacity` of their ids to `drop_ids` in drop order.
///
/// # Safety
/// `queue` must be a live queue handle; `out_served` and `out_drop_count`
/// must be valid pointers; `drop_ids` must be valid for `drop_capacity`
/// writes or null when `drop_capacity` is 0.
#[no_mangle]
pub unsafe extern "C" fn bodesim_bode_queue_dequeue(
    queue: *mut BodesimBodeQueue,
    now_us: u64,
    out_served: *mut u64,
    drop_ids: *mut u64,
    drop_capacity: usize,
    out_drop_count: *mut usize,
) -> BodesimStatus {
    guard(|| {
        let q = mut_arg(queue, "queue")?;
        if out_served.is_null() || out_drop_count.is_null() || (drop_ids.is_null() && drop_capacity > 0) {
            return Err(null("output pointer"));
        }
        let now = advance(q, now_us)?;
        let r = q.bode.bode_dequeue(now);
        for (i, d) in r.drops.iter().take(drop_capacity).enumerate() {
            drop_ids.add(i).write(d.packet.id);
        }
        put(out_served, r.served.map_or(u64::MAX, |p| p.id), "out_served")?;
        put(out_drop_count, r.drops.len(), "out_drop_count")
    })
}

/// Packets currently queued, or 0 for a null handle.
///
/// # Safety
/// `queue` must be null or a live queue handle.
#[no_mangle]
pub unsafe extern "C" fn bodesim_bode_queue_len(queue: *const BodesimBodeQueue) -> usize {
    queue.as_ref().map_or(0, |q| q.bode.len())
}

/// # Safety
/// `queue` must be null or come from [`bodesim_bode_queue_new`], and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bodesim_bode_queue_free(queue: *mut BodesimBodeQueue) {
    if !queue.is_null() {
        drop(Box::from_raw(queue));
    }
}
