use std::ffi::{CStr, CString};
use std::ptr;

use bodesim_ffi::*;

fn last_error() -> String {
    let len = bodesim_last_error_length();
    if len == 0 {
        return String::new();
    }
    let mut buf = vec![0 as std::ffi::c_char; len];
    let written = unsafe { bodesim_last_error_message(buf.as_mut_ptr(), len) };
    assert_eq!(written, len as isize - 1);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(bodesim_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn preset_run_and_summaries() {
    let mut scenario = ptr::null_mut();
    let mut report = ptr::null_mut();
    unsafe {
        assert_eq!(bodesim_scenario_from_preset(c("multiclass-bode").as_ptr(), &mut scenario), BodesimStatus::Ok);
        assert_eq!(bodesim_run(scenario, &mut report), BodesimStatus::Ok);
        assert_eq!(bodesim_report_class_count(report), 3);
        let mut overall = BodesimSummary::default();
        assert_eq!(bodesim_report_overall(report, &mut overall), BodesimStatus::Ok);
        let mut served = 0;
        for class in 0..3 {
            let mut s = BodesimSummary::default();
            assert_eq!(bodesim_report_class_summary(report, class, &mut s), BodesimStatus::Ok);
            served += s.served;
            if class < 2 {
                assert_eq!(s.requirement_met, 1);
            } else {
                assert_eq!(s.requirement_met, -1);
            }
        }
        assert_eq!(served, overall.served);
        let mut s = BodesimSummary::default();
        assert_eq!(bodesim_report_class_summary(report, 3, &mut s), BodesimStatus::OutOfRange);
        assert!(last_error().contains("class 3"));

        let dir = tempfile::tempdir().unwrap();
        let events = dir.path().join("events.csv");
        let p = c(events.to_str().unwrap());
        assert_eq!(bodesim_report_write_events_csv(report, p.as_ptr()), BodesimStatus::Ok);
        assert_eq!(last_error(), "");
        let text = std::fs::read_to_string(&events).unwrap();
        assert_eq!(text.lines().count() as u64, overall.generated + 1);

        bodesim_report_free(report);
        bodesim_scenario_free(scenario);
    }
}

#[test]
fn same_seed_gives_the_same_summary() {
    let toml = c(
        "[trace]\nkind = \"random-walk\"\nmin_mbps = 1.0\nmax_mbps = 10.0\n\n[engine]\nduration_s = 10\n\n[[sources]]\nkind = \"aimd\"\n",
    );
    let run = |seed: u64| unsafe {
        let mut s = ptr::null_mut();
        let mut r = ptr::null_mut();
        assert_eq!(bodesim_scenario_from_toml(toml.as_ptr(), &mut s), BodesimStatus::Ok);
        assert_eq!(bodesim_scenario_set_seed(s, seed), BodesimStatus::Ok);
        assert_eq!(bodesim_run(s, &mut r), BodesimStatus::Ok);
        let mut out = BodesimSummary::default();
        assert_eq!(bodesim_report_overall(r, &mut out), BodesimStatus::Ok);
        bodesim_report_free(r);
        bodesim_scenario_free(s);
        out
    };
    assert_eq!(run(3), run(3));
}

#[test]
fn bad_input_maps_to_status_codes() {
    let mut s = ptr::null_mut();
    unsafe {
        let bad = c("[engine]\nduration_s = -1\n");
        assert_eq!(bodesim_scenario_from_toml(bad.as_ptr(), &mut s), BodesimStatus::Scenario);
        assert!(s.is_null());
        assert!(last_error().contains("<string>:"), "{}", last_error());

        assert_eq!(bodesim_scenario_from_toml(ptr::null(), &mut s), BodesimStatus::NullPointer);
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(bodesim_scenario_from_toml(invalid.as_ptr().cast(), &mut s), BodesimStatus::InvalidUtf8);
        assert_eq!(bodesim_scenario_from_preset(c("nope").as_ptr(), &mut s), BodesimStatus::Usage);
        assert_eq!(
            bodesim_scenario_from_file(c("/nonexistent/x.toml").as_ptr(), &mut s),
            BodesimStatus::Io
        );
        assert_eq!(bodesim_run(ptr::null(), ptr::null_mut()), BodesimStatus::NullPointer);

        let mut n = 0;
        assert_eq!(bodesim_buffer_requirement(96e6, 1500, 10_000, &mut n), BodesimStatus::Ok);
        assert_eq!(n, 80);
        assert_eq!(bodesim_buffer_requirement(-1.0, 1500, 10_000, &mut n), BodesimStatus::Validation);

        let mut small = [0 as std::ffi::c_char; 2];
        assert_eq!(bodesim_last_error_message(small.as_mut_ptr(), small.len()), -1);

        bodesim_scenario_free(ptr::null_mut());
        bodesim_report_free(ptr::null_mut());
        bodesim_bode_queue_free(ptr::null_mut());
    }
}

/// Queue [A(150 ms), B(50 ms), C(10 ms), D(5 ms)] with D = 100 ms drops A
/// and serves B.
#[test]
fn bode_queue_drops_expired_heads() {
    let mut q = ptr::null_mut();
    unsafe {
        assert_eq!(bodesim_bode_queue_new(100_000, 3, 0, &mut q), BodesimStatus::Ok);
        let mut id = 0;
        let mut accepted = 0;
        for t in [0u64, 100_000, 140_000, 145_000] {
            assert_eq!(bodesim_bode_queue_enqueue(q, 1500, t, &mut id, &mut accepted), BodesimStatus::Ok);
            assert_eq!(accepted, 1);
        }
        let mut served = 0;
        let mut drops = [0u64; 1];
        let mut count = 0;
        assert_eq!(
            bodesim_bode_queue_dequeue(q, 150_000, &mut served, drops.as_mut_ptr(), 1, &mut count),
            BodesimStatus::Ok
        );
        assert_eq!((served, count, drops[0]), (1, 1, 0));
        assert_eq!(bodesim_bode_queue_len(q), 2);

        assert_eq!(
            bodesim_bode_queue_enqueue(q, 1500, 10, &mut id, &mut accepted),
            BodesimStatus::OutOfRange
        );
        assert_eq!(bodesim_bode_queue_dequeue(q, 150_000, &mut served, ptr::null_mut(), 0, &mut count), BodesimStatus::Ok);
        assert_eq!(bodesim_bode_queue_dequeue(q, 150_000, &mut served, ptr::null_mut(), 0, &mut count), BodesimStatus::Ok);
        assert_eq!(bodesim_bode_queue_dequeue(q, 150_000, &mut served, ptr::null_mut(), 0, &mut count), BodesimStatus::Ok);
        assert_eq!((served, count), (u64::MAX, 0));
        bodesim_bode_queue_free(q);
    }
}

#[test]
fn bode_queue_cap_rejects_overflow() {
    let mut q = ptr::null_mut();
    unsafe {
        assert_eq!(bodesim_bode_queue_new(20_000, 3, 3000, &mut q), BodesimStatus::Ok);
        let mut id = 0;
        let mut accepted = 0;
        let mut admitted = Vec::new();
        for _ in 0..3 {
            assert_eq!(bodesim_bode_queue_enqueue(q, 1500, 0, &mut id, &mut accepted), BodesimStatus::Ok);
            admitted.push(accepted);
        }
        assert_eq!(admitted, [1, 1, 0]);
        assert_eq!(bodesim_bode_queue_len(q), 2);
        assert_eq!(bodesim_bode_queue_new(0, 3, 0, &mut q), BodesimStatus::Validation);
        bodesim_bode_queue_free(q);
    }
}
