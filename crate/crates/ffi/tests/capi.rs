use std::ffi::{CStr, CString};
use std::ptr;

use lovelock_ffi::*;

const PFAFFIAN: &str = r#"
name = "capi"
suite = "pfaffian"
mbar = 2
signature = [2, 2]
seed = 4
points = 3

[metric]
amplitude = 0.1
"#;

fn parse(text: &str, overrides: &[&str]) -> (LovelockStatus, *mut LovelockScenario) {
    let toml = CString::new(text).unwrap();
    let owned: Vec<CString> = overrides.iter().map(|s| CString::new(*s).unwrap()).collect();
    let ptrs: Vec<*const std::ffi::c_char> = owned.iter().map(|c| c.as_ptr()).collect();
    let mut s = ptr::null_mut();
    let status = unsafe { lovelock_scenario_parse(toml.as_ptr(), ptrs.as_ptr(), ptrs.len(), &mut s) };
    (status, s)
}

fn last_error() -> String {
    let p = lovelock_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn run_and_inspect_report() {
    let (status, s) = parse(PFAFFIAN, &[]);
    assert_eq!(status, LovelockStatus::Ok);
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(lovelock_run(s, &mut r), LovelockStatus::Ok);
        assert!(lovelock_report_pass(r));
        assert_eq!(lovelock_report_len(r), 3);
        let (mut v, mut pass) = (0.0, false);
        assert_eq!(lovelock_report_row(r, 2, &mut v, &mut pass), LovelockStatus::Ok);
        assert!(pass && v < 1e-10);
        assert_eq!(lovelock_report_row(r, 3, &mut v, &mut pass), LovelockStatus::OutOfRange);
        let mut json = ptr::null_mut();
        assert_eq!(lovelock_report_json(r, &mut json), LovelockStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_string();
        lovelock_string_free(json);
        assert!(text.contains("\"suite\":\"pfaffian\""));
        lovelock_report_free(r);
        lovelock_scenario_free(s);
    }
}

#[test]
fn metric_handle_evaluates_top_forms() {
    let (_, s) = parse(PFAFFIAN, &[]);
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(lovelock_metric_from_scenario(s, &mut m), LovelockStatus::Ok);
        assert_eq!(lovelock_metric_dim(m), 4);
        let x = [0.3, 1.2, 2.0, 4.1];
        let mut out = [0.0; 4];
        assert_eq!(lovelock_metric_top_forms(m, x.as_ptr(), 4, out.as_mut_ptr()), LovelockStatus::Ok);
        assert!((out[0] - out[2]).abs() < 1e-10 * out[2].abs().max(1e-12));
        assert_eq!(
            lovelock_metric_top_forms(m, x.as_ptr(), 3, out.as_mut_ptr()),
            LovelockStatus::InvalidInput
        );
        lovelock_metric_free(m);
        lovelock_scenario_free(s);
    }
}

#[test]
fn errors_map_to_codes() {
    let (status, s) = parse(PFAFFIAN, &["mbar=\"x\""]);
    assert_eq!(status, LovelockStatus::InvalidInput);
    assert!(s.is_null());
    assert!(last_error().contains("mbar"));

    let top = "name = \"t\"\nsuite = \"theorem2\"\nmbar = 2\nsignature = [0, 4]\nthetas = [\"c2\"]\n[[perturbations]]\nkind = \"general\"\nseed = 1\n";
    let (status, _) = parse(top, &[]);
    assert_eq!(status, LovelockStatus::DegreeNotBelowDimension);

    let mut out = ptr::null_mut();
    let status = unsafe { lovelock_scenario_parse(ptr::null(), ptr::null(), 0, &mut out) };
    assert_eq!(status, LovelockStatus::NullPointer);
    unsafe {
        assert!(!lovelock_report_pass(ptr::null()));
        assert_eq!(lovelock_report_len(ptr::null()), 0);
        lovelock_report_free(ptr::null_mut());
        lovelock_scenario_free(ptr::null_mut());
    }
}

#[test]
fn failed_run_still_returns_a_report() {
    let (status, s) = parse(PFAFFIAN, &["suite=\"continuation\"", "thetas=[\"c1\"]", "n-grid=4", "perturbations=[{kind=\"general\", seed=1}]"]);
    assert_eq!(status, LovelockStatus::Ok, "{}", last_error());
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(lovelock_run(s, &mut r), LovelockStatus::RunFailed);
        assert!(!r.is_null());
        assert!(!lovelock_report_pass(r));
        assert!(last_error().contains("definite"));
        lovelock_report_free(r);
        lovelock_scenario_free(s);
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(lovelock_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
