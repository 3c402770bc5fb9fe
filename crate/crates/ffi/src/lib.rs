//! C interface to the verification harness.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free` function. Every fallible call returns a
//! [`LovelockStatus`]; the message for the most recent failure on the
//! calling thread is available from [`lovelock_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lovelock_core::char_forms::pfaffian_vs_top_chern;
use lovelock_core::cli::report::Report;
use lovelock_core::cli::run_scenario;
use lovelock_core::cli::scenario::Scenario;
use lovelock_core::geometry::MetricField;
use lovelock_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LovelockStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Degenerate = 4,
    NotKahler = 5,
    DegreeNotBelowDimension = 6,
    Numerical = 7,
    OutOfRange = 8,
    RunFailed = 9,
    Panic = 10,
}

pub struct LovelockScenario(Scenario);

pub struct LovelockReport(Report);

pub struct LovelockMetric(MetricField);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LovelockStatus {
    match e {
        Error::Degenerate { .. } | Error::SingularSystem => LovelockStatus::Degenerate,
        Error::NotKahler { .. } | Error::NotPotentialMetric => LovelockStatus::NotKahler,
        Error::DegreeNotBelowDimension { .. } => LovelockStatus::DegreeNotBelowDimension,
        Error::Richardson(_) | Error::NonFinite { .. } => LovelockStatus::Numerical,
        Error::Scenario(msg) if msg.contains("k < mbar") => LovelockStatus::DegreeNotBelowDimension,
        _ => LovelockStatus::InvalidInput,
    }
}

fn fail(status: LovelockStatus, msg: &str) -> LovelockStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> LovelockStatus) -> LovelockStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(LovelockStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, LovelockStatus> {
    if p.is_null() {
        return Err(fail(LovelockStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LovelockStatus::InvalidUtf8, "string argument is not UTF-8"))
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lovelock_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lovelock_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a scenario from TOML text with `n_overrides` `key=value` strings.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `overrides` must point to
/// `n_overrides` such strings (or be NULL when `n_overrides` is 0); `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn lovelock_scenario_parse(
    toml: *const c_char,
    overrides: *const *const c_char,
    n_overrides: usize,
    out: *mut *mut LovelockScenario,
) -> LovelockStatus {
    guard(|| {
        if out.is_null() || (overrides.is_null() && n_overrides > 0) {
            return fail(LovelockStatus::NullPointer, "null argument");
        }
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let mut ov = Vec::with_capacity(n_overrides);
        for i in 0..n_overrides {
            match read_str(*overrides.add(i)) {
                Ok(s) => ov.push(s.to_string()),
                Err(s) => return s,
            }
        }
        match Scenario::from_toml_str(text, &ov) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(LovelockScenario(s)));
                LovelockStatus::Ok
            }
            Err(e) => fail(status_of(&e), &e.to_string()),
        }
    })
}

/// # Safety
/// `s` must be NULL or a handle from [`lovelock_scenario_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lovelock_scenario_free(s: *mut LovelockScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Runs the scenario's suite. A report is written to `out` even when the
/// run stops early, in which case the status is `RUN_FAILED`.
///
/// # Safety
/// `s` must be a live scenario handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lovelock_run(s: *const LovelockScenario, out: *mut *mut LovelockReport) -> LovelockStatus {
    guard(|| {
        if s.is_null() || out.is_null() {
            return fail(LovelockStatus::NullPointer, "null argument");
        }
        let report = run_scenario(&(*s).0, None);
        let error = report.error.clone();
        *out = Box::into_raw(Box::new(LovelockReport(report)));
        match error {
            Some(msg) => fail(LovelockStatus::RunFailed, &msg),
            None => LovelockStatus::Ok,
        }
    })
}

/// # Safety
/// `r` must be NULL or a handle from [`lovelock_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lovelock_report_free(r: *mut LovelockReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Whether every row passed and the run completed. False for NULL.
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn lovelock_report_pass(r: *const LovelockReport) -> bool {
    !r.is_null() && (*r).0.pass
}

/// Number of result rows; 0 for NULL.
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn lovelock_report_len(r: *const LovelockReport) -> usize {
    if r.is_null() {
        0
    } else {
        let report = &(*r).0;
        report.residuals.len()
    }
}

/// Relative residual (or check error) of row `i`.
///
/// # Safety
/// `r` must be a live report handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn lovelock_report_row(
    r: *const LovelockReport,
    i: usize,
    value: *mut f64,
    pass: *mut bool,
) -> LovelockStatus {
    guard(|| {
        if r.is_null() || value.is_null() || pass.is_null() {
            return fail(LovelockStatus::NullPointer, "null argument");
        }
        let report = &(*r).0;
        let Some(row) = report.residuals.get(i) else {
            return fail(LovelockStatus::OutOfRange, "row index out of range");
        };
        *value = match row {
            lovelock_core::cli::report::Row::Residual(x) => x.report.relative_residual,
            lovelock_core::cli::report::Row::Check(c) => c.error,
        };
        *pass = row.pass();
        LovelockStatus::Ok
    })
}

/// Full report as JSON; free with [`lovelock_string_free`].
///
/// # Safety
/// `r` must be a live report handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lovelock_report_json(r: *const LovelockReport, out: *mut *mut c_char) -> LovelockStatus {
    guard(|| {
        if r.is_null() || out.is_null() {
            return fail(LovelockStatus::NullPointer, "null argument");
        }
        let json = match serde_json::to_string(&(*r).0) {
            Ok(j) => j,
            Err(e) => return fail(LovelockStatus::InvalidInput, &e.to_string()),
        };
        match CString::new(json) {
            Ok(c) => {
                *out = c.into_raw();
                LovelockStatus::Ok
            }
            Err(e) => fail(LovelockStatus::InvalidInput, &e.to_string()),
        }
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lovelock_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds the scenario's background metric.
///
/// # Safety
/// `s` must be a live scenario handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lovelock_metric_from_scenario(
    s: *const LovelockScenario,
    out: *mut *mut LovelockMetric,
) -> LovelockStatus {
    guard(|| {
        if s.is_null() || out.is_null() {
            return fail(LovelockStatus::NullPointer, "null argument");
        }
        match (*s).0.build_metric() {
            Ok(m) => {
                *out = Box::into_raw(Box::new(LovelockMetric(m)));
                LovelockStatus::Ok
            }
            Err(e) => fail(status_of(&e), &e.to_string()),
        }
    })
}

/// # Safety
/// `m` must be NULL or a handle from [`lovelock_metric_from_scenario`].
#[no_mangle]
pub unsafe extern "C" fn lovelock_metric_free(m: *mut LovelockMetric) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Real dimension `2m̄` of the metric; 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live metric handle.
#[no_mangle]
pub unsafe extern "C" fn lovelock_metric_dim(m: *const LovelockMetric) -> usize {
    if m.is_null() {
        0
    } else {
        (*m).0.n()
    }
}

/// Euler integrand and top Chern density at `x` (length `2m̄`), as
/// real and imaginary parts: `out[0..4] = [euler.re, euler.im, chern.re, chern.im]`.
///
/// # Safety
/// `m` must be a live metric handle, `x` must point to `len` doubles and
/// `out` to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lovelock_metric_top_forms(
    m: *const LovelockMetric,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> LovelockStatus {
    guard(|| {
        if m.is_null() || x.is_null() || out.is_null() {
            return fail(LovelockStatus::NullPointer, "null argument");
        }
        let h = &(*m).0;
        if len != h.n() {
            return fail(
                LovelockStatus::InvalidInput,
                &format!("point has {len} coordinates, metric needs {}", h.n()),
            );
        }
        let point = std::slice::from_raw_parts(x, len);
        match pfaffian_vs_top_chern(h, point) {
            Ok((e, c)) => {
                let dst = std::slice::from_raw_parts_mut(out, 4);
                dst.copy_from_slice(&[e.re, e.im, c.re, c.im]);
                LovelockStatus::Ok
            }
            Err(e) => fail(status_of(&e), &e.to_string()),
        }
    })
}
