//! C ABI for running relchain scenarios and verifying blocks.
//!
//! Every fallible call returns an [`RcStatus`]. On failure a description is
//! kept per thread and can be read with [`rc_last_error_message`]. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use relchain::codec::{Canonical, Hash256};
use relchain::crypto::PublicKey;
use relchain::netsim::{self, RunReport, ScenarioConfig, SimError};
use relchain::ordering::{Block, BlockError};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    SimulationFailed = 4,
    Malformed = 5,
    OutOfSequence = 6,
    HashMismatch = 7,
    BadSignature = 8,
    Panic = 9,
}

/// A parsed scenario.
pub struct RcScenario {
    cfg: ScenarioConfig,
}

/// A finished run.
pub struct RcReport {
    report: RunReport,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: RcStatus, msg: impl ToString) -> RcStatus {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
    status
}

fn guarded(f: impl FnOnce() -> RcStatus) -> RcStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(RcStatus::Panic, "internal panic"))
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, RcStatus> {
    if p.is_null() {
        return Err(fail(RcStatus::NullArgument, "null string"));
    }
    CStr::from_ptr(p).to_str().map_err(|e| fail(RcStatus::InvalidUtf8, e))
}

/// Message of the last failed call on this thread. Empty if none failed.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a TOML scenario.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rc_scenario_from_toml(toml: *const c_char, out: *mut *mut RcScenario) -> RcStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RcStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        let s = match text(toml) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match ScenarioConfig::from_toml(s) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(RcScenario { cfg }));
                RcStatus::Ok
            }
            Err(e) => fail(RcStatus::InvalidConfig, e),
        }
    })
}

/// # Safety
/// `scenario` must come from [`rc_scenario_from_toml`].
#[no_mangle]
pub unsafe extern "C" fn rc_scenario_set_seed(scenario: *mut RcScenario, seed: u64) -> RcStatus {
    match scenario.as_mut() {
        Some(s) => {
            s.cfg.seed = seed;
            RcStatus::Ok
        }
        None => fail(RcStatus::NullArgument, "null scenario"),
    }
}

/// # Safety
/// `scenario` must come from [`rc_scenario_from_toml`] and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rc_scenario_free(scenario: *mut RcScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs a scenario to completion.
///
/// # Safety
/// `scenario` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rc_run(scenario: *const RcScenario, out: *mut *mut RcReport) -> RcStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RcStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        let Some(s) = scenario.as_ref() else { return fail(RcStatus::NullArgument, "null scenario") };
        match netsim::run(s.cfg.clone()) {
            Ok(report) => {
                let json = CString::new(report.to_json()).expect("json has no NUL");
                *out = Box::into_raw(Box::new(RcReport { report, json }));
                RcStatus::Ok
            }
            Err(SimError::Config(e)) => fail(RcStatus::InvalidConfig, e),
            Err(e) => fail(RcStatus::SimulationFailed, e),
        }
    })
}

/// The report as JSON, owned by the report handle.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rc_report_json(report: *const RcReport) -> *const c_char {
    match report.as_ref() {
        Some(r) => r.json.as_ptr(),
        None => {
            fail(RcStatus::NullArgument, "null report");
            ptr::null()
        }
    }
}

/// Writes whether the run passed every consistency check.
///
/// # Safety
/// `report` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rc_report_consistent(report: *const RcReport, out: *mut bool) -> RcStatus {
    match (report.as_ref(), out.as_mut()) {
        (Some(r), Some(o)) => {
            *o = r.report.consistent();
            RcStatus::Ok
        }
        _ => fail(RcStatus::NullArgument, "null argument"),
    }
}

/// Writes the number of divergence alarms raised during the run.
///
/// # Safety
/// `report` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rc_report_alarm_count(report: *const RcReport, out: *mut usize) -> RcStatus {
    match (report.as_ref(), out.as_mut()) {
        (Some(r), Some(o)) => {
            *o = r.report.alarms.len();
            RcStatus::Ok
        }
        _ => fail(RcStatus::NullArgument, "null argument"),
    }
}

/// # Safety
/// `report` must come from [`rc_run`] and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn rc_report_free(report: *mut RcReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Checks a canonically encoded block against its expected sequence
/// number, predecessor hash and orderer key.
///
/// # Safety
/// `block` must point to `len` readable bytes; `prev_hash` and
/// `orderer_key` to 32 bytes each.
#[no_mangle]
pub unsafe extern "C" fn rc_block_verify(
    block: *const u8,
    len: usize,
    expected_seq: u64,
    prev_hash: *const u8,
    orderer_key: *const u8,
) -> RcStatus {
    guarded(|| {
        if block.is_null() || prev_hash.is_null() || orderer_key.is_null() {
            return fail(RcStatus::NullArgument, "null argument");
        }
        let bytes = std::slice::from_raw_parts(block, len);
        let prev = Hash256(*(prev_hash as *const [u8; 32]));
        let key = PublicKey(*(orderer_key as *const [u8; 32]));
        let b = match Block::from_canonical(bytes) {
            Ok(b) => b,
            Err(e) => return fail(RcStatus::Malformed, e),
        };
        match b.verify(expected_seq, &prev, &key) {
            Ok(()) => RcStatus::Ok,
            Err(e @ BlockError::OutOfSequence { .. }) => fail(RcStatus::OutOfSequence, e),
            Err(e @ BlockError::HashMismatch) => fail(RcStatus::HashMismatch, e),
            Err(e @ BlockError::BadSignature) => fail(RcStatus::BadSignature, e),
        }
    })
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn rc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
