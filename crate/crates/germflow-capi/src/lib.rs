//! C ABI over the germflow library: opaque config handles, integer status
//! codes, a thread-local error message, and direct closed-form evaluators.
//!
//! Every fallible call returns `GfStatus`; on anything other than `Ok` the
//! detail is available from `gf_last_error` until the next failing call on
//! the same thread. Panics never cross the boundary — they are caught and
//! reported as `GfStatus_Panic`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use germflow::cli::{self, RunOptions, ScenarioConfig};
use germflow::germs::{germ_overlap, GermDescriptor, GermFamily, PhasePoint};
use germflow::meanfield::symmetric_dimension;
use germflow::Error;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GfStatus {
    /// Success.
    Ok = 0,
    /// A pointer argument was null, or text was not valid UTF-8.
    InvalidArgument = 1,
    /// The config text is not valid JSON for the scenario schema.
    Parse = 2,
    /// The config parsed but fails scenario validation.
    Validation = 3,
    /// A numeric tolerance was violated during computation.
    Numeric = 4,
    /// Filesystem failure while writing outputs.
    Io = 5,
    /// An internal invariant broke; the panic was caught at the boundary.
    Panic = 6,
}

/// Opaque, validated scenario handle. Created by `gf_config_parse`,
/// released by `gf_config_free`. A handle that parses is always runnable.
pub struct GfConfig(ScenarioConfig);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").expect("empty"));
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(clean).expect("NUL bytes stripped");
    });
}

fn status_of(e: &Error) -> GfStatus {
    set_error(&e.to_string());
    match e {
        Error::Json(_) => GfStatus::Parse,
        Error::Validation(_) => GfStatus::Validation,
        Error::Numeric { .. } => GfStatus::Numeric,
        Error::Io(_) => GfStatus::Io,
    }
}

fn guarded(f: impl FnOnce() -> GfStatus) -> GfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            GfStatus::Panic
        }
    }
}

/// Library version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn gf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on the calling thread. The pointer
/// stays valid until the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn gf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parse and validate a scenario config from JSON text. On success writes
/// a fresh handle to `out` and returns `Ok`; on failure leaves `out`
/// untouched and reports why through the status and `gf_last_error`.
///
/// # Safety
/// `json` must point to a NUL-terminated string and `out` to writable
/// pointer storage.
#[no_mangle]
pub unsafe extern "C" fn gf_config_parse(
    json: *const c_char,
    out: *mut *mut GfConfig,
) -> GfStatus {
    guarded(|| {
        if json.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GfStatus::InvalidArgument;
        }
        let text = match unsafe { CStr::from_ptr(json) }.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("config text is not valid UTF-8");
                return GfStatus::InvalidArgument;
            }
        };
        let cfg: ScenarioConfig = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => {
                set_error(&format!("json: {e}"));
                return GfStatus::Parse;
            }
        };
        let problems = cli::validate_config(&cfg);
        if !problems.is_empty() {
            set_error(&problems.join("; "));
            return GfStatus::Validation;
        }
        unsafe { *out = Box::into_raw(Box::new(GfConfig(cfg))) };
        GfStatus::Ok
    })
}

/// Release a handle from `gf_config_parse`. Null is a no-op.
///
/// # Safety
/// `config` must be a pointer previously returned by `gf_config_parse`
/// and not already freed.
#[no_mangle]
pub unsafe extern "C" fn gf_config_free(config: *mut GfConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Run a scenario: writes `<study>_<name>.csv` plus `manifest.json` and
/// hands back the manifest as a JSON string (free with `gf_string_free`).
/// `out_dir` overrides the `GERMFLOW_OUT` environment variable and the
/// config's own `out_dir`; pass null to keep their precedence. `jobs` is
/// clamped to at least 1.
///
/// # Safety
/// `config` must be a live handle; `out_dir` null or NUL-terminated;
/// `manifest_json` must point to writable pointer storage.
#[no_mangle]
pub unsafe extern "C" fn gf_run(
    config: *const GfConfig,
    jobs: u32,
    out_dir: *const c_char,
    manifest_json: *mut *mut c_char,
) -> GfStatus {
    guarded(|| {
        if config.is_null() || manifest_json.is_null() {
            set_error("null pointer argument");
            return GfStatus::InvalidArgument;
        }
        let dir = if out_dir.is_null() {
            None
        } else {
            match unsafe { CStr::from_ptr(out_dir) }.to_str() {
                Ok(d) => Some(PathBuf::from(d)),
                Err(_) => {
                    set_error("out_dir is not valid UTF-8");
                    return GfStatus::InvalidArgument;
                }
            }
        };
        let cfg = unsafe { &(*config).0 };
        let opts = RunOptions { jobs: jobs.max(1) as usize, out_dir: dir };
        match cli::run_config(cfg, &opts) {
            Ok((_, manifest)) => {
                let text = match serde_json::to_string_pretty(&manifest) {
                    Ok(t) => t,
                    Err(e) => {
                        set_error(&format!("json: {e}"));
                        return GfStatus::Io;
                    }
                };
                let owned = CString::new(text).expect("serialized JSON has no NUL bytes");
                unsafe { *manifest_json = owned.into_raw() };
                GfStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Free a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be a pointer previously returned by `gf_run` and not already
/// freed.
#[no_mangle]
pub unsafe extern "C" fn gf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Closed-form spin overlap `p = ((1 + n1.n2)/2)^two_j` between coherent
/// states at two sphere points, `theta` in `[0, pi]`, `phi` in `[0, 2pi)`.
///
/// # Safety
/// `out` must point to writable storage for one double.
#[no_mangle]
pub unsafe extern "C" fn gf_spin_overlap(
    two_j: u32,
    theta1: f64,
    phi1: f64,
    theta2: f64,
    phi2: f64,
    out: *mut f64,
) -> GfStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null pointer argument");
            return GfStatus::InvalidArgument;
        }
        let result = (|| {
            let germ = GermDescriptor::new(GermFamily::SpinSU2)?;
            let x = PhasePoint::sphere(theta1, phi1)?;
            let y = PhasePoint::sphere(theta2, phi2)?;
            germ_overlap(&germ, two_j as usize, &x, &y)
        })();
        match result {
            Ok(p) => {
                unsafe { *out = p };
                GfStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Closed-form Gaussian overlap `p = exp(-(|dq|^2 + |dp|^2)/(2 hbar))`
/// with `hbar = 1/l`, between packets centered at `(q1, p1)` and
/// `(q2, p2)`, each an array of `n` doubles.
///
/// # Safety
/// The four center arrays must each hold `n` doubles; `out` must point to
/// writable storage for one double.
#[no_mangle]
pub unsafe extern "C" fn gf_gaussian_overlap(
    n: u32,
    l: u32,
    q1: *const f64,
    p1: *const f64,
    q2: *const f64,
    p2: *const f64,
    out: *mut f64,
) -> GfStatus {
    guarded(|| {
        if q1.is_null() || p1.is_null() || q2.is_null() || p2.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GfStatus::InvalidArgument;
        }
        let grab = |ptr: *const f64| unsafe { std::slice::from_raw_parts(ptr, n as usize) }.to_vec();
        let result = (|| {
            let germ = GermDescriptor::new(GermFamily::HeisenbergGauss { n: n as usize })?;
            let x = PhasePoint::plane(grab(p1), grab(q1))?;
            let y = PhasePoint::plane(grab(p2), grab(q2))?;
            germ_overlap(&germ, l as usize, &x, &y)
        })();
        match result {
            Ok(p) => {
                unsafe { *out = p };
                GfStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Dimension `C(l + m - 1, m - 1)` of the permutation-symmetric sector.
///
/// # Safety
/// `out` must point to writable storage for one u64.
#[no_mangle]
pub unsafe extern "C" fn gf_symmetric_dimension(m: u32, l: u32, out: *mut u64) -> GfStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null pointer argument");
            return GfStatus::InvalidArgument;
        }
        match symmetric_dimension(m as usize, l as usize) {
            Ok(dim) => {
                unsafe { *out = dim as u64 };
                GfStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}
