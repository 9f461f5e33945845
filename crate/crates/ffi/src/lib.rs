//! C ABI for the subharmonic solver.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`SubhStatus`]; on failure `subh_last_error()` describes the cause.
//! Strings returned through `char **` outputs are freed with
//! `subh_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use subharmonic::audit::{audit, AuditReport};
use subharmonic::config::{Resolved, RunConfig};
use subharmonic::hamiltonian::HamiltonianSpec;
use subharmonic::saddle::{solve, SaddleResult, SolveStatus};
use subharmonic::scan::scan;
use subharmonic::spectral::SystemSpec;
use subharmonic::Error;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Parse = 4,
    Evaluation = 5,
    NonFinite = 6,
    Io = 7,
    Panic = 8,
}

/// Outcome of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubhSolveStatus {
    Converged = 0,
    NonConverged = 1,
    Degenerate = 2,
}

/// A validated run configuration.
pub struct SubhConfig(Resolved);

/// A Hamiltonian `H(t, x)`.
pub struct SubhHamiltonian(HamiltonianSpec);

/// The outcome of one solve.
pub struct SubhSolveResult(SaddleResult);

/// A hypothesis audit report.
pub struct SubhAuditReport(AuditReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

fn status_of(e: &Error) -> SubhStatus {
    match e {
        Error::Config(_) | Error::Aliasing { .. } | Error::Json(_) => SubhStatus::Config,
        Error::Syntax { .. } | Error::UnknownIdentifier { .. } | Error::Arity { .. } => SubhStatus::Parse,
        Error::Evaluation { .. } => SubhStatus::Evaluation,
        Error::NonFinite { .. } => SubhStatus::NonFinite,
        Error::Io(_) => SubhStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SubhStatus, String)>) -> SubhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SubhStatus::Ok
        }
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            SubhStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SubhStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (SubhStatus, String) {
    (SubhStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (SubhStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SubhStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, (SubhStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn put<T>(out: *mut *mut T, v: T, name: &str) -> Result<(), (SubhStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), (SubhStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = CString::new(s)
        .map_err(|_| (SubhStatus::InvalidArgument, "string contains nul".to_string()))?
        .into_raw();
    Ok(())
}

unsafe fn state_arg<'a>(x: *const f64, len: usize, h: &HamiltonianSpec) -> Result<&'a [f64], (SubhStatus, String)> {
    if x.is_null() {
        return Err(null("x"));
    }
    if len != h.system.state_dim() {
        return Err((
            SubhStatus::InvalidArgument,
            format!("state has length {len}, expected {}", h.system.state_dim()),
        ));
    }
    Ok(std::slice::from_raw_parts(x, len))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn subh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn subh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn subh_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a JSON run configuration; every omitted field takes its default.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn subh_config_from_json(json: *const c_char, out: *mut *mut SubhConfig) -> SubhStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let r = RunConfig::from_json(text).and_then(|c| c.resolve()).map_err(lib_err)?;
        put(out, SubhConfig(r), "out")
    })
}

/// The fully resolved configuration as JSON.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn subh_config_to_json(cfg: *const SubhConfig, out: *mut *mut c_char) -> SubhStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        put_string(out, cfg.0.config.to_json())
    })
}

/// # Safety
/// `cfg` must be null or a handle from `subh_config_from_json`.
#[no_mangle]
pub unsafe extern "C" fn subh_config_free(cfg: *mut SubhConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// The Hamiltonian described by a configuration.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn subh_config_hamiltonian(cfg: *const SubhConfig, out: *mut *mut SubhHamiltonian) -> SubhStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        put(out, SubhHamiltonian(cfg.0.hamiltonian.clone()), "out")
    })
}

/// Parses an expression Hamiltonian on `ℝ^{2N}` with period `period`.
///
/// # Safety
/// `expression` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn subh_hamiltonian_parse(
    expression: *const c_char,
    period: f64,
    half_dim: usize,
    out: *mut *mut SubhHamiltonian,
) -> SubhStatus {
    guard(|| {
        let text = str_arg(expression, "expression")?;
        let system = SystemSpec::new(period, half_dim).map_err(lib_err)?;
        let h = HamiltonianSpec::expression(system, text).map_err(lib_err)?;
        put(out, SubhHamiltonian(h), "out")
    })
}

/// Dimension `2N` of the phase space.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn subh_hamiltonian_state_dim(h: *const SubhHamiltonian) -> usize {
    h.as_ref().map_or(0, |h| h.0.system.state_dim())
}

/// `H(t, x)` with `x` of length `2N`.
///
/// # Safety
/// `h` must be a live handle, `x` must point to `len` doubles and `value`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn subh_hamiltonian_eval(
    h: *const SubhHamiltonian,
    t: f64,
    x: *const f64,
    len: usize,
    value: *mut f64,
) -> SubhStatus {
    guard(|| {
        let h = &handle(h, "h")?.0;
        let x = state_arg(x, len, h)?;
        if value.is_null() {
            return Err(null("value"));
        }
        *value = h.eval_h(t, x).map_err(lib_err)?;
        Ok(())
    })
}

/// `∇ₓH(t, x)` written to `grad` (length `2N`).
///
/// # Safety
/// `x` and `grad` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn subh_hamiltonian_gradient(
    h: *const SubhHamiltonian,
    t: f64,
    x: *const f64,
    len: usize,
    grad: *mut f64,
) -> SubhStatus {
    guard(|| {
        let h = &handle(h, "h")?.0;
        let x = state_arg(x, len, h)?;
        if grad.is_null() {
            return Err(null("grad"));
        }
        let g = h.grad_h(t, x).map_err(lib_err)?;
        std::slice::from_raw_parts_mut(grad, len).copy_from_slice(&g);
        Ok(())
    })
}

/// The time-reversed Hamiltonian `−H(−t, x)`.
///
/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn subh_hamiltonian_time_reverse(
    h: *const SubhHamiltonian,
    out: *mut *mut SubhHamiltonian,
) -> SubhStatus {
    guard(|| {
        let h = handle(h, "h")?;
        put(out, SubhHamiltonian(h.0.time_reverse()), "out")
    })
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subh_hamiltonian_free(h: *mut SubhHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Searches for a `kT`-periodic solution of the configured Hamiltonian.
/// A non-converged or degenerate outcome is still `SUBH_STATUS_OK`; query
/// it with `subh_result_status`.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn subh_solve(cfg: *const SubhConfig, k: u32, out: *mut *mut SubhSolveResult) -> SubhStatus {
    guard(|| {
        let cfg = &handle(cfg, "cfg")?.0;
        if k == 0 {
            return Err((SubhStatus::InvalidArgument, "k must be at least 1".into()));
        }
        let r = solve(&cfg.hamiltonian, k, &cfg.config.solver, None).map_err(lib_err)?;
        put(out, SubhSolveResult(r), "out")
    })
}

/// # Safety
/// `r` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn subh_result_status(r: *const SubhSolveResult) -> SubhSolveStatus {
    match r.as_ref().map(|r| r.0.status) {
        Some(SolveStatus::Converged) => SubhSolveStatus::Converged,
        Some(SolveStatus::Degenerate) => SubhSolveStatus::Degenerate,
        _ => SubhSolveStatus::NonConverged,
    }
}

/// Critical level `C_k`; NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subh_result_level(r: *const SubhSolveResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.0.level_ck)
}

/// Final residual; NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subh_result_residual(r: *const SubhSolveResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.0.residual)
}

/// The full result, including the loop, as JSON.
///
/// # Safety
/// `r` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn subh_result_to_json(r: *const SubhSolveResult, out: *mut *mut c_char) -> SubhStatus {
    guard(|| {
        let r = handle(r, "r")?;
        put_string(out, r.0.to_json())
    })
}

/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subh_result_free(r: *mut SubhSolveResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Runs a scan over `k_values` (or the configured values when `count` is 0)
/// and returns the CSV report.
///
/// # Safety
/// `k_values` must point to `count` integers when `count > 0`; `out` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn subh_scan_csv(
    cfg: *const SubhConfig,
    k_values: *const u32,
    count: usize,
    out: *mut *mut c_char,
) -> SubhStatus {
    guard(|| {
        let cfg = &handle(cfg, "cfg")?.0;
        let mut sc = cfg.config.scan.clone();
        if count > 0 {
            if k_values.is_null() {
                return Err(null("k_values"));
            }
            sc.k_values = std::slice::from_raw_parts(k_values, count).to_vec();
        }
        let report = scan(&cfg.hamiltonian, &sc).map_err(lib_err)?;
        put_string(out, report.to_csv())
    })
}

/// Audits the configured Hamiltonian and `γ`.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn subh_audit(cfg: *const SubhConfig, out: *mut *mut SubhAuditReport) -> SubhStatus {
    guard(|| {
        let cfg = &handle(cfg, "cfg")?.0;
        let rep = audit(&cfg.hamiltonian, &cfg.gamma, &cfg.config.audit).map_err(lib_err)?;
        put(out, SubhAuditReport(rep), "out")
    })
}

/// Whether any audit entry is VIOLATED.
///
/// # Safety
/// `rep` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn subh_audit_any_violated(rep: *const SubhAuditReport) -> bool {
    rep.as_ref().is_some_and(|r| r.0.any_violated())
}

/// # Safety
/// `rep` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn subh_audit_to_json(rep: *const SubhAuditReport, out: *mut *mut c_char) -> SubhStatus {
    guard(|| {
        let rep = handle(rep, "rep")?;
        put_string(out, rep.0.to_json())
    })
}

/// # Safety
/// `rep` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subh_audit_free(rep: *mut SubhAuditReport) {
    if !rep.is_null() {
        drop(Box::from_raw(rep));
    }
}
