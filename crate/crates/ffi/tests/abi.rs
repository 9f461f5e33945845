use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use subharmonic_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(subh_last_error()) }.to_string_lossy().into_owned()
}

fn config(json: &str) -> *mut SubhConfig {
    let text = CString::new(json).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { subh_config_from_json(text.as_ptr(), &mut cfg) }, SubhStatus::Ok, "{}", last_error());
    cfg
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { subh_string_free(p) };
    s
}

const QUADRATIC: &str = r#"{"system": {"T": 6.283185307179586}, "hamiltonian": {"builtin": "QUADRATIC", "lambda": 1.0}}"#;

#[test]
fn config_round_trip_and_errors() {
    let cfg = config("{}");
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { subh_config_to_json(cfg, &mut json) }, SubhStatus::Ok);
    let text = take_string(json);
    assert!(text.contains("EXAMPLE_4_1"));
    unsafe { subh_config_free(cfg) };

    let bad = CString::new(r#"{"system": {"T": -1}}"#).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { subh_config_from_json(bad.as_ptr(), &mut out) }, SubhStatus::Config);
    assert!(out.is_null());
    assert!(last_error().contains("period"));
    assert_eq!(unsafe { subh_config_from_json(ptr::null(), &mut out) }, SubhStatus::NullPointer);
}

#[test]
fn hamiltonian_evaluation_and_reversal() {
    let expr = CString::new("(1.5 + sin(2*pi*t/T))*ln(1+r2)^2.5").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { subh_hamiltonian_parse(expr.as_ptr(), 1.0, 1, &mut h) }, SubhStatus::Ok);
    assert_eq!(unsafe { subh_hamiltonian_state_dim(h) }, 2);
    let x = [0.3, -1.2];
    let (mut v, mut g) = (0.0, [0.0; 2]);
    assert_eq!(unsafe { subh_hamiltonian_eval(h, 0.2, x.as_ptr(), 2, &mut v) }, SubhStatus::Ok);
    assert_eq!(unsafe { subh_hamiltonian_gradient(h, 0.2, x.as_ptr(), 2, g.as_mut_ptr()) }, SubhStatus::Ok);
    let step = 1e-6;
    for i in 0..2 {
        let (mut xp, mut xm) = (x, x);
        xp[i] += step;
        xm[i] -= step;
        let (mut vp, mut vm) = (0.0, 0.0);
        unsafe {
            subh_hamiltonian_eval(h, 0.2, xp.as_ptr(), 2, &mut vp);
            subh_hamiltonian_eval(h, 0.2, xm.as_ptr(), 2, &mut vm);
        }
        assert!(((vp - vm) / (2.0 * step) - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()));
    }
    let (mut r1, mut r2) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(subh_hamiltonian_time_reverse(h, &mut r1), SubhStatus::Ok);
        assert_eq!(subh_hamiltonian_time_reverse(r1, &mut r2), SubhStatus::Ok);
    }
    let (mut w1, mut w2) = (0.0, 0.0);
    unsafe {
        subh_hamiltonian_eval(r1, 0.2, x.as_ptr(), 2, &mut w1);
        subh_hamiltonian_eval(r2, 0.2, x.as_ptr(), 2, &mut w2);
    }
    let mut reflected = 0.0;
    unsafe { subh_hamiltonian_eval(h, -0.2, x.as_ptr(), 2, &mut reflected) };
    assert_eq!(w1, -reflected);
    assert_eq!(w2, v);
    assert_eq!(unsafe { subh_hamiltonian_eval(h, 0.2, x.as_ptr(), 3, &mut v) }, SubhStatus::InvalidArgument);
    unsafe {
        subh_hamiltonian_free(h);
        subh_hamiltonian_free(r1);
        subh_hamiltonian_free(r2);
    }
}

#[test]
fn parse_errors_report_position() {
    let bad = CString::new("ln(1+r2").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { subh_hamiltonian_parse(bad.as_ptr(), 1.0, 1, &mut h) }, SubhStatus::Parse);
    assert!(h.is_null());
    assert!(last_error().contains("position 7"), "{}", last_error());
}

#[test]
fn solve_quadratic_exactly() {
    let cfg = config(QUADRATIC);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { subh_solve(cfg, 1, &mut r) }, SubhStatus::Ok);
    assert_eq!(unsafe { subh_result_status(r) }, SubhSolveStatus::Converged);
    assert!(unsafe { subh_result_residual(r) } <= 1e-12);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { subh_result_to_json(r, &mut json) }, SubhStatus::Ok);
    assert!(take_string(json).contains("\"status\": \"CONVERGED\""));
    assert_eq!(unsafe { subh_solve(cfg, 0, &mut r) }, SubhStatus::InvalidArgument);
    unsafe {
        subh_result_free(r);
        subh_config_free(cfg);
    }
    assert!(unsafe { subh_result_level(ptr::null()) }.is_nan());
}

#[test]
fn audit_and_scan() {
    let cfg = config(r#"{"hamiltonian": "EXAMPLE_3_1"}"#);
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { subh_audit(cfg, &mut rep) }, SubhStatus::Ok);
    assert!(!unsafe { subh_audit_any_violated(rep) });
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { subh_audit_to_json(rep, &mut json) }, SubhStatus::Ok);
    assert!(take_string(json).contains("\"H2\""));
    unsafe {
        subh_audit_free(rep);
        subh_config_free(cfg);
    }

    let cfg = config(QUADRATIC);
    let ks = [1u32];
    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { subh_scan_csv(cfg, ks.as_ptr(), 1, &mut csv) }, SubhStatus::Ok);
    let csv = take_string(csv);
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("k,C_k,C_k_over_k,sup_norm,residual,minimal_r,closure_error,converged"));
    unsafe { subh_config_free(cfg) };
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/subharmonic.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 15);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    for t in ["typedef struct SubhConfig SubhConfig;", "SUBH_STATUS_NULL_POINTER = 1", "SUBH_SOLVE_STATUS_DEGENERATE = 2"] {
        assert!(header.contains(t));
    }
}

/// Compiles a C program against the header and the shared library when a
/// C compiler is present.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let target = exe.parent().and_then(|d| d.parent()).map(PathBuf::from).unwrap();
    let lib = target.join(if cfg!(target_os = "macos") { "libsubharmonic_ffi.dylib" } else { "libsubharmonic_ffi.so" });
    if !cfg!(unix) || !lib.exists() || std::process::Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C toolchain or shared library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let manifest = env!("CARGO_MANIFEST_DIR");
    let status = std::process::Command::new("cc")
        .args([
            &format!("{manifest}/tests/c/smoke.c"),
            "-I",
            &format!("{manifest}/include"),
            "-L",
            target.to_str().unwrap(),
            "-lsubharmonic_ffi",
            &format!("-Wl,-rpath,{}", target.display()),
            "-o",
            bin.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    let first: Vec<&str> = lines.next().unwrap().split(' ').collect();
    assert_eq!(first[0], "0");
    assert!(first[1].parse::<f64>().unwrap() <= 1e-12);
    assert!(lines.next().unwrap().contains("position 7"));
}
