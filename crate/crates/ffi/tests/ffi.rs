use std::ffi::{c_char, CStr, CString};
use std::ptr;

use twostream_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe {
        ts_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn scenario(text: &str) -> Result<*mut TsScenario, (TsStatus, String)> {
    let c = CString::new(text).unwrap();
    let mut sc = ptr::null_mut();
    let st = unsafe { ts_scenario_from_str(c.as_ptr(), &mut sc) };
    if st == TsStatus::Ok {
        Ok(sc)
    } else {
        Err((st, last_error()))
    }
}

#[test]
fn solve_beltrami_through_the_c_abi() {
    let sc = scenario("[parameters]\ndelta = 0.01\n[grid]\nnx = 12\nny = 8\nnz = 8\n[boundary]\nf0 = \"delta*x*sin(2*pi*z/P2)\"\n").unwrap();
    let mut dims = [0usize; 3];
    assert_eq!(unsafe { ts_scenario_grid(sc, dims.as_mut_ptr()) }, TsStatus::Ok);
    assert_eq!(dims, [12, 8, 8]);
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { ts_solve(sc, TsMethod::Newton, &mut sol) }, TsStatus::Ok, "{}", last_error());
    let n = unsafe { ts_solution_len(sol) };
    assert_eq!(n, 12 * 8 * 8);
    let (mut it, mut res) = (0usize, 0.0f64);
    assert_eq!(unsafe { ts_solution_stats(sol, &mut it, &mut res) }, TsStatus::Ok);
    assert!(it >= 1 && res < 1e-10);
    let mut v1 = vec![0.0; n];
    assert_eq!(unsafe { ts_solution_copy_field(sol, TsField::V1, v1.as_mut_ptr(), n) }, TsStatus::Ok);
    // Flux through the inflow wall is the base flux.
    assert!(v1[..64].iter().all(|v| (v - 1.0).abs() < 1e-8));
    let mut short = vec![0.0; n - 1];
    assert_eq!(unsafe { ts_solution_copy_field(sol, TsField::P, short.as_mut_ptr(), n - 1) }, TsStatus::BufferTooSmall);
    let mut ver = TsVerification::default();
    assert_eq!(unsafe { ts_solution_verify(sol, &mut ver) }, TsStatus::Ok);
    assert!(ver.divergence_interior < 1e-6 && ver.rot_max > 1e-3);
    unsafe {
        ts_solution_free(sol);
        ts_scenario_free(sc);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let (st, msg) = scenario("[base]\ngrad_f = [1.0, 0.0, 0.0]\n").unwrap_err();
    assert_eq!(st, TsStatus::Invalid);
    assert!(msg.contains("vbar"), "{msg}");
    let (st, msg) = scenario("[boundary]\nf0 = \"x +\"\n").unwrap_err();
    assert_eq!(st, TsStatus::Invalid);
    assert!(msg.contains("<string>:2:"), "{msg}");
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { ts_scenario_from_str(ptr::null(), &mut sc) }, TsStatus::NullPointer);
    let path = CString::new("/nonexistent/scenario.toml").unwrap();
    assert_eq!(unsafe { ts_scenario_from_file(path.as_ptr(), &mut sc) }, TsStatus::Io);
    assert_eq!(unsafe { ts_solution_len(ptr::null()) }, 0);
    unsafe { ts_scenario_free(ptr::null_mut()) };
}

#[test]
fn version_and_header() {
    let v = unsafe { CStr::from_ptr(ts_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/twostream.h")).unwrap();
    for name in ["ts_solve", "ts_last_error", "TsScenario", "TS_STATUS_SOLVER_FAILURE", "TsVerification"] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
