//! C ABI over the twostream solver. Objects are opaque handles released with
//! the matching `*_free`; every call returns a [`TsStatus`] and records a
//! message retrievable with [`ts_last_error`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use twostream::euler::{pressure, verify_state, FlowState};
use twostream::nash_moser::{nash_moser_solve, newton_solve, Method, SolveReport};
use twostream::pair::FieldPair;
use twostream::scenario::{parse_scenario, parse_scenario_str, Scenario};
use twostream::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid input: parse errors, violated invariants, bad arguments.
    Invalid = 2,
    /// The computation failed (nonlinear or linear solver, extraction).
    SolverFailure = 3,
    Io = 4,
    /// Caller buffer too small.
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TsMethod {
    /// Method named in the scenario.
    Scenario = 0,
    Newton = 1,
    NashMoser = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TsField {
    F = 0,
    G = 1,
    V1 = 2,
    V2 = 3,
    V3 = 4,
    P = 5,
}

/// Health metrics of a solved state.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TsVerification {
    pub max_v_sq: f64,
    pub euler_interior: f64,
    pub divergence_interior: f64,
    pub beltrami_interior: f64,
    pub rot_max: f64,
    pub wall_flux_min: f64,
    pub wall_flux_max: f64,
}

/// Parsed and validated scenario.
pub struct TsScenario {
    inner: Scenario,
}

/// A converged solve.
pub struct TsSolution {
    state: FlowState,
    report: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> TsStatus {
    match e {
        Error::Io(_) => TsStatus::Io,
        e if e.is_validation() => TsStatus::Invalid,
        _ => TsStatus::SolverFailure,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (TsStatus, String)>) -> TsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TsStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            TsStatus::Panic
        }
    }
}

fn lift<T>(r: twostream::Result<T>) -> Result<T, (TsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (TsStatus, String) {
    (TsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (TsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (TsStatus::Invalid, format!("{what} is not UTF-8")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ts_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Version string, static and NUL-terminated.
#[no_mangle]
pub extern "C" fn ts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_scenario_from_file(path: *const c_char, out: *mut *mut TsScenario) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = c_str(path, "path")?;
        let sc = lift(parse_scenario(&PathBuf::from(p)))?;
        *out = Box::into_raw(Box::new(TsScenario { inner: sc }));
        Ok(())
    })
}

/// Parses scenario TOML text. Relative dump paths resolve against the
/// current directory.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_scenario_from_str(text: *const c_char, out: *mut *mut TsScenario) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = c_str(text, "text")?;
        let sc = lift(parse_scenario_str(t, "<string>", PathBuf::new()))?;
        *out = Box::into_raw(Box::new(TsScenario { inner: sc }));
        Ok(())
    })
}

/// # Safety
/// `sc` must be null or a handle from `ts_scenario_from_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_scenario_free(sc: *mut TsScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Writes (Nx, Ny, Nz) into `dims`.
///
/// # Safety
/// `sc` must be a live handle and `dims` must point to 3 writable entries.
#[no_mangle]
pub unsafe extern "C" fn ts_scenario_grid(sc: *const TsScenario, dims: *mut usize) -> TsStatus {
    guard(|| {
        let sc = sc.as_ref().ok_or_else(|| null("scenario"))?;
        if dims.is_null() {
            return Err(null("dims"));
        }
        let g = &sc.inner.grid;
        for (i, n) in [g.nx, g.ny, g.nz].into_iter().enumerate() {
            *dims.add(i) = n;
        }
        Ok(())
    })
}

/// Solves the scenario. On solver failure `*out` stays null and the status
/// is `SolverFailure`.
///
/// # Safety
/// `sc` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_solve(sc: *const TsScenario, method: TsMethod, out: *mut *mut TsSolution) -> TsStatus {
    guard(|| {
        let sc = &sc.as_ref().ok_or_else(|| null("scenario"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let data = lift(sc.problem_data())?;
        let params = lift(sc.nash_moser_params())?;
        let m = match method {
            TsMethod::Scenario => lift(sc.method())?,
            TsMethod::Newton => Method::Newton,
            TsMethod::NashMoser => Method::NashMoser,
        };
        let outcome = lift(match m {
            Method::Newton => newton_solve(&data, &FieldPair::zeros(&data.grid), sc.solver.tol, &params),
            Method::NashMoser => nash_moser_solve(&data, sc.solver.tol, &params),
        })?;
        let state = lift(FlowState::from_solution(&outcome.pair, &data))?;
        *out = Box::into_raw(Box::new(TsSolution { state, report: outcome.report }));
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a handle from `ts_solve` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_solution_free(sol: *mut TsSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Number of samples of each field, Nx Ny Nz.
///
/// # Safety
/// `sol` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ts_solution_len(sol: *const TsSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.state.v.x.values().len())
}

/// Outer iterations taken and final L^2 residual.
///
/// # Safety
/// `sol` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_solution_stats(sol: *const TsSolution, iterations: *mut usize, residual: *mut f64) -> TsStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("solution"))?;
        if iterations.is_null() || residual.is_null() {
            return Err(null("output"));
        }
        *iterations = s.report.iterations();
        *residual = s.report.final_residual();
        Ok(())
    })
}

/// Copies one field (x slowest, z fastest) into `buf` of length `len`.
///
/// # Safety
/// `sol` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ts_solution_copy_field(sol: *const TsSolution, which: TsField, buf: *mut f64, len: usize) -> TsStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("solution"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let st = &s.state;
        let field = match which {
            TsField::F => st.pair.total_f(),
            TsField::G => st.pair.total_g(),
            TsField::V1 => st.v.x.clone(),
            TsField::V2 => st.v.y.clone(),
            TsField::V3 => st.v.z.clone(),
            TsField::P => pressure(st),
        };
        let v = field.values();
        if len < v.len() {
            return Err((TsStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", v.len())));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// # Safety
/// `sol` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_solution_verify(sol: *const TsSolution, out: *mut TsVerification) -> TsStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("solution"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = lift(verify_state(&s.state))?;
        *out = TsVerification {
            max_v_sq: r.max_v_sq,
            euler_interior: r.euler_interior,
            divergence_interior: r.divergence_interior,
            beltrami_interior: r.beltrami_interior,
            rot_max: r.rot_max,
            wall_flux_min: r.wall_flux_min,
            wall_flux_max: r.wall_flux_max,
        };
        Ok(())
    })
}
