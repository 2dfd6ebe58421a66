//! C ABI over `nlconsensus`.
//!
//! Scenarios and trajectories are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns an
//! [`NlcStatus`]; on failure a message is available from
//! [`nlc_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nlconsensus::analysis;
use nlconsensus::dynamics::{IntegratorSettings, Scenario, Trajectory};
use nlconsensus::scenario_file::{self, bundled};
use nlconsensus::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Integration = 5,
    HypothesisViolated = 6,
    OutOfRange = 7,
    BufferTooSmall = 8,
    Io = 9,
    NotFound = 10,
    Panic = 11,
}

/// Opaque scenario handle.
pub struct NlcScenario {
    inner: Scenario,
}

/// Opaque trajectory handle.
pub struct NlcTrajectory {
    inner: Trajectory,
}

/// Result of consensus detection. `t_consensus` is NaN when not achieved.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NlcConsensus {
    pub achieved: bool,
    pub t_consensus: f64,
    pub final_spread: f64,
    pub final_speed: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> NlcStatus {
    match err {
        Error::Parse { .. } => NlcStatus::Parse,
        Error::Topology(_) | Error::ValidationFailed { .. } | Error::InvalidBounds(_) => NlcStatus::Validation,
        Error::NonFiniteState { .. } => NlcStatus::Integration,
        Error::HypothesisViolated(_) | Error::NoLeader => NlcStatus::HypothesisViolated,
        Error::Io(_) => NlcStatus::Io,
    }
}

struct Failure(NlcStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> NlcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => NlcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside nlconsensus");
            NlcStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure(NlcStatus::NullPointer, "null string argument".into()));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure(NlcStatus::InvalidUtf8, e.to_string()))
}

unsafe fn handle<'a, T>(h: *const T) -> Result<&'a T, Failure> {
    h.as_ref()
        .ok_or_else(|| Failure(NlcStatus::NullPointer, "null handle".into()))
}

unsafe fn out_slot<'a, T>(out: *mut T) -> Result<&'a mut T, Failure> {
    out.as_mut()
        .ok_or_else(|| Failure(NlcStatus::NullPointer, "null output pointer".into()))
}

unsafe fn out_buffer<'a>(buf: *mut f64, len: usize, needed: usize) -> Result<&'a mut [f64], Failure> {
    if len < needed {
        return Err(Failure(
            NlcStatus::BufferTooSmall,
            format!("buffer holds {len} values, {needed} needed"),
        ));
    }
    if buf.is_null() {
        return Err(Failure(NlcStatus::NullPointer, "null output buffer".into()));
    }
    Ok(std::slice::from_raw_parts_mut(buf, needed))
}

fn load(text: &str) -> Result<*mut NlcScenario, Failure> {
    let loaded = scenario_file::load_scenario_str(text)?;
    Ok(Box::into_raw(Box::new(NlcScenario { inner: loaded.scenario })))
}

/// Parses and validates a scenario from a JSON string.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlc_scenario_from_json(json: *const c_char, out: *mut *mut NlcScenario) -> NlcStatus {
    guard(|| {
        let slot = out_slot(out)?;
        *slot = ptr::null_mut();
        *slot = load(str_arg(json)?)?;
        Ok(())
    })
}

/// Reads, parses and validates a scenario file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlc_scenario_from_file(path: *const c_char, out: *mut *mut NlcScenario) -> NlcStatus {
    guard(|| {
        let slot = out_slot(out)?;
        *slot = ptr::null_mut();
        let text = std::fs::read_to_string(str_arg(path)?).map_err(Error::from)?;
        *slot = load(&text)?;
        Ok(())
    })
}

/// Loads one of the bundled scenarios (`fig2a`, `fig2b`, `fig3a`, `fig3b`).
///
/// # Safety
/// `name` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlc_scenario_bundled(name: *const c_char, out: *mut *mut NlcScenario) -> NlcStatus {
    guard(|| {
        let slot = out_slot(out)?;
        *slot = ptr::null_mut();
        let name = str_arg(name)?;
        let text =
            bundled::get(name).ok_or_else(|| Failure(NlcStatus::NotFound, format!("no bundled scenario `{name}`")))?;
        *slot = load(text)?;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn nlc_scenario_free(scenario: *mut NlcScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of agents, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nlc_scenario_n_agents(scenario: *const NlcScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.n_agents)
}

/// Number of position components per agent, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nlc_scenario_n_dims(scenario: *const NlcScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.n_dims)
}

/// Replaces the integration settings. The handle is left unchanged when the
/// new settings are rejected.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nlc_scenario_set_integrator(
    scenario: *mut NlcScenario,
    dt: f64,
    t_end: f64,
    record_every: usize,
) -> NlcStatus {
    guard(|| {
        let s = scenario
            .as_mut()
            .ok_or_else(|| Failure(NlcStatus::NullPointer, "null handle".into()))?;
        let mut candidate = s.inner.clone();
        candidate.integrator = IntegratorSettings {
            dt,
            t_end,
            record_every,
        };
        candidate.check()?;
        s.inner = candidate;
        Ok(())
    })
}

/// Writes the closed-form consensus value (`n_dims` values) into `out`.
///
/// # Safety
/// `scenario` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nlc_predict(scenario: *const NlcScenario, out: *mut f64, len: usize) -> NlcStatus {
    guard(|| {
        let s = handle(scenario)?;
        let value = analysis::predict(&s.inner)?;
        out_buffer(out, len, value.len())?.copy_from_slice(&value);
        Ok(())
    })
}

/// Integrates the scenario.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlc_simulate(scenario: *const NlcScenario, out: *mut *mut NlcTrajectory) -> NlcStatus {
    guard(|| {
        let slot = out_slot(out)?;
        *slot = ptr::null_mut();
        let s = handle(scenario)?;
        let traj = nlconsensus::simulate(&s.inner)?;
        *slot = Box::into_raw(Box::new(NlcTrajectory { inner: traj }));
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a handle returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn nlc_trajectory_free(traj: *mut NlcTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of recorded samples, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nlc_trajectory_len(traj: *const NlcTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.samples.len())
}

/// Copies sample `index`: its time, and positions and velocities in
/// agent-major order (`n_agents * n_dims` values each).
///
/// # Safety
/// `traj` must be a live handle; `t` must be valid; `p` and `q` must hold
/// `p_len` and `q_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nlc_trajectory_sample(
    traj: *const NlcTrajectory,
    index: usize,
    t: *mut f64,
    p: *mut f64,
    p_len: usize,
    q: *mut f64,
    q_len: usize,
) -> NlcStatus {
    guard(|| {
        let tr = handle(traj)?;
        let sample = tr.inner.samples.get(index).ok_or_else(|| {
            Failure(
                NlcStatus::OutOfRange,
                format!("sample {index} out of range ({} recorded)", tr.inner.samples.len()),
            )
        })?;
        *out_slot(t)? = sample.t;
        out_buffer(p, p_len, sample.p.len())?.copy_from_slice(&sample.p);
        out_buffer(q, q_len, sample.q.len())?.copy_from_slice(&sample.q);
        Ok(())
    })
}

/// Copies the leader state of sample `index` (`n_dims` values each).
///
/// # Safety
/// `traj` must be a live handle; `p` and `q` must hold `len` doubles each.
#[no_mangle]
pub unsafe extern "C" fn nlc_trajectory_leader(
    traj: *const NlcTrajectory,
    index: usize,
    p: *mut f64,
    q: *mut f64,
    len: usize,
) -> NlcStatus {
    guard(|| {
        let tr = handle(traj)?;
        let sample = tr
            .inner
            .samples
            .get(index)
            .ok_or_else(|| Failure(NlcStatus::OutOfRange, format!("sample {index} out of range")))?;
        let leader = sample.leader.as_ref().ok_or(Error::NoLeader)?;
        out_buffer(p, len, leader.p.len())?.copy_from_slice(&leader.p);
        out_buffer(q, len, leader.q.len())?.copy_from_slice(&leader.q);
        Ok(())
    })
}

/// Finite-horizon consensus check.
///
/// # Safety
/// `traj` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlc_detect_consensus(
    traj: *const NlcTrajectory,
    pos_tol: f64,
    vel_tol: f64,
    out: *mut NlcConsensus,
) -> NlcStatus {
    guard(|| {
        let tr = handle(traj)?;
        let slot = out_slot(out)?;
        if tr.inner.samples.is_empty() {
            return Err(Failure(NlcStatus::OutOfRange, "empty trajectory".into()));
        }
        let report = analysis::detect_consensus(&tr.inner, pos_tol, vel_tol);
        *slot = NlcConsensus {
            achieved: report.achieved,
            t_consensus: report.t_consensus.unwrap_or(f64::NAN),
            final_spread: report.final_spread,
            final_speed: report.final_speed,
        };
        Ok(())
    })
}

/// Message for the most recent failure on this thread, or null. Valid until
/// the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn nlc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nlc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
