//! C ABI over the streamguide simulator.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free`. Every call returns an [`SgStatus`]; on failure the
//! message is available from [`sg_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use streamguide::config::{Scenario, ConfigError};
use streamguide::flowfield::StreamField;
use streamguide::output::write_trace;
use streamguide::simulator::{run, ObstacleMode, Outcome, RunTrace};
use streamguide::Vec2;

/// Parsed, validated scenario.
pub struct SgScenario {
    inner: Scenario,
}

/// Completed simulation with its full trace.
pub struct SgRun {
    trace: RunTrace,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Invalid = 4,
    Io = 5,
    OutOfRange = 6,
    Singular = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgOutcome {
    Reached = 0,
    Timeout = 1,
    Fault = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgSummary {
    pub outcome: SgOutcome,
    /// NaN unless the target was reached.
    pub arrival_time: f64,
    pub final_time: f64,
    pub final_distance: f64,
    pub path_length: f64,
    pub max_z_p: f64,
    /// Smallest clearance-to-radius ratio over all obstacles (infinity if none).
    pub min_clearance_ratio: f64,
    pub waypoints: u32,
    pub segments: u32,
    pub max_junction_mismatch: f64,
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

type Fallible<T> = Result<T, (SgStatus, String)>;

/// Run `f`, turning errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> Fallible<()>) -> SgStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            SgStatus::Panic
        }
    }
}

fn null(what: &str) -> (SgStatus, String) {
    (SgStatus::NullArgument, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Fallible<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (SgStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Fallible<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut T, value: T, what: &str) -> Fallible<()> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn config_error(e: ConfigError) -> (SgStatus, String) {
    let status = match e {
        ConfigError::Parse { .. } => SgStatus::Parse,
        ConfigError::Io { .. } => SgStatus::Io,
        ConfigError::Invalid(_) | ConfigError::Unknown(_) => SgStatus::Invalid,
    };
    (status, e.to_string())
}

unsafe fn hand_out(out: *mut *mut SgScenario, sc: Fallible<Scenario>) -> Fallible<()> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(ptr::null_mut());
    let sc = sc?;
    out.write(Box::into_raw(Box::new(SgScenario { inner: sc })));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next `sg_*` call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parse a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_scenario_from_toml(toml: *const c_char, out: *mut *mut SgScenario) -> SgStatus {
    guard(|| {
        let t = text(toml, "toml");
        hand_out(out, t.and_then(|t| Scenario::parse(t, "<ffi>").map_err(config_error)))
    })
}

/// Load a scenario from a TOML file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_scenario_from_file(path: *const c_char, out: *mut *mut SgScenario) -> SgStatus {
    guard(|| {
        let p = text(path, "path");
        hand_out(out, p.and_then(|p| Scenario::from_path(Path::new(p)).map_err(config_error)))
    })
}

/// One of the bundled scenarios by name.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_scenario_bundled(name: *const c_char, out: *mut *mut SgScenario) -> SgStatus {
    guard(|| {
        let n = text(name, "name");
        let sc = n.and_then(|n| {
            streamguide::config::bundled(n).ok_or_else(|| config_error(ConfigError::Unknown(n.to_string())))
        });
        hand_out(out, sc)
    })
}

/// # Safety
/// `scenario` must come from an `sg_scenario_*` constructor (or be NULL) and
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_scenario_free(scenario: *mut SgScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_scenario_obstacle_count(scenario: *const SgScenario, out: *mut usize) -> SgStatus {
    guard(|| {
        let sc = deref(scenario, "scenario")?;
        store(out, sc.inner.workspace.obstacles.len(), "out")
    })
}

/// Composite stream function at `(x, y)` with the initial obstacle snapshot,
/// spins evaluated for the current waypoint `(wp_x, wp_y)`.
///
/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_stream_function(
    scenario: *const SgScenario,
    wp_x: f64,
    wp_y: f64,
    x: f64,
    y: f64,
    out: *mut f64,
) -> SgStatus {
    guard(|| {
        let sc = &deref(scenario, "scenario")?.inner;
        let mut field =
            StreamField::new(&sc.workspace, Vec2::new(wp_x, wp_y)).with_sink_strength(sc.planner.sink_strength);
        if sc.sim.obstacle_mode == ObstacleMode::StreamGuided {
            field = field.with_uniform_spin();
        }
        let v = field
            .psi(Vec2::new(x, y))
            .map_err(|e| (SgStatus::Singular, e.to_string()))?;
        store(out, v, "out")
    })
}

/// Simulate the scenario to completion. A fault or timeout inside the run is
/// not an error here; query it with `sg_run_outcome`.
///
/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_run(scenario: *const SgScenario, out: *mut *mut SgRun) -> SgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let sc = &deref(scenario, "scenario")?.inner;
        let trace = run(sc);
        out.write(Box::into_raw(Box::new(SgRun { trace })));
        Ok(())
    })
}

/// # Safety
/// `run` must come from `sg_run` (or be NULL) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_run_free(run: *mut SgRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

fn outcome(o: &Outcome) -> SgOutcome {
    match o {
        Outcome::Reached => SgOutcome::Reached,
        Outcome::Timeout => SgOutcome::Timeout,
        Outcome::Fault(_) => SgOutcome::Fault,
    }
}

/// Outcome of the run. For faults the reason is also left in the last-error
/// slot.
///
/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_run_outcome(run: *const SgRun, out: *mut SgOutcome) -> SgStatus {
    let mut reason = None;
    let status = guard(|| {
        let r = deref(run, "run")?;
        if let Outcome::Fault(why) = &r.trace.summary.outcome {
            reason = Some(why.clone());
        }
        store(out, outcome(&r.trace.summary.outcome), "out")
    });
    if let Some(why) = reason {
        set_error(why);
    }
    status
}

/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_run_summary(run: *const SgRun, out: *mut SgSummary) -> SgStatus {
    guard(|| {
        let tr = &deref(run, "run")?.trace;
        let s = &tr.summary;
        let ratio = s
            .min_clearance
            .iter()
            .zip(&tr.obstacle_radii)
            .map(|(c, r)| c / r)
            .fold(f64::INFINITY, f64::min);
        let summary = SgSummary {
            outcome: outcome(&s.outcome),
            arrival_time: s.arrival_time.unwrap_or(f64::NAN),
            final_time: s.final_time,
            final_distance: s.final_distance,
            path_length: s.path_length,
            max_z_p: s.max_z_p,
            min_clearance_ratio: ratio,
            waypoints: s.waypoints as u32,
            segments: s.segments as u32,
            max_junction_mismatch: s.max_junction_mismatch,
        };
        store(out, summary, "out")
    })
}

/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_run_row_count(run: *const SgRun, out: *mut usize) -> SgStatus {
    guard(|| {
        let r = deref(run, "run")?;
        store(out, r.trace.rows.len(), "out")
    })
}

/// Own-ship pose at trace row `index`.
///
/// # Safety
/// Pointers must be valid or NULL; `psi` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_run_position(
    run: *const SgRun,
    index: usize,
    x: *mut f64,
    y: *mut f64,
    psi: *mut f64,
) -> SgStatus {
    guard(|| {
        let rows = &deref(run, "run")?.trace.rows;
        let row = rows.get(index).ok_or_else(|| {
            (
                SgStatus::OutOfRange,
                format!("row {index} out of range ({} rows)", rows.len()),
            )
        })?;
        store(x, row.position[0], "x")?;
        store(y, row.position[1], "y")?;
        if !psi.is_null() {
            psi.write(row.psi);
        }
        Ok(())
    })
}

/// Write the tick trace as CSV.
///
/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_run_write_trace(run: *const SgRun, path: *const c_char) -> SgStatus {
    guard(|| {
        let r = deref(run, "run")?;
        let p = text(path, "path")?;
        let f = File::create(p).map_err(|e| (SgStatus::Io, format!("{p}: {e}")))?;
        write_trace(&r.trace, BufWriter::new(f)).map_err(|e| (SgStatus::Io, format!("{p}: {e}")))
    })
}
