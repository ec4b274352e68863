//! C ABI for the tlr-esc controllers, surrogate plant and scenario runner.
//!
//! Conventions:
//! - every fallible function returns a [`TlrStatus`]; results come back
//!   through out-pointers that are written on success, and on
//!   `TLR_STATUS_INPUT_DOMAIN` from step functions that hold their output
//! - the message for the most recent failure on the calling thread is
//!   available from [`tlr_last_error_message`]
//! - handles are opaque and must be released with their `_free` function
//! - panics never cross the boundary; they surface as `TLR_STATUS_PANIC`

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tlr_esc::baseline::{activation_step, onoff_step, ActivationParams, OnOffParams};
use tlr_esc::detrend::{DetrendEsc, DetrendParams};
use tlr_esc::harness::run;
use tlr_esc::plant::{Event, Plant, PlantParams, PlantState};
use tlr_esc::runlog::RunLog;
use tlr_esc::scenario::Scenario;
use tlr_esc::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParam = 2,
    InputDomain = 3,
    Structural = 4,
    Estimation = 5,
    Io = 6,
    Format = 7,
    Scenario = 8,
    InvalidUtf8 = 9,
    OutOfRange = 10,
    Panic = 11,
}

impl From<&Error> for TlrStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InputDomain(_) => TlrStatus::InputDomain,
            Error::InvalidParam { .. } => TlrStatus::InvalidParam,
            Error::Structural(_) => TlrStatus::Structural,
            Error::Estimation(_) => TlrStatus::Estimation,
            Error::Format { .. } => TlrStatus::Format,
            Error::Io { .. } => TlrStatus::Io,
            Error::Scenario(_) => TlrStatus::Scenario,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: TlrStatus, msg: impl Into<String>) -> TlrStatus {
    set_error(msg);
    status
}

fn from_err(e: Error) -> TlrStatus {
    let status = TlrStatus::from(&e);
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> TlrStatus) -> TlrStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(TlrStatus::Panic, "internal panic"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, TlrStatus> {
    if p.is_null() {
        return Err(fail(TlrStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TlrStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

macro_rules! deref_mut {
    ($p:expr, $name:literal) => {
        match $p.as_mut() {
            Some(v) => v,
            None => return fail(TlrStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

macro_rules! deref {
    ($p:expr, $name:literal) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(TlrStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

/// Message for the last failure on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tlr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn tlr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// Baseline step functions --------------------------------------------------

/// One on-off hysteresis step. Writes the new injecting flag and the flow.
/// A non-finite `ph` holds the previous flag and reports `TLR_STATUS_INPUT_DOMAIN`
/// after still writing the held outputs.
///
/// # Safety
/// `out_injecting` and `out_q` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tlr_onoff_step(
    injecting: bool,
    ph: f64,
    ph_sp: f64,
    band: f64,
    q_on: f64,
    out_injecting: *mut bool,
    out_q: *mut f64,
) -> TlrStatus {
    guard(|| {
        let out_injecting = deref_mut!(out_injecting, "out_injecting");
        let out_q = deref_mut!(out_q, "out_q");
        let params = OnOffParams { ph_sp, band, q_on };
        if let Err(e) = params.validate() {
            return from_err(e);
        }
        let (out, q) = onoff_step(injecting, ph, &params);
        *out_injecting = out.injecting;
        *out_q = q;
        if out.fault {
            fail(TlrStatus::InputDomain, "ph must be finite")
        } else {
            TlrStatus::Ok
        }
    })
}

/// One irradiance activation step.
///
/// # Safety
/// `out_active` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tlr_activation_step(
    active: bool,
    irradiance: f64,
    i_on: f64,
    i_off: f64,
    out_active: *mut bool,
) -> TlrStatus {
    guard(|| {
        let out_active = deref_mut!(out_active, "out_active");
        let params = ActivationParams { i_on, i_off };
        if let Err(e) = params.validate() {
            return from_err(e);
        }
        if !irradiance.is_finite() {
            return fail(TlrStatus::InputDomain, "irradiance must be finite");
        }
        *out_active = activation_step(active, irradiance, &params).0;
        TlrStatus::Ok
    })
}

// Detrending ESC -----------------------------------------------------------

/// Opaque detrending ESC controller.
pub struct TlrDetrendEsc(DetrendEsc);

/// Step output of the detrending ESC.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TlrDetrendOutput {
    pub q_cmd: f64,
    pub q_raw: f64,
    pub q_ff: f64,
    pub theta_hat: f64,
    pub zeta_hat: f64,
    pub residual: f64,
    pub saturated: bool,
    pub fault: bool,
}

/// Create a controller from JSON parameters (null or `"{}"` for defaults).
/// The JSON object uses the same fields as the scenario `controller` entry
/// without its `type` tag.
///
/// # Safety
/// `params_json` must be null or a NUL-terminated string; `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tlr_detrend_new(
    params_json: *const c_char,
    out: *mut *mut TlrDetrendEsc,
) -> TlrStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        let params = if params_json.is_null() {
            DetrendParams::default()
        } else {
            let text = match str_arg(params_json, "params_json") {
                Ok(t) => t,
                Err(s) => return s,
            };
            match serde_json::from_str::<DetrendParams>(text) {
                Ok(p) => p,
                Err(e) => return fail(TlrStatus::InvalidParam, e.to_string()),
            }
        };
        match DetrendEsc::new(params) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(TlrDetrendEsc(c)));
                TlrStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// # Safety
/// `handle` must be null or come from [`tlr_detrend_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tlr_detrend_free(handle: *mut TlrDetrendEsc) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Advance one sample with the measured pH and irradiance.
///
/// # Safety
/// `handle` must be a live controller; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tlr_detrend_step(
    handle: *mut TlrDetrendEsc,
    ph: f64,
    irradiance: f64,
    out: *mut TlrDetrendOutput,
) -> TlrStatus {
    guard(|| {
        let ctl = &mut deref_mut!(handle, "handle").0;
        let out = deref_mut!(out, "out");
        let o = ctl.step(ph, irradiance);
        *out = TlrDetrendOutput {
            q_cmd: o.q_cmd,
            q_raw: o.q_raw,
            q_ff: o.q_ff,
            theta_hat: ctl.state().theta_hat,
            zeta_hat: ctl.state().zeta_hat,
            residual: o.residual,
            saturated: o.saturated,
            fault: o.fault,
        };
        if o.fault {
            fail(
                TlrStatus::InputDomain,
                "non-finite measurement; previous command held",
            )
        } else {
            TlrStatus::Ok
        }
    })
}

/// Reset for an inactive-to-active transition.
///
/// # Safety
/// `handle` must be a live controller.
#[no_mangle]
pub unsafe extern "C" fn tlr_detrend_activation_reset(handle: *mut TlrDetrendEsc) -> TlrStatus {
    guard(|| {
        deref_mut!(handle, "handle").0.activation_reset();
        TlrStatus::Ok
    })
}

/// Advance the controller clock while inactive.
///
/// # Safety
/// `handle` must be a live controller.
#[no_mangle]
pub unsafe extern "C" fn tlr_detrend_idle(handle: *mut TlrDetrendEsc) -> TlrStatus {
    guard(|| {
        deref_mut!(handle, "handle").0.idle();
        TlrStatus::Ok
    })
}

// Surrogate plant ----------------------------------------------------------

/// Opaque surrogate reactor.
pub struct TlrPlant(Plant);

/// Create a plant from JSON parameters (null for defaults) and an initial state.
///
/// # Safety
/// `params_json` must be null or a NUL-terminated string; `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tlr_plant_new(
    params_json: *const c_char,
    ph: f64,
    biomass: f64,
    out: *mut *mut TlrPlant,
) -> TlrStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        let params = if params_json.is_null() {
            PlantParams::default()
        } else {
            let text = match str_arg(params_json, "params_json") {
                Ok(t) => t,
                Err(s) => return s,
            };
            match serde_json::from_str::<PlantParams>(text) {
                Ok(p) => p,
                Err(e) => return fail(TlrStatus::InvalidParam, e.to_string()),
            }
        };
        match Plant::new(params, PlantState::new(ph, biomass)) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(TlrPlant(p)));
                TlrStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// # Safety
/// `handle` must be null or come from [`tlr_plant_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tlr_plant_free(handle: *mut TlrPlant) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Advance the plant by `dt` seconds under constant flow and irradiance.
///
/// # Safety
/// `handle` must be a live plant.
#[no_mangle]
pub unsafe extern "C" fn tlr_plant_step(
    handle: *mut TlrPlant,
    q_co2: f64,
    irradiance: f64,
    dt: f64,
) -> TlrStatus {
    guard(
        || match deref_mut!(handle, "handle").0.step(q_co2, irradiance, dt) {
            Ok(()) => TlrStatus::Ok,
            Err(e) => from_err(e),
        },
    )
}

/// Noisy sensor reading of the current pH.
///
/// # Safety
/// `handle` must be a live plant; `out_ph` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tlr_plant_measure(handle: *mut TlrPlant, out_ph: *mut f64) -> TlrStatus {
    guard(|| {
        let plant = &mut deref_mut!(handle, "handle").0;
        *deref_mut!(out_ph, "out_ph") = plant.measure();
        TlrStatus::Ok
    })
}

/// Noise-free state: pH, biomass [g/L] and time [s].
///
/// # Safety
/// `handle` must be a live plant; the out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tlr_plant_state(
    handle: *const TlrPlant,
    out_ph: *mut f64,
    out_biomass: *mut f64,
    out_t: *mut f64,
) -> TlrStatus {
    guard(|| {
        let s = *deref!(handle, "handle").0.state();
        *deref_mut!(out_ph, "out_ph") = s.ph;
        *deref_mut!(out_biomass, "out_biomass") = s.biomass;
        *deref_mut!(out_t, "out_t") = s.t;
        TlrStatus::Ok
    })
}

/// Remove `fraction` of the culture and refill with fresh medium.
///
/// # Safety
/// `handle` must be a live plant.
#[no_mangle]
pub unsafe extern "C" fn tlr_plant_dilute(handle: *mut TlrPlant, fraction: f64) -> TlrStatus {
    guard(|| {
        match deref_mut!(handle, "handle")
            .0
            .apply_event(&Event::Dilution { fraction })
        {
            Ok(()) => TlrStatus::Ok,
            Err(e) => from_err(e),
        }
    })
}

/// Start (`failed = true`) or end an actuator communication failure.
///
/// # Safety
/// `handle` must be a live plant.
#[no_mangle]
pub unsafe extern "C" fn tlr_plant_set_comms_failed(
    handle: *mut TlrPlant,
    failed: bool,
) -> TlrStatus {
    guard(|| {
        let event = if failed {
            Event::CommsFailureStart
        } else {
            Event::CommsFailureEnd
        };
        match deref_mut!(handle, "handle").0.apply_event(&event) {
            Ok(()) => TlrStatus::Ok,
            Err(e) => from_err(e),
        }
    })
}

// Scenario runs ------------------------------------------------------------

/// Opaque closed-loop run log.
pub struct TlrRunLog(RunLog);

/// One log row. Controller internals the controller does not have are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TlrLogRow {
    pub t: f64,
    pub irradiance: f64,
    pub ph: f64,
    pub q_cmd: f64,
    pub q_applied: f64,
    pub theta_hat: f64,
    pub zeta_hat: f64,
    pub trend_or_eta: f64,
    pub q_ff: f64,
    pub active: bool,
    pub fault: bool,
}

fn finish_run(
    scenario: std::result::Result<Scenario, Error>,
    out: &mut *mut TlrRunLog,
) -> TlrStatus {
    match scenario.and_then(|s| run(&s)) {
        Ok(log) => {
            *out = Box::into_raw(Box::new(TlrRunLog(log)));
            TlrStatus::Ok
        }
        Err(e) => from_err(e),
    }
}

/// Run a scenario given as JSON text. Trace irradiance files resolve
/// relative to the working directory.
///
/// # Safety
/// `scenario_json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tlr_run_scenario_json(
    scenario_json: *const c_char,
    out: *mut *mut TlrRunLog,
) -> TlrStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        let text = match str_arg(scenario_json, "scenario_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        finish_run(Scenario::from_json(text), out)
    })
}

/// Run a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tlr_run_scenario_file(
    path: *const c_char,
    out: *mut *mut TlrRunLog,
) -> TlrStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        let path = match str_arg(path, "path") {
            Ok(t) => t,
            Err(s) => return s,
        };
        finish_run(Scenario::load(Path::new(path)), out)
    })
}

/// # Safety
/// `handle` must be null or come from a run function and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tlr_runlog_free(handle: *mut TlrRunLog) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live run log.
#[no_mangle]
pub unsafe extern "C" fn tlr_runlog_len(handle: *const TlrRunLog) -> usize {
    handle.as_ref().map_or(0, |l| l.0.rows.len())
}

/// Copy row `index` into `out`.
///
/// # Safety
/// `handle` must be a live run log; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tlr_runlog_row(
    handle: *const TlrRunLog,
    index: usize,
    out: *mut TlrLogRow,
) -> TlrStatus {
    guard(|| {
        let log = &deref!(handle, "handle").0;
        let out = deref_mut!(out, "out");
        let Some(r) = log.rows.get(index) else {
            return fail(
                TlrStatus::OutOfRange,
                format!("row {index} out of range (len {})", log.rows.len()),
            );
        };
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *out = TlrLogRow {
            t: r.t,
            irradiance: r.irradiance,
            ph: r.ph,
            q_cmd: r.q_cmd,
            q_applied: r.q_applied,
            theta_hat: nan(r.theta_hat),
            zeta_hat: nan(r.zeta_hat),
            trend_or_eta: nan(r.trend_or_eta),
            q_ff: nan(r.q_ff),
            active: r.active,
            fault: r.fault,
        };
        TlrStatus::Ok
    })
}

/// Write the log as CSV, in the same format as the command-line tool.
///
/// # Safety
/// `handle` must be a live run log; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tlr_runlog_write_csv(
    handle: *const TlrRunLog,
    path: *const c_char,
) -> TlrStatus {
    guard(|| {
        let log = &deref!(handle, "handle").0;
        let path = match str_arg(path, "path") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match log.save(Path::new(path)) {
            Ok(()) => TlrStatus::Ok,
            Err(e) => from_err(e),
        }
    })
}
