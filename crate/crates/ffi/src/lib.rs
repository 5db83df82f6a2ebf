//! C ABI over `ecas-core`.
//!
//! Objects are opaque handles created by `ecas_*_new`/`_load`/`_run`
//! functions and released with the matching `_free`. Every fallible call
//! returns an [`EcasStatus`]; on failure [`ecas_last_error_message`] holds a
//! description until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ecas_core::channel::{self, ChannelParams};
use ecas_core::control::{PolicyKind, PolicyState};
use ecas_core::harness::{self, ExperimentSpec, SweepResult};
use ecas_core::phy::{self, RadioConfig};
use ecas_core::sim::{run_round, RoundConfig};
use ecas_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcasStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    CalibrationFailed = 3,
    UnknownSensor = 4,
    UnknownZone = 5,
    Parse = 6,
    Config = 7,
    Io = 8,
    InvalidUtf8 = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcasPolicy {
    Fixed = 0,
    Conservative = 1,
    Aggressive = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EcasTotals {
    pub sent: u64,
    pub received: u64,
    pub lost: u64,
    /// Delivered / sent; 0 when nothing was sent.
    pub pdr: f64,
}

/// Channel parameters.
pub struct EcasParams(ChannelParams);

/// Result of a policy sweep.
pub struct EcasSweep(SweepResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(EcasStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) => EcasStatus::InvalidArgument,
            Error::CalibrationFailed { .. } => EcasStatus::CalibrationFailed,
            Error::UnknownSensor(_) => EcasStatus::UnknownSensor,
            Error::UnknownZone(_) => EcasStatus::UnknownZone,
            Error::Parse { .. } => EcasStatus::Parse,
            Error::Config(_) => EcasStatus::Config,
            Error::Io { .. } => EcasStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(EcasStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EcasStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EcasStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            EcasStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(EcasStatus::InvalidUtf8, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn policy_kind(policy: EcasPolicy, fixed_dr: u8) -> Result<PolicyKind, Failure> {
    Ok(match policy {
        EcasPolicy::Fixed => PolicyKind::Fixed(phy::dr_profile(fixed_dr)?.dr_index()),
        EcasPolicy::Conservative => PolicyKind::Conservative,
        EcasPolicy::Aggressive => PolicyKind::Aggressive,
    })
}

fn totals(sent: u64, received: u64) -> EcasTotals {
    EcasTotals {
        sent,
        received,
        lost: sent - received,
        pdr: if sent == 0 { 0.0 } else { received as f64 / sent as f64 },
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ecas_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ecas_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Calibrates channel parameters against the built-in link milestones.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ecas_params_calibrate(out: *mut *mut EcasParams) -> EcasStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let p = channel::calibrate(&channel::reference_milestones(), &RadioConfig::default())?;
        *out = Box::into_raw(Box::new(EcasParams(p)));
        Ok(())
    })
}

/// Loads a channel parameter file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecas_params_load(path: *const c_char, out: *mut *mut EcasParams) -> EcasStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(EcasParams(channel::read_params(&path)?)));
        Ok(())
    })
}

/// # Safety
/// `params` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ecas_params_save(params: *const EcasParams, path: *const c_char) -> EcasStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        channel::write_params(&path_arg(path, "path")?, &p.0)?;
        Ok(())
    })
}

/// # Safety
/// `params` must come from this library and not be used afterwards. Null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn ecas_params_free(params: *mut EcasParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Link margin in dB for a DR, distance and rain rate with default radio
/// settings. Non-negative means the packet is received.
///
/// # Safety
/// `params` must come from this library; `out_margin_db` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecas_link_margin(
    params: *const EcasParams,
    dr: u8,
    distance_m: f64,
    rain_mm_h: f64,
    out_margin_db: *mut f64,
) -> EcasStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let out = out_ptr(out_margin_db, "out_margin_db")?;
        *out = channel::link_margin(dr, distance_m, rain_mm_h, &RadioConfig::default(), &p.0)?;
        Ok(())
    })
}

/// Airtime in seconds of a `payload_bytes` packet at `dr`.
///
/// # Safety
/// `out_seconds` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecas_time_on_air(dr: u8, payload_bytes: u16, out_seconds: *mut f64) -> EcasStatus {
    guard(|| {
        let out = out_ptr(out_seconds, "out_seconds")?;
        let cfg = RadioConfig {
            payload_bytes,
            ..RadioConfig::default()
        };
        cfg.validate()?;
        *out = phy::time_on_air(phy::dr_profile(dr)?, &cfg);
        Ok(())
    })
}

/// Runs one round of the default three-sensor deployment with a fresh
/// policy. `fixed_dr` is only read for [`EcasPolicy::Fixed`].
///
/// # Safety
/// `params` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecas_round_run(
    params: *const EcasParams,
    policy: EcasPolicy,
    fixed_dr: u8,
    rain_mm_h: f64,
    duration_s: f64,
    out: *mut EcasTotals,
) -> EcasStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let out = out_ptr(out, "out")?;
        let kind = policy_kind(policy, fixed_dr)?;
        let spec = ExperimentSpec::default();
        let sensors = spec.sensors();
        let state = PolicyState::new(kind, &sensors, &spec.radio, &p.0)?
            .with_loss_trigger(spec.aggressive_loss_trigger);
        let (stats, _) = run_round(RoundConfig::new(rain_mm_h, duration_s, sensors, p.0.clone()), state)?;
        *out = totals(stats.sent(), stats.received());
        Ok(())
    })
}

/// Runs a sweep. `spec_path` may be null for the default experiment; the
/// spec's own channel source is ignored in favour of `params`.
///
/// # Safety
/// `params` must come from this library; `spec_path` must be null or
/// NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecas_sweep_run(
    params: *const EcasParams,
    spec_path: *const c_char,
    out: *mut *mut EcasSweep,
) -> EcasStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let out = out_ptr(out, "out")?;
        let spec = if spec_path.is_null() {
            ExperimentSpec::default()
        } else {
            ExperimentSpec::read(&path_arg(spec_path, "spec_path")?)?
        };
        let result = harness::run_sweep(&spec, &p.0)?;
        *out = Box::into_raw(Box::new(EcasSweep(result)));
        Ok(())
    })
}

/// Number of policies in the sweep; 0 for a null handle.
///
/// # Safety
/// `sweep` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn ecas_sweep_policy_count(sweep: *const EcasSweep) -> usize {
    sweep.as_ref().map_or(0, |s| s.0.policies.len())
}

/// Aggregate totals of the `index`-th policy.
///
/// # Safety
/// `sweep` must come from this library; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecas_sweep_policy_totals(
    sweep: *const EcasSweep,
    index: usize,
    out_policy: *mut EcasPolicy,
    out_fixed_dr: *mut u8,
    out_totals: *mut EcasTotals,
) -> EcasStatus {
    guard(|| {
        let s = sweep.as_ref().ok_or_else(|| null("sweep"))?;
        let (policy, dr, t) = (
            out_ptr(out_policy, "out_policy")?,
            out_ptr(out_fixed_dr, "out_fixed_dr")?,
            out_ptr(out_totals, "out_totals")?,
        );
        let r = s.0.policies.get(index).ok_or_else(|| {
            Failure(
                EcasStatus::InvalidArgument,
                format!("policy index {index} out of range ({} policies)", s.0.policies.len()),
            )
        })?;
        (*policy, *dr) = match r.kind {
            PolicyKind::Fixed(d) => (EcasPolicy::Fixed, d),
            PolicyKind::Conservative => (EcasPolicy::Conservative, 0),
            PolicyKind::Aggressive => (EcasPolicy::Aggressive, 0),
        };
        *t = totals(r.sent(), r.received());
        Ok(())
    })
}

/// Writes the CSV/SVG report set into `dir`.
///
/// # Safety
/// `sweep` must come from this library; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ecas_sweep_write_reports(sweep: *const EcasSweep, dir: *const c_char) -> EcasStatus {
    guard(|| {
        let s = sweep.as_ref().ok_or_else(|| null("sweep"))?;
        harness::emit_reports(&s.0, &path_arg(dir, "dir")?)?;
        Ok(())
    })
}

/// # Safety
/// `sweep` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn ecas_sweep_free(sweep: *mut EcasSweep) {
    if !sweep.is_null() {
        drop(Box::from_raw(sweep));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_handle_an_empty_round() {
        assert_eq!(totals(0, 0).pdr, 0.0);
        let t = totals(4, 3);
        assert_eq!((t.lost, t.pdr), (1, 0.75));
    }

    #[test]
    fn panics_become_a_status() {
        assert_eq!(guard(|| panic!("boom")), EcasStatus::Panic);
        let msg = unsafe { CStr::from_ptr(ecas_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic");
    }

    #[test]
    fn core_errors_map_to_codes() {
        let f: Failure = Error::Config("x".into()).into();
        assert_eq!(f.0, EcasStatus::Config);
        assert!(policy_kind(EcasPolicy::Fixed, 6).is_err());
        assert_eq!(policy_kind(EcasPolicy::Fixed, 2).ok(), Some(PolicyKind::Fixed(2)));
    }
}
