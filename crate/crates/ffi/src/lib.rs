//! C ABI over the nfbeam library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! style functions and released with the matching `*_free`. Every fallible
//! call returns an [`NfbStatus`]; the message for the most recent failure on
//! the calling thread is available from [`nfb_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nfbeam::geometry::{ChannelMode, Scenario};
use nfbeam::harness::output::{summary_path, write_results, write_summary};
use nfbeam::harness::{
    aggregate, run_sweep, run_trial, sample_scenario, ExperimentConfig, SolverKind, SweepAxis, TrialRecord,
};
use nfbeam::metrics::{hardware_power, phase_split, PowerModel, StreamSelection};
use nfbeam::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Numerical = 5,
    Panic = 6,
}

pub struct NfbConfig {
    inner: ExperimentConfig,
}

pub struct NfbScenario {
    inner: Scenario,
    seed: u64,
}

pub struct NfbTrialResult {
    inner: TrialRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> NfbStatus {
    match e {
        Error::Io { .. } | Error::Csv { .. } => NfbStatus::Io,
        Error::Config(_) => NfbStatus::Config,
        Error::InvalidArgument(_) | Error::Dimension(_) | Error::UserIndex { .. } => NfbStatus::InvalidArgument,
        Error::NotPositiveSemidefinite { .. } | Error::Singular(_) | Error::ZeroMatrix => NfbStatus::Numerical,
    }
}

fn fail(status: NfbStatus, msg: impl Into<String>) -> NfbStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), NfbStatus>) -> NfbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NfbStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(NfbStatus::Panic, "internal panic"),
    }
}

fn lib(e: Error) -> NfbStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, NfbStatus> {
    if p.is_null() {
        return Err(fail(NfbStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(NfbStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, NfbStatus> {
    p.as_ref()
        .ok_or_else(|| fail(NfbStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, NfbStatus> {
    p.as_mut()
        .ok_or_else(|| fail(NfbStatus::NullPointer, format!("{what} is null")))
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating if needed. Returns the full message
/// length in bytes, not counting the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn nfb_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn nfb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New configuration holding the desk defaults. Never null.
#[no_mangle]
pub extern "C" fn nfb_config_new() -> *mut NfbConfig {
    Box::into_raw(Box::new(NfbConfig {
        inner: ExperimentConfig::default(),
    }))
}

/// Loads a `key = value` configuration file.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nfb_config_load(path: *const c_char, out: *mut *mut NfbConfig) -> NfbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let path = text(path, "path")?;
        let inner = ExperimentConfig::load(Path::new(path)).map_err(lib)?;
        *out = Box::into_raw(Box::new(NfbConfig { inner }));
        Ok(())
    })
}

/// Sets one configuration key. Accepts the file keys plus `solver`
/// (`wmmse-ts`, `pli`, `fixed`) and `channel` (`near`, `far`).
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be valid C
/// strings.
#[no_mangle]
pub unsafe extern "C" fn nfb_config_set(cfg: *mut NfbConfig, key: *const c_char, value: *const c_char) -> NfbStatus {
    guard(|| {
        let cfg = out_ptr(cfg, "cfg")?;
        let key = text(key, "key")?;
        let value = text(value, "value")?;
        let mut next = cfg.inner.clone();
        match key {
            "solver" => next.solver = value.parse::<SolverKind>().map_err(lib)?,
            "channel" => next.channel = value.parse::<ChannelMode>().map_err(lib)?,
            _ => next.set(key, value).map_err(lib)?,
        }
        next.validate().map_err(lib)?;
        cfg.inner = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nfb_config_free(cfg: *mut NfbConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Draws a random scenario from the configuration and `seed`.
///
/// # Safety
/// `cfg` must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nfb_scenario_sample(
    cfg: *const NfbConfig,
    seed: u64,
    out: *mut *mut NfbScenario,
) -> NfbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let cfg = handle(cfg, "cfg")?;
        let inner = sample_scenario(&cfg.inner, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(lib)?;
        *out = Box::into_raw(Box::new(NfbScenario { inner, seed }));
        Ok(())
    })
}

/// Number of users, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nfb_scenario_num_users(scenario: *const NfbScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.num_users())
}

/// # Safety
/// `scenario` must be null or come from this library and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn nfb_scenario_free(scenario: *mut NfbScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the configured solver on a scenario.
///
/// # Safety
/// Handles must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nfb_trial_run(
    scenario: *const NfbScenario,
    cfg: *const NfbConfig,
    out: *mut *mut NfbTrialResult,
) -> NfbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let s = handle(scenario, "scenario")?;
        let cfg = handle(cfg, "cfg")?;
        let r = run_trial(&s.inner, &cfg.inner, s.seed, false).map_err(lib)?;
        *out = Box::into_raw(Box::new(NfbTrialResult { inner: r.record }));
        Ok(())
    })
}

/// Sum rate in bit/s/Hz; 0 for a null handle.
///
/// # Safety
/// `result` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nfb_trial_sum_rate(result: *const NfbTrialResult) -> f64 {
    result.as_ref().map_or(0.0, |r| r.inner.sum_rate)
}

/// Network objective; 0 for a null handle.
///
/// # Safety
/// `result` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nfb_trial_objective(result: *const NfbTrialResult) -> f64 {
    result.as_ref().map_or(0.0, |r| r.inner.objective)
}

/// Hardware power in watts; 0 for a null handle.
///
/// # Safety
/// `result` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nfb_trial_hpc(result: *const NfbTrialResult) -> f64 {
    result.as_ref().map_or(0.0, |r| r.inner.hpc_w)
}

/// Transmit power in watts; 0 for a null handle.
///
/// # Safety
/// `result` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nfb_trial_tx_power(result: *const NfbTrialResult) -> f64 {
    result.as_ref().map_or(0.0, |r| r.inner.tx_power_w)
}

/// Number of active streams, equal to the active RF chains; 0 for a null handle.
///
/// # Safety
/// `result` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nfb_trial_streams(result: *const NfbTrialResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.t_s)
}

/// Copies up to `len` per-user rates into `buf` and returns the number of
/// users.
///
/// # Safety
/// `result` must be null or come from this library; `buf` must be null or
/// hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nfb_trial_rates(result: *const NfbTrialResult, buf: *mut f64, len: usize) -> usize {
    let Some(r) = result.as_ref() else { return 0 };
    if !buf.is_null() {
        let n = r.inner.rates.len().min(len);
        ptr::copy_nonoverlapping(r.inner.rates.as_ptr(), buf, n);
    }
    r.inner.rates.len()
}

/// # Safety
/// `result` must be null or come from this library and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn nfb_trial_free(result: *mut NfbTrialResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Splits `amplitude * e^{j phase}`, amplitude in `[0, 2]`, into two unit
/// phasors. `out` receives `re1, im1, re2, im2`.
///
/// # Safety
/// `out` must point to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nfb_phase_split(amplitude: f64, phase: f64, out: *mut f64) -> NfbStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(NfbStatus::NullPointer, "out is null"));
        }
        let (a, b) = phase_split(amplitude, phase).map_err(lib)?;
        let vals = [a.re, a.im, b.re, b.im];
        ptr::copy_nonoverlapping(vals.as_ptr(), out, 4);
        Ok(())
    })
}

/// Hardware power of `streams` active RF chains on an `mt`-antenna array.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn nfb_hardware_power(
    mt: usize,
    streams: usize,
    rf_chain_watts: f64,
    shifter_watts: f64,
    out: *mut f64,
) -> NfbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = PowerModel::new(rf_chain_watts, shifter_watts, 1.0).map_err(lib)?;
        let sel = StreamSelection::all(1, streams, true);
        *out = hardware_power(&sel, &model, mt);
        Ok(())
    })
}

/// Runs a sweep over `axis` (`p_max_dbm`, `beta`, `mu`, `bits`, `distance`)
/// and writes the per-trial CSV to `path` plus the summary next to it.
/// Completed trials are written even when a trial fails.
///
/// # Safety
/// `cfg` must come from this library, `axis` and `path` must be valid C
/// strings and `values` must hold `count` doubles.
#[no_mangle]
pub unsafe extern "C" fn nfb_sweep_to_csv(
    cfg: *const NfbConfig,
    axis: *const c_char,
    values: *const f64,
    count: usize,
    path: *const c_char,
) -> NfbStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let axis: SweepAxis = text(axis, "axis")?.parse().map_err(lib)?;
        let path = Path::new(text(path, "path")?);
        if values.is_null() {
            return Err(fail(NfbStatus::NullPointer, "values is null"));
        }
        let values = std::slice::from_raw_parts(values, count);
        let res = run_sweep(&cfg.inner, axis, values, false).map_err(lib)?;
        let k = cfg.inner.k_users;
        write_results(path, &res.records, k).map_err(lib)?;
        write_summary(&summary_path(path), &aggregate(&res.records), k).map_err(lib)?;
        match res.failure {
            Some(e) => Err(lib(e)),
            None => Ok(()),
        }
    })
}
