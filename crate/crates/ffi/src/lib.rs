//! C ABI over the simulator.
//!
//! Every fallible entry point returns a [`GfmaStatus`]; on failure the
//! message is available from [`gfma_last_error`] on the same thread.
//! Configurations are opaque handles owned by the caller and released with
//! [`gfma_config_free`]. Strings handed out by the library are released
//! with [`gfma_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::OnceLock;

use gfma::harness::{run, sweep, Scheme, Simulation, SweepVar};
use gfma::{Error, SystemConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfmaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Bad configuration key, value or file contents.
    Config = 3,
    /// A numerical stage failed (singular system, divergence, ...).
    Numeric = 4,
    Io = 5,
    /// Any other rejected argument.
    InvalidArgument = 6,
    /// An internal panic was caught.
    Panic = 7,
}

/// Opaque configuration handle.
pub struct GfmaConfig {
    config: SystemConfig,
    sim: OnceLock<Simulation>,
}

impl GfmaConfig {
    fn new(config: SystemConfig) -> Self {
        Self {
            config,
            sim: OnceLock::new(),
        }
    }

    fn simulation(&self) -> Result<&Simulation, Error> {
        if let Some(sim) = self.sim.get() {
            return Ok(sim);
        }
        let sim = Simulation::new(self.config.clone())?;
        Ok(self.sim.get_or_init(|| sim))
    }
}

/// Scores of one simulated frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GfmaTrialMetrics {
    pub trial: u64,
    pub seed: u64,
    pub adep: f64,
    pub ber: f64,
    /// Linear CSI NMSE; NaN when the scheme estimates no CSI.
    pub nmse: f64,
    /// BER after the coarse stage; NaN for baselines.
    pub coarse_ber: f64,
    pub ka_hat: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(GfmaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::UnsupportedOrder(_)
            | Error::InvalidConfig(_)
            | Error::ConfigParse { .. }
            | Error::UnknownKey(_)
            | Error::NonPositiveDistance(_) => GfmaStatus::Config,
            Error::NumericalDivergence { .. }
            | Error::EmptyActiveSet
            | Error::Overdetermined { .. }
            | Error::SingularSystem => GfmaStatus::Numeric,
            Error::Io(_) => GfmaStatus::Io,
            Error::ShapeMismatch(_) | Error::Stage { .. } => GfmaStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GfmaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            GfmaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            GfmaStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(GfmaStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(GfmaStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(GfmaStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn hand_out(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(GfmaStatus::InvalidArgument, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn new_config(out: *mut *mut GfmaConfig, make: impl FnOnce() -> Result<SystemConfig, Error>) -> GfmaStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let cfg = make()?;
        *out = Box::into_raw(Box::new(GfmaConfig::new(cfg)));
        Ok(())
    })
}

/// Creates a configuration with the laptop-scale profile.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn gfma_config_new_desk(out: *mut *mut GfmaConfig) -> GfmaStatus {
    new_config(out, || Ok(SystemConfig::desk()))
}

/// Creates a configuration with the full-scale profile.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn gfma_config_new_full(out: *mut *mut GfmaConfig) -> GfmaStatus {
    new_config(out, || Ok(SystemConfig::paper()))
}

/// Reads a `key = value` configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn gfma_config_load(path: *const c_char, out: *mut *mut GfmaConfig) -> GfmaStatus {
    let path = match text(path, "path") {
        Ok(p) => p.to_string(),
        Err(f) => return guard(|| Err(f)),
    };
    new_config(out, || SystemConfig::load(path))
}

/// Sets one key. The configuration is left unchanged when the new value
/// is rejected.
///
/// # Safety
/// `config` must come from a `gfma_config_new_*`/`gfma_config_load` call
/// and not be in use on another thread; `key` and `value` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gfma_config_set(config: *mut GfmaConfig, key: *const c_char, value: *const c_char) -> GfmaStatus {
    guard(|| {
        non_null(config, "config")?;
        let key = text(key, "key")?;
        let value = text(value, "value")?;
        let handle = &mut *config;
        let mut next = handle.config.clone();
        next.set(key, value)?;
        next.validate()?;
        *handle = GfmaConfig::new(next);
        Ok(())
    })
}

/// Writes the configuration in file syntax to `*out`.
///
/// # Safety
/// `config` must be a live handle; `out` valid writable storage. Release
/// the string with `gfma_string_free`.
#[no_mangle]
pub unsafe extern "C" fn gfma_config_to_string(config: *const GfmaConfig, out: *mut *mut c_char) -> GfmaStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(out, "out")?;
        hand_out(out, (*config).config.to_kv_string())
    })
}

/// Releases a configuration handle. Null is ignored.
///
/// # Safety
/// `config` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gfma_config_free(config: *mut GfmaConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Simulates frame `trial` with `scheme` (`proposed`, `baseline1`..`baseline4`).
///
/// # Safety
/// `config` must be a live handle, `scheme` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn gfma_run_trial(
    config: *const GfmaConfig,
    scheme: *const c_char,
    trial: u64,
    out: *mut GfmaTrialMetrics,
) -> GfmaStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(out, "out")?;
        let scheme: Scheme = text(scheme, "scheme")?.parse()?;
        let m = (*config).simulation()?.run_trial(scheme, trial as usize)?;
        *out = GfmaTrialMetrics {
            trial: m.trial as u64,
            seed: m.seed,
            adep: m.adep,
            ber: m.ber,
            nmse: m.nmse,
            coarse_ber: m.coarse_ber.unwrap_or(f64::NAN),
            ka_hat: m.ka_hat as u64,
        };
        Ok(())
    })
}

/// Runs `trials` frames of each comma-separated scheme and writes the CSV
/// table to `*out`.
///
/// # Safety
/// As for `gfma_run_trial`; release `*out` with `gfma_string_free`.
#[no_mangle]
pub unsafe extern "C" fn gfma_run_csv(
    config: *const GfmaConfig,
    schemes: *const c_char,
    trials: u64,
    out: *mut *mut c_char,
) -> GfmaStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(out, "out")?;
        let schemes = Scheme::parse_list(text(schemes, "schemes")?)?;
        let table = run(&(*config).config, &schemes, trials as usize)?;
        hand_out(out, table.to_csv_string())
    })
}

/// Sweeps `var` (`T`, `M`, `rho`, `N_iter` or `scheme`) over the
/// comma-separated `values` and writes the CSV table to `*out`.
///
/// # Safety
/// As for `gfma_run_csv`; all strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gfma_sweep_csv(
    config: *const GfmaConfig,
    var: *const c_char,
    values: *const c_char,
    schemes: *const c_char,
    trials: u64,
    out: *mut *mut c_char,
) -> GfmaStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(out, "out")?;
        let var: SweepVar = text(var, "var")?.parse()?;
        let values: Vec<String> = text(values, "values")?
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(String::from)
            .collect();
        let schemes = Scheme::parse_list(text(schemes, "schemes")?)?;
        let table = sweep(&(*config).config, var, &values, &schemes, trials as usize)?;
        hand_out(out, table.to_csv_string())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gfma_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn gfma_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn gfma_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}
