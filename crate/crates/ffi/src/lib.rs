//! C interface to `cascade-core`.
//!
//! Configurations and ensembles are opaque handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns a
//! [`CascadeStatus`]; on failure a message for the calling thread is available
//! from [`cascade_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use cascade_core::config::RunConfig;
use cascade_core::integrator::TrajectoryOptions;
use cascade_core::observables::{correlation, dicke_reference, fit_timescale, intensities, EnsembleAccumulator};
use cascade_core::runner::{self, SimulateRequest};
use cascade_core::units::{DimensionlessParams, GridSpec, PhysicalConfig};
use cascade_core::SimError;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    Io = 3,
    TooManyDiscarded = 4,
    Observable = 5,
    InvalidArgument = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Run configuration.
pub struct CascadeConfig {
    inner: RunConfig,
}

/// Finished ensemble statistics.
pub struct CascadeEnsemble {
    params: DimensionlessParams,
    acc: EnsembleAccumulator,
}

/// Exponential fit of the correlation section.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CascadeFit {
    pub t_f_ns: f64,
    pub ci_low_ns: f64,
    pub ci_high_ns: f64,
    pub t_m_ns: f64,
    pub points: usize,
    /// Nonzero when a non-positive value cut the window short.
    pub window_shrunk: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &SimError) -> CascadeStatus {
    match err {
        SimError::Config(_) => CascadeStatus::InvalidConfig,
        SimError::Io { .. } | SimError::Checkpoint { .. } => CascadeStatus::Io,
        SimError::TooManyDiscarded { .. } => CascadeStatus::TooManyDiscarded,
        SimError::Observable(_) => CascadeStatus::Observable,
    }
}

fn fail(status: CascadeStatus, msg: impl Into<String>) -> CascadeStatus {
    set_error(msg);
    status
}

fn from_sim(err: SimError) -> CascadeStatus {
    fail(status_of(&err), err.to_string())
}

/// Runs `body`, converting a panic into [`CascadeStatus::Panic`].
fn guard(body: impl FnOnce() -> CascadeStatus) -> CascadeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(CascadeStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, CascadeStatus> {
    if p.is_null() {
        return Err(fail(CascadeStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(CascadeStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn publish<T>(value: T, out: *mut *mut T) -> CascadeStatus {
    unsafe { *out = Box::into_raw(Box::new(value)) };
    CascadeStatus::Ok
}

/// Message describing the last failure on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cascade_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cascade_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cascade_config_from_toml(toml: *const c_char, out: *mut *mut CascadeConfig) -> CascadeStatus {
    guard(|| {
        if out.is_null() {
            return fail(CascadeStatus::NullPointer, "out is null");
        }
        let text = match c_str(toml, "toml") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match RunConfig::from_toml_str(text) {
            Ok(inner) => publish(CascadeConfig { inner }, out),
            Err(e) => from_sim(e.into()),
        }
    })
}

/// Reads a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cascade_config_from_file(path: *const c_char, out: *mut *mut CascadeConfig) -> CascadeStatus {
    guard(|| {
        if out.is_null() {
            return fail(CascadeStatus::NullPointer, "out is null");
        }
        let path = match c_str(path, "path") {
            Ok(t) => PathBuf::from(t),
            Err(s) => return s,
        };
        match RunConfig::from_file(&path) {
            Ok(inner) => publish(CascadeConfig { inner }, out),
            Err(e) => from_sim(e),
        }
    })
}

/// The rubidium operating point at `density_cm3` on a 101 × 42 grid over
/// 140 ns.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cascade_config_operating_point(density_cm3: f64, out: *mut *mut CascadeConfig) -> CascadeStatus {
    guard(|| {
        if out.is_null() {
            return fail(CascadeStatus::NullPointer, "out is null");
        }
        let inner = RunConfig {
            physical: PhysicalConfig::rubidium_cascade(density_cm3),
            grid: GridSpec::new(101, 42, 140.0),
            control: Default::default(),
        };
        match inner.validate() {
            Ok(()) => publish(CascadeConfig { inner }, out),
            Err(e) => from_sim(e.into()),
        }
    })
}

/// Replaces the grid resolution and window.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cascade_config_set_grid(
    config: *mut CascadeConfig,
    time_points: usize,
    space_points: usize,
    total_time_ns: f64,
) -> CascadeStatus {
    guard(|| {
        let Some(cfg) = config.as_mut() else {
            return fail(CascadeStatus::NullPointer, "config is null");
        };
        let mut next = cfg.inner.clone();
        next.grid.time_points = time_points;
        next.grid.space_points = space_points;
        next.grid.total_time_ns = total_time_ns;
        match next.validate() {
            Ok(()) => {
                cfg.inner = next;
                CascadeStatus::Ok
            }
            Err(e) => from_sim(e.into()),
        }
    })
}

/// Atomic density of the configuration in cm⁻³.
///
/// # Safety
/// `config` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cascade_config_density(config: *const CascadeConfig) -> f64 {
    config.as_ref().map_or(f64::NAN, |c| c.inner.physical.density_cm3)
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cascade_config_free(config: *mut CascadeConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs `trajectories` trajectories in memory on `workers` threads.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cascade_ensemble_run(
    config: *const CascadeConfig,
    trajectories: u64,
    seed: u64,
    workers: u32,
    out: *mut *mut CascadeEnsemble,
) -> CascadeStatus {
    guard(|| {
        let Some(cfg) = config.as_ref() else {
            return fail(CascadeStatus::NullPointer, "config is null");
        };
        if out.is_null() {
            return fail(CascadeStatus::NullPointer, "out is null");
        }
        let (_, params) = match cfg.inner.dimensionless() {
            Ok(v) => v,
            Err(e) => return from_sim(e.into()),
        };
        let opts = TrajectoryOptions {
            control: cfg.inner.control,
            ..TrajectoryOptions::default()
        };
        let acc = runner::run_ensemble(&params, &opts, seed, 0..trajectories, workers as usize);
        publish(CascadeEnsemble { params, acc }, out)
    })
}

/// # Safety
/// `ensemble` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cascade_ensemble_free(ensemble: *mut CascadeEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Number of time samples in every series of the ensemble.
///
/// # Safety
/// `ensemble` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cascade_ensemble_time_points(ensemble: *const CascadeEnsemble) -> usize {
    ensemble.as_ref().map_or(0, |e| e.acc.time_points)
}

/// Completed and discarded trajectory counts.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cascade_ensemble_counts(
    ensemble: *const CascadeEnsemble,
    completed: *mut u64,
    discarded: *mut u64,
) -> CascadeStatus {
    guard(|| {
        let Some(e) = ensemble.as_ref() else {
            return fail(CascadeStatus::NullPointer, "ensemble is null");
        };
        if completed.is_null() || discarded.is_null() {
            return fail(CascadeStatus::NullPointer, "output pointer is null");
        }
        *completed = e.acc.trajectories;
        *discarded = e.acc.discarded;
        CascadeStatus::Ok
    })
}

/// Copies the mean intensities (units of E_c²) into five caller arrays of
/// length `len`, which must be at least [`cascade_ensemble_time_points`].
///
/// # Safety
/// Each array must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cascade_ensemble_intensities(
    ensemble: *const CascadeEnsemble,
    time_ns: *mut f64,
    signal_re: *mut f64,
    signal_im: *mut f64,
    idler_re: *mut f64,
    idler_im: *mut f64,
    len: usize,
) -> CascadeStatus {
    guard(|| {
        let Some(e) = ensemble.as_ref() else {
            return fail(CascadeStatus::NullPointer, "ensemble is null");
        };
        let outs = [time_ns, signal_re, signal_im, idler_re, idler_im];
        if outs.iter().any(|p| p.is_null()) {
            return fail(CascadeStatus::NullPointer, "output array is null");
        }
        let n = e.acc.time_points;
        if len < n {
            return fail(
                CascadeStatus::BufferTooSmall,
                format!("arrays hold {len} values, {n} needed"),
            );
        }
        let dt_ns = e.params.dt * e.params.time_unit_ns;
        let ints = match intensities(&e.acc, dt_ns, e.params.signal_unit_factor) {
            Ok(i) => i,
            Err(err) => return from_sim(err),
        };
        let slice = |p: *mut f64| std::slice::from_raw_parts_mut(p, n);
        slice(time_ns).copy_from_slice(&ints.time_ns);
        for (k, (s, i)) in ints.signal.iter().zip(&ints.idler).enumerate() {
            slice(signal_re)[k] = s.re;
            slice(signal_im)[k] = s.im;
            slice(idler_re)[k] = i.re;
            slice(idler_im)[k] = i.im;
        }
        CascadeStatus::Ok
    })
}

/// Fits `e^{-τ/T_f}` to the correlation section from its peak down to
/// `end_fraction` of the peak.
///
/// # Safety
/// `ensemble` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cascade_ensemble_fit(
    ensemble: *const CascadeEnsemble,
    end_fraction: f64,
    out: *mut CascadeFit,
) -> CascadeStatus {
    guard(|| {
        let Some(e) = ensemble.as_ref() else {
            return fail(CascadeStatus::NullPointer, "ensemble is null");
        };
        if out.is_null() {
            return fail(CascadeStatus::NullPointer, "out is null");
        }
        if !(end_fraction > 0.0 && end_fraction < 1.0) {
            return fail(
                CascadeStatus::InvalidArgument,
                format!("end_fraction must lie in (0, 1), got {end_fraction}"),
            );
        }
        let dt_ns = e.params.dt * e.params.time_unit_ns;
        let g = match correlation(&e.acc, dt_ns, e.params.signal_unit_factor) {
            Ok(g) => g,
            Err(err) => return from_sim(err),
        };
        let section: Vec<f64> = g.section.iter().map(|z| z.re).collect();
        match fit_timescale(&section, dt_ns, end_fraction, g.t_m_ns()) {
            Ok(f) => {
                *out = CascadeFit {
                    t_f_ns: f.t_f_ns,
                    ci_low_ns: f.ci_low_ns,
                    ci_high_ns: f.ci_high_ns,
                    t_m_ns: f.t_m_ns,
                    points: f.points,
                    window_shrunk: f.window_shrunk as u8,
                };
                CascadeStatus::Ok
            }
            Err(err) => from_sim(err),
        }
    })
}

/// Runs a checkpointed ensemble and writes all artifacts into `out_dir`.
///
/// # Safety
/// `config` must be a live handle and `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cascade_simulate_to_dir(
    config: *const CascadeConfig,
    trajectories: u64,
    seed: u64,
    workers: u32,
    checkpoint_every: u64,
    out_dir: *const c_char,
) -> CascadeStatus {
    guard(|| {
        let Some(cfg) = config.as_ref() else {
            return fail(CascadeStatus::NullPointer, "config is null");
        };
        let dir = match c_str(out_dir, "out_dir") {
            Ok(d) => PathBuf::from(d),
            Err(s) => return s,
        };
        let req = SimulateRequest {
            config: cfg.inner.clone(),
            trajectories,
            seed,
            workers: workers as usize,
            checkpoint_every,
            out_dir: dir,
        };
        match runner::simulate(&req, |_, _| {}) {
            Ok(_) => CascadeStatus::Ok,
            Err(e) => from_sim(e),
        }
    })
}

/// Dicke reference time `γ03⁻¹ / (Nμ + 1)` in ns.
///
/// # Safety
/// `out_ns` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cascade_dicke_reference(gamma03_per_s: f64, n_mu: f64, out_ns: *mut f64) -> CascadeStatus {
    guard(|| {
        if out_ns.is_null() {
            return fail(CascadeStatus::NullPointer, "out_ns is null");
        }
        match dicke_reference(gamma03_per_s, n_mu) {
            Ok(t) => {
                *out_ns = t;
                CascadeStatus::Ok
            }
            Err(e) => from_sim(e),
        }
    })
}
