//! C ABI for the bolted-joint loosening library: opaque handles, status
//! codes, and flat-array data exchange so other toolchains can evaluate the
//! constitutive models, run simulations, and identify loosening rates.
//!
//! Conventions:
//! - every fallible call returns a [`BoltromStatus`]; `boltrom_last_error_message`
//!   holds a description of the most recent failure on the calling thread;
//! - handles returned through out-pointers are owned by the caller and must
//!   be released with the matching `_free` function;
//! - passing NULL where a handle or out-pointer is required yields
//!   `BOLTROM_STATUS_NULL_ARGUMENT` (pure evaluators return NaN instead).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use boltrom::cli::config::JobConfig;
use boltrom::dynamics::{
    simulate, tension_change, ForceSignal, SimOptions, SystemModel, TensionLaw, Trajectory,
    TensionWindows,
};
use boltrom::error::Error;
use boltrom::identify::{pattern_search, PatternSearchOptions};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoltromStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    ParseError = 3,
    SolverFailure = 4,
    IdentifyFailure = 5,
    InternalError = 6,
}

/// Trajectory columns for `boltrom_trajectory_column`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoltromColumn {
    Time = 0,
    DisplacementLo = 1,
    VelocityLo = 2,
    DisplacementSo = 3,
    VelocitySo = 4,
    Tension = 5,
}

/// Opaque system model handle.
pub struct BoltromModel {
    inner: SystemModel,
}

/// Opaque simulation trajectory handle.
pub struct BoltromTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &Error) -> BoltromStatus {
    match err {
        Error::Validation(_) | Error::Toml(_) => BoltromStatus::ParseError,
        Error::InvalidParameter(_) => BoltromStatus::InvalidArgument,
        Error::NonFiniteState { .. }
        | Error::StepSizeUnderflow { .. }
        | Error::MaxStepsExceeded { .. } => BoltromStatus::SolverFailure,
        Error::SearchFailed(_) | Error::NonFiniteModel(_) => BoltromStatus::IdentifyFailure,
        _ => BoltromStatus::InternalError,
    }
}

fn fail(err: &Error) -> BoltromStatus {
    set_last_error(&err.to_string());
    status_for(err)
}

fn guarded<F: FnOnce() -> BoltromStatus>(f: F) -> BoltromStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            BoltromStatus::InternalError
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn boltrom_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn boltrom_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Build a model from configuration TOML (the same format the command-line
/// tool reads and writes). The loosening law is used when the config carries
/// one; otherwise the tension is frozen.
///
/// # Safety
/// `toml_text` must be a valid NUL-terminated string and `out_model` a valid
/// pointer; the returned handle must be freed with `boltrom_model_free`.
#[no_mangle]
pub unsafe extern "C" fn boltrom_model_from_toml(
    toml_text: *const c_char,
    out_model: *mut *mut BoltromModel,
) -> BoltromStatus {
    guarded(|| {
        if toml_text.is_null() || out_model.is_null() {
            set_last_error("NULL argument");
            return BoltromStatus::NullArgument;
        }
        let text = match CStr::from_ptr(toml_text).to_str() {
            Ok(t) => t,
            Err(_) => {
                set_last_error("configuration text is not valid UTF-8");
                return BoltromStatus::ParseError;
            }
        };
        let config: JobConfig = match toml::from_str_shim(text) {
            Ok(c) => c,
            Err(msg) => {
                set_last_error(&msg);
                return BoltromStatus::ParseError;
            }
        };
        let model = if config.loosening_model.is_some() {
            config.system_model_with_loosening()
        } else {
            config.system_model(TensionLaw::Frozen)
        };
        match model {
            Ok(inner) => {
                *out_model = Box::into_raw(Box::new(BoltromModel { inner }));
                BoltromStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

// toml parsing is done inside the core crate's config loader; expose a thin
// shim so this crate does not need its own toml dependency
mod toml {
    use boltrom::cli::config::JobConfig;

    pub fn from_str_shim(text: &str) -> Result<JobConfig, String> {
        JobConfig::from_toml_str(text).map_err(|e| e.to_string())
    }
}

/// Build a model directly from its parameters. `gamma_d`, `gamma_i`, `rho`
/// are ignored unless `with_loosening` is true.
///
/// # Safety
/// `out_model` must be a valid pointer; free the handle with
/// `boltrom_model_free`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn boltrom_model_new(
    mass_lo: f64,
    stiffness_lo: f64,
    damping_lo: f64,
    mass_so: f64,
    stiffness_so: f64,
    damping_so: f64,
    k_i: f64,
    alpha: f64,
    beta: f64,
    c_d: f64,
    c_i: f64,
    eta: f64,
    with_loosening: bool,
    gamma_d: f64,
    gamma_i: f64,
    rho: f64,
    out_model: *mut *mut BoltromModel,
) -> BoltromStatus {
    use boltrom::dynamics::OscillatorParams;
    use boltrom::joint_models::{DampingModel, LooseningModel, StiffnessModel};
    guarded(|| {
        if out_model.is_null() {
            set_last_error("NULL argument");
            return BoltromStatus::NullArgument;
        }
        let build = || -> Result<SystemModel, Error> {
            let tension_law = if with_loosening {
                TensionLaw::TensionDependent(LooseningModel::new(gamma_d, gamma_i, rho)?)
            } else {
                TensionLaw::Frozen
            };
            Ok(SystemModel {
                lo: OscillatorParams::new(mass_lo, stiffness_lo, damping_lo)?,
                so: OscillatorParams::new(mass_so, stiffness_so, damping_so)?,
                stiffness_model: StiffnessModel::new(k_i, alpha, beta)?,
                damping_model: DampingModel::new(c_d, c_i, eta)?,
                tension_law,
            })
        };
        match build() {
            Ok(inner) => {
                *out_model = Box::into_raw(Box::new(BoltromModel { inner }));
                BoltromStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a model handle. NULL is ignored.
///
/// # Safety
/// `model` must have been returned by a model constructor and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn boltrom_model_free(model: *mut BoltromModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Coupling stiffness k_c(T) in N/m; NaN for a NULL model.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn boltrom_model_stiffness(
    model: *const BoltromModel,
    tension: f64,
) -> f64 {
    match model.as_ref() {
        Some(m) => m.inner.stiffness_model.stiffness(tension),
        None => f64::NAN,
    }
}

/// Coupling damping c_c(T) in Ns/m; NaN for a NULL model.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn boltrom_model_damping(model: *const BoltromModel, tension: f64) -> f64 {
    match model.as_ref() {
        Some(m) => m.inner.damping_model.damping(tension),
        None => f64::NAN,
    }
}

/// Loosening-rate coefficient gamma(T); zero when the model's tension is
/// frozen, the constant when one is set, NaN for a NULL model.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn boltrom_model_loosening_rate(
    model: *const BoltromModel,
    tension: f64,
) -> f64 {
    match model.as_ref() {
        Some(m) => m.inner.tension_law.gamma(tension),
        None => f64::NAN,
    }
}

unsafe fn force_from_arrays(
    force_times: *const f64,
    force_values: *const f64,
    force_len: usize,
) -> Result<ForceSignal, Error> {
    if force_len == 0 {
        return Ok(ForceSignal::zero());
    }
    let times = std::slice::from_raw_parts(force_times, force_len).to_vec();
    let values = std::slice::from_raw_parts(force_values, force_len).to_vec();
    ForceSignal::new(times, values)
}

/// Simulate the coupled system from zero motion and initial tension
/// `preload` over `[t_start, t_end]` under a sampled force record
/// (`force_len` zero means no forcing), sampling the output every
/// `output_dt` seconds.
///
/// # Safety
/// `force_times`/`force_values` must point to `force_len` doubles (or be
/// NULL when `force_len` is zero); `out_trajectory` must be valid and the
/// returned handle freed with `boltrom_trajectory_free`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn boltrom_simulate(
    model: *const BoltromModel,
    force_times: *const f64,
    force_values: *const f64,
    force_len: usize,
    preload: f64,
    t_start: f64,
    t_end: f64,
    output_dt: f64,
    rel_tol: f64,
    abs_tol: f64,
    out_trajectory: *mut *mut BoltromTrajectory,
) -> BoltromStatus {
    guarded(|| {
        let Some(m) = model.as_ref() else {
            set_last_error("NULL model");
            return BoltromStatus::NullArgument;
        };
        if out_trajectory.is_null() || (force_len > 0 && (force_times.is_null() || force_values.is_null())) {
            set_last_error("NULL argument");
            return BoltromStatus::NullArgument;
        }
        let force = match force_from_arrays(force_times, force_values, force_len) {
            Ok(f) => f,
            Err(e) => return fail(&e),
        };
        let opts = SimOptions {
            rel_tol,
            abs_tol,
            output_dt: Some(output_dt),
            include_steps: false,
            max_steps: 50_000_000,
        };
        match simulate(&m.inner, &force, preload, (t_start, t_end), &opts) {
            Ok(inner) => {
                *out_trajectory = Box::into_raw(Box::new(BoltromTrajectory { inner }));
                BoltromStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of samples in a trajectory; zero for NULL.
///
/// # Safety
/// `trajectory` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn boltrom_trajectory_len(trajectory: *const BoltromTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.inner.len())
}

/// Copy one trajectory column into `out` (up to `capacity` values); the
/// number of copied values is written to `out_written`.
///
/// # Safety
/// `out` must point to at least `capacity` writable doubles; `out_written`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn boltrom_trajectory_column(
    trajectory: *const BoltromTrajectory,
    column: BoltromColumn,
    out: *mut f64,
    capacity: usize,
    out_written: *mut usize,
) -> BoltromStatus {
    guarded(|| {
        let Some(t) = trajectory.as_ref() else {
            set_last_error("NULL trajectory");
            return BoltromStatus::NullArgument;
        };
        if out.is_null() || out_written.is_null() {
            set_last_error("NULL argument");
            return BoltromStatus::NullArgument;
        }
        let n = t.inner.len().min(capacity);
        let dst = std::slice::from_raw_parts_mut(out, n);
        for (i, slot) in dst.iter_mut().enumerate() {
            let s = &t.inner.states[i];
            *slot = match column {
                BoltromColumn::Time => t.inner.times[i],
                BoltromColumn::DisplacementLo => s.x_lo,
                BoltromColumn::VelocityLo => s.v_lo,
                BoltromColumn::DisplacementSo => s.x_so,
                BoltromColumn::VelocitySo => s.v_so,
                BoltromColumn::Tension => s.tension,
            };
        }
        *out_written = n;
        BoltromStatus::Ok
    })
}

/// Initial-window mean, final-window mean, and change of the trajectory
/// tension (negative change = loosening).
///
/// # Safety
/// `trajectory` must be a live handle; the out-pointers must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn boltrom_trajectory_tension_change(
    trajectory: *const BoltromTrajectory,
    initial_start: f64,
    initial_end: f64,
    final_start: f64,
    final_end: f64,
    out_initial: *mut f64,
    out_final: *mut f64,
    out_delta: *mut f64,
) -> BoltromStatus {
    guarded(|| {
        let Some(t) = trajectory.as_ref() else {
            set_last_error("NULL trajectory");
            return BoltromStatus::NullArgument;
        };
        if out_initial.is_null() || out_final.is_null() || out_delta.is_null() {
            set_last_error("NULL argument");
            return BoltromStatus::NullArgument;
        }
        let windows = TensionWindows {
            initial: (initial_start, initial_end),
            final_: (final_start, final_end),
        };
        match tension_change(&t.inner, &windows) {
            Ok((a, b, d)) => {
                *out_initial = a;
                *out_final = b;
                *out_delta = d;
                BoltromStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a trajectory handle. NULL is ignored.
///
/// # Safety
/// `trajectory` must have been returned by `boltrom_simulate` and not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn boltrom_trajectory_free(trajectory: *mut BoltromTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// Identify the constant loosening rate that reproduces a measured final
/// tension: pattern search over gamma in `[gamma_lower, gamma_upper]` from
/// `gamma_initial`, simulating the model under the given force record with
/// initial tension `t0_tension` and matching the final-window tension mean
/// to `target_final_tension`.
///
/// # Safety
/// Array and out-pointer requirements as in `boltrom_simulate`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn boltrom_identify_gamma(
    model: *const BoltromModel,
    force_times: *const f64,
    force_values: *const f64,
    force_len: usize,
    t0_tension: f64,
    target_final_tension: f64,
    gamma_initial: f64,
    gamma_lower: f64,
    gamma_upper: f64,
    rel_tol: f64,
    abs_tol: f64,
    out_gamma: *mut f64,
    out_objective: *mut f64,
    out_evaluations: *mut u64,
) -> BoltromStatus {
    guarded(|| {
        let Some(m) = model.as_ref() else {
            set_last_error("NULL model");
            return BoltromStatus::NullArgument;
        };
        if out_gamma.is_null()
            || out_objective.is_null()
            || out_evaluations.is_null()
            || (force_len > 0 && (force_times.is_null() || force_values.is_null()))
        {
            set_last_error("NULL argument");
            return BoltromStatus::NullArgument;
        }
        let force = match force_from_arrays(force_times, force_values, force_len) {
            Ok(f) => f,
            Err(e) => return fail(&e),
        };
        let windows = TensionWindows::default();
        let sim_opts = SimOptions {
            rel_tol,
            abs_tol,
            output_dt: Some(1.0 / 4800.0),
            include_steps: false,
            max_steps: 20_000_000,
        };
        let objective = |gamma: f64| -> f64 {
            let candidate = m.inner.with_tension_law(TensionLaw::Constant(gamma));
            match simulate(
                &candidate,
                &force,
                t0_tension,
                (0.0, windows.final_.1),
                &sim_opts,
            ) {
                Ok(traj) => match tension_change(&traj, &windows) {
                    Ok((_a, t_final, _d)) => (t_final - target_final_tension).abs(),
                    Err(_) => f64::NAN,
                },
                Err(_) => f64::NAN,
            }
        };
        let outcome = pattern_search(
            |g| objective(g[0]),
            &[gamma_initial],
            &[gamma_lower],
            &[gamma_upper],
            &PatternSearchOptions::default(),
        );
        match outcome {
            Ok(found) => {
                *out_gamma = found.x[0];
                *out_objective = found.objective;
                *out_evaluations = found.evaluations;
                BoltromStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
