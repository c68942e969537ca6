//! C ABI over the conflict-gate library.
//!
//! Conventions:
//! - Handles (`CgTrajectory`, `CgDataset`, `CgConfig`, `CgTrace`) are opaque;
//!   create them through `cg_*` constructors and release them with the
//!   matching `cg_*_free`. Freeing NULL is a no-op.
//! - Functions return [`CgStatus`]; `CG_STATUS_OK` is 0. On any failure the
//!   thread-local message from [`cg_last_error_message`] describes the cause.
//! - Scalar results are written through out-pointers, which must be valid
//!   for the duration of the call.
//!
//! The matching header is generated into `include/conflict_gate.h` at build
//! time.

// C ABI convention: extern functions take raw pointers and stay callable
// without `unsafe` on the Rust side; every dereference is null-checked.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use conflict_gate::analysis::{self, compute_m_kappa, VerifyMode};
use conflict_gate::error::Error;
use conflict_gate::seir::{
    generate_dataset, load_dataset_file, rk4_simulate, CollocationGrid, Dataset, SeirState,
};
use conflict_gate::trainer::{self, Optimizer, Strategy, TrainConfig, TrainTrace};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalError = 3,
    IoError = 4,
    ParseError = 5,
    CheckFailed = 6,
    InternalError = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg);
}

fn status_of(err: &Error) -> CgStatus {
    match err {
        Error::Domain(_) | Error::Config(_) | Error::Validation(_)
        | Error::DimensionMismatch(_) | Error::EmptyDataset | Error::ZeroVector
        | Error::Mode(_) => CgStatus::InvalidArgument,
        Error::Numerical(_) => CgStatus::NumericalError,
        Error::Parse(_) => CgStatus::ParseError,
        Error::Io(_) => CgStatus::IoError,
    }
}

fn fail(err: &Error) -> CgStatus {
    set_error(&err.to_string());
    status_of(err)
}

/// Runs a closure behind a panic guard; panics become `InternalError`.
fn guarded(f: impl FnOnce() -> CgStatus) -> CgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            CgStatus::InternalError
        }
    }
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, CgStatus> {
    if ptr.is_null() {
        set_error("path is NULL");
        return Err(CgStatus::NullPointer);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(CgStatus::InvalidArgument)
        }
    }
}

macro_rules! require {
    ($ptr:expr) => {
        if $ptr.is_null() {
            set_error(concat!(stringify!($ptr), " is NULL"));
            return CgStatus::NullPointer;
        }
    };
}

/// Version string of the library, static storage.
#[no_mangle]
pub extern "C" fn cg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the last failure on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn cg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Epidemiological rates; population in persons, rates in 1/day.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct CgSeirParams {
    pub population: f64,
    pub beta: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl From<CgSeirParams> for conflict_gate::seir::SeirParams {
    fn from(p: CgSeirParams) -> Self {
        conflict_gate::seir::SeirParams {
            population: p.population,
            beta: p.beta,
            sigma: p.sigma,
            gamma: p.gamma,
        }
    }
}

/// One trajectory state in normalized fractions.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct CgSeirState {
    pub t: f64,
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub r: f64,
}

/// Opaque RK4 trajectory handle.
pub struct CgTrajectory(Vec<SeirState>);

/// Integrates the ground-truth dynamics. On success writes a trajectory
/// handle to `out`.
#[no_mangle]
pub extern "C" fn cg_seir_simulate(
    params: CgSeirParams,
    init: CgSeirState,
    t_end: f64,
    dt: f64,
    out: *mut *mut CgTrajectory,
) -> CgStatus {
    guarded(|| {
        require!(out);
        let init = SeirState::new(init.t, init.s, init.e, init.i, init.r);
        match rk4_simulate(&params.into(), &init, t_end, dt) {
            Ok(traj) => {
                unsafe { *out = Box::into_raw(Box::new(CgTrajectory(traj))) };
                CgStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn cg_trajectory_len(traj: *const CgTrajectory) -> usize {
    if traj.is_null() {
        return 0;
    }
    unsafe { &*traj }.0.len()
}

#[no_mangle]
pub extern "C" fn cg_trajectory_state(
    traj: *const CgTrajectory,
    index: usize,
    out: *mut CgSeirState,
) -> CgStatus {
    guarded(|| {
        require!(traj);
        require!(out);
        let traj = unsafe { &*traj };
        match traj.0.get(index) {
            Some(st) => {
                unsafe {
                    *out = CgSeirState { t: st.t, s: st.s, e: st.e, i: st.i, r: st.r };
                }
                CgStatus::Ok
            }
            None => {
                set_error("trajectory index out of range");
                CgStatus::InvalidArgument
            }
        }
    })
}

#[no_mangle]
pub extern "C" fn cg_trajectory_free(traj: *mut CgTrajectory) {
    if !traj.is_null() {
        drop(unsafe { Box::from_raw(traj) });
    }
}

/// Opaque dataset handle.
pub struct CgDataset(Dataset);

/// Samples noisy observations of the infected fraction from a trajectory.
#[no_mangle]
pub extern "C" fn cg_dataset_generate(
    traj: *const CgTrajectory,
    n_points: usize,
    noise_sigma: f64,
    seed: u64,
    out: *mut *mut CgDataset,
) -> CgStatus {
    guarded(|| {
        require!(traj);
        require!(out);
        let traj = unsafe { &*traj };
        match generate_dataset(&traj.0, n_points, noise_sigma, seed) {
            Ok(ds) => {
                unsafe { *out = Box::into_raw(Box::new(CgDataset(ds))) };
                CgStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn cg_dataset_len(ds: *const CgDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    unsafe { &*ds }.0.len()
}

/// Reads observation `index` as (t, i_obs).
#[no_mangle]
pub extern "C" fn cg_dataset_observation(
    ds: *const CgDataset,
    index: usize,
    t_out: *mut f64,
    i_out: *mut f64,
) -> CgStatus {
    guarded(|| {
        require!(ds);
        require!(t_out);
        require!(i_out);
        let ds = unsafe { &*ds };
        match ds.0.observations.get(index) {
            Some(&(t, i)) => {
                unsafe {
                    *t_out = t;
                    *i_out = i;
                }
                CgStatus::Ok
            }
            None => {
                set_error("observation index out of range");
                CgStatus::InvalidArgument
            }
        }
    })
}

/// Writes the dataset as CSV (`t,i_obs` with a provenance comment line).
#[no_mangle]
pub extern "C" fn cg_dataset_save_csv(ds: *const CgDataset, path: *const c_char) -> CgStatus {
    guarded(|| {
        require!(ds);
        let path = match unsafe { path_arg(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match unsafe { &*ds }.0.save_file(path) {
            Ok(()) => CgStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Parses and validates a dataset CSV; times must be sorted and within
/// [0, t_horizon].
#[no_mangle]
pub extern "C" fn cg_dataset_load_csv(
    path: *const c_char,
    t_horizon: f64,
    out: *mut *mut CgDataset,
) -> CgStatus {
    guarded(|| {
        require!(out);
        let path = match unsafe { path_arg(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_dataset_file(path, t_horizon) {
            Ok(ds) => {
                unsafe { *out = Box::into_raw(Box::new(CgDataset(ds))) };
                CgStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn cg_dataset_free(ds: *mut CgDataset) {
    if !ds.is_null() {
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// Weighting strategy selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgStrategy {
    Fixed = 0,
    Lra = 1,
    Cggs = 2,
}

/// Opaque training-configuration handle.
pub struct CgConfig(TrainConfig);

/// Fresh configuration with the library defaults (CGGS, Adam 1e-3,
/// 2000 steps, layers 1-32-32-4, 200 collocation points, 100-day horizon).
#[no_mangle]
pub extern "C" fn cg_config_default() -> *mut CgConfig {
    Box::into_raw(Box::new(CgConfig(TrainConfig::default())))
}

#[no_mangle]
pub extern "C" fn cg_config_free(cfg: *mut CgConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Selects the weighting strategy; `lambda_phy` applies to `Fixed` only.
#[no_mangle]
pub extern "C" fn cg_config_set_strategy(
    cfg: *mut CgConfig,
    strategy: CgStrategy,
    lambda_phy: f64,
) -> CgStatus {
    guarded(|| {
        require!(cfg);
        let cfg = unsafe { &mut *cfg };
        cfg.0.strategy = match strategy {
            CgStrategy::Fixed => Strategy::Fixed { lambda_phy },
            CgStrategy::Lra => Strategy::Lra,
            CgStrategy::Cggs => Strategy::Cggs,
        };
        CgStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn cg_config_set_optimizer_gd(cfg: *mut CgConfig, eta: f64) -> CgStatus {
    guarded(|| {
        require!(cfg);
        unsafe { &mut *cfg }.0.optimizer = Optimizer::Gd { eta };
        CgStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn cg_config_set_optimizer_adam(
    cfg: *mut CgConfig,
    eta: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> CgStatus {
    guarded(|| {
        require!(cfg);
        unsafe { &mut *cfg }.0.optimizer = Optimizer::Adam { eta, beta1, beta2, eps };
        CgStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn cg_config_set_steps(cfg: *mut CgConfig, steps: usize) -> CgStatus {
    guarded(|| {
        require!(cfg);
        unsafe { &mut *cfg }.0.steps = steps;
        CgStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn cg_config_set_seed(cfg: *mut CgConfig, seed: u64) -> CgStatus {
    guarded(|| {
        require!(cfg);
        unsafe { &mut *cfg }.0.seed = seed;
        CgStatus::Ok
    })
}

/// Hidden/output widths of the network; must start with 1 and end with 4.
#[no_mangle]
pub extern "C" fn cg_config_set_layers(
    cfg: *mut CgConfig,
    widths: *const u32,
    len: usize,
) -> CgStatus {
    guarded(|| {
        require!(cfg);
        require!(widths);
        let widths = unsafe { std::slice::from_raw_parts(widths, len) };
        let sizes: Vec<usize> = widths.iter().map(|&w| w as usize).collect();
        if sizes.len() < 2 || sizes[0] != 1 || *sizes.last().unwrap() != 4 {
            set_error("layer widths must run from 1 to 4");
            return CgStatus::InvalidArgument;
        }
        unsafe { &mut *cfg }.0.layer_sizes = sizes;
        CgStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn cg_config_set_grid(
    cfg: *mut CgConfig,
    points: usize,
    t_horizon: f64,
) -> CgStatus {
    guarded(|| {
        require!(cfg);
        let cfg = unsafe { &mut *cfg };
        cfg.0.grid_points = points;
        cfg.0.t_horizon = t_horizon;
        CgStatus::Ok
    })
}

/// EMA momentum, gate sharpness, regularizer, and the fixed logical weight.
#[no_mangle]
pub extern "C" fn cg_config_set_gate(
    cfg: *mut CgConfig,
    alpha: f64,
    kappa: f64,
    epsilon: f64,
    lambda_logic: f64,
) -> CgStatus {
    guarded(|| {
        require!(cfg);
        let cfg = unsafe { &mut *cfg };
        cfg.0.alpha = alpha;
        cfg.0.kappa = kappa;
        cfg.0.epsilon = epsilon;
        cfg.0.lambda_logic = lambda_logic;
        CgStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn cg_config_set_inverse_mode(cfg: *mut CgConfig, enabled: bool) -> CgStatus {
    guarded(|| {
        require!(cfg);
        unsafe { &mut *cfg }.0.inverse_mode = enabled;
        CgStatus::Ok
    })
}

/// One trace row; field meanings match the CSV columns.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct CgTraceRecord {
    pub step: u64,
    pub l_data: f64,
    pub l_ode: f64,
    pub l_logic: f64,
    pub lambda_hat: f64,
    pub s_cos: f64,
    pub norm_data: f64,
    pub norm_phy: f64,
    pub descent_inner: f64,
    pub d_norm: f64,
}

/// Opaque training-trace handle.
pub struct CgTrace(TrainTrace);

/// Runs the configured training loop on the dataset. Deterministic under
/// (config, dataset).
#[no_mangle]
pub extern "C" fn cg_train(
    cfg: *const CgConfig,
    dataset: *const CgDataset,
    seir: CgSeirParams,
    out: *mut *mut CgTrace,
) -> CgStatus {
    guarded(|| {
        require!(cfg);
        require!(dataset);
        require!(out);
        let cfg = unsafe { &*cfg };
        let dataset = unsafe { &*dataset };
        let grid = match CollocationGrid::uniform(cfg.0.t_horizon, cfg.0.grid_points) {
            Ok(g) => g,
            Err(e) => return fail(&e),
        };
        match trainer::run(&cfg.0, &dataset.0, &grid, &seir.into()) {
            Ok(trace) => {
                unsafe { *out = Box::into_raw(Box::new(CgTrace(trace))) };
                CgStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn cg_trace_len(trace: *const CgTrace) -> usize {
    if trace.is_null() {
        return 0;
    }
    unsafe { &*trace }.0.records.len()
}

#[no_mangle]
pub extern "C" fn cg_trace_record(
    trace: *const CgTrace,
    index: usize,
    out: *mut CgTraceRecord,
) -> CgStatus {
    guarded(|| {
        require!(trace);
        require!(out);
        let trace = unsafe { &*trace };
        match trace.0.records.get(index) {
            Some(r) => {
                unsafe {
                    *out = CgTraceRecord {
                        step: r.step as u64,
                        l_data: r.l_data,
                        l_ode: r.l_ode,
                        l_logic: r.l_logic,
                        lambda_hat: r.lambda_hat,
                        s_cos: r.s_cos,
                        norm_data: r.norm_data,
                        norm_phy: r.norm_phy,
                        descent_inner: r.descent_inner,
                        d_norm: r.d_norm,
                    };
                }
                CgStatus::Ok
            }
            None => {
                set_error("trace index out of range");
                CgStatus::InvalidArgument
            }
        }
    })
}

/// Number of trained parameters (flat theta length).
#[no_mangle]
pub extern "C" fn cg_trace_theta_len(trace: *const CgTrace) -> usize {
    if trace.is_null() {
        return 0;
    }
    unsafe { &*trace }.0.final_theta.len()
}

/// Copies the final flat parameter vector into `buf` (capacity `len`).
#[no_mangle]
pub extern "C" fn cg_trace_final_theta(
    trace: *const CgTrace,
    buf: *mut f64,
    len: usize,
) -> CgStatus {
    guarded(|| {
        require!(trace);
        require!(buf);
        let theta = &unsafe { &*trace }.0.final_theta;
        if len < theta.len() {
            set_error("buffer too small for final theta");
            return CgStatus::InvalidArgument;
        }
        unsafe { ptr::copy_nonoverlapping(theta.as_ptr(), buf, theta.len()) };
        CgStatus::Ok
    })
}

/// Recovered (beta, sigma, gamma) of an inverse-mode run.
#[no_mangle]
pub extern "C" fn cg_trace_recovered_rates(
    trace: *const CgTrace,
    beta: *mut f64,
    sigma: *mut f64,
    gamma: *mut f64,
) -> CgStatus {
    guarded(|| {
        require!(trace);
        require!(beta);
        require!(sigma);
        require!(gamma);
        match unsafe { &*trace }.0.recovered_rates {
            Some([b, s, g]) => {
                unsafe {
                    *beta = b;
                    *sigma = s;
                    *gamma = g;
                }
                CgStatus::Ok
            }
            None => {
                set_error("trace was not produced by an inverse-mode run");
                CgStatus::InvalidArgument
            }
        }
    })
}

/// Writes the trace in the standard 10-column CSV layout.
#[no_mangle]
pub extern "C" fn cg_trace_save_csv(trace: *const CgTrace, path: *const c_char) -> CgStatus {
    guarded(|| {
        require!(trace);
        let path = match unsafe { path_arg(path) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match unsafe { &*trace }.0.save_csv(path) {
            Ok(()) => CgStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn cg_trace_free(trace: *mut CgTrace) {
    if !trace.is_null() {
        drop(unsafe { Box::from_raw(trace) });
    }
}

/// Descent constants of the gate: the worst-case interference maximum, its
/// location, and c = 1 - m_kappa.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct CgDescentConstants {
    pub kappa: f64,
    pub m_kappa: f64,
    pub s_star: f64,
    pub c: f64,
}

#[no_mangle]
pub extern "C" fn cg_compute_m_kappa(kappa: f64, out: *mut CgDescentConstants) -> CgStatus {
    guarded(|| {
        require!(out);
        if kappa < 0.0 {
            set_error("kappa must be non-negative");
            return CgStatus::InvalidArgument;
        }
        let c = compute_m_kappa(kappa);
        unsafe {
            *out = CgDescentConstants {
                kappa: c.kappa,
                m_kappa: c.m_kappa,
                s_star: c.s_star,
                c: c.c,
            };
        }
        CgStatus::Ok
    })
}

/// Numeric summary of the anti-parallel deadlock construction.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct CgDeadlockSummary {
    pub lambda_std: f64,
    pub fixed_update_ratio: f64,
    pub pareto_alpha: f64,
    pub pareto_residual_ratio: f64,
    pub cggs_direction_ratio: f64,
    pub cggs_deviation_ratio: f64,
    pub pass: bool,
}

/// Builds g_data = -c * g_phy and reports how the fixed-weight and gated
/// updates behave. Returns `CheckFailed` when the construction's
/// expectations do not hold.
#[no_mangle]
pub extern "C" fn cg_deadlock_demo(
    c: f64,
    kappa: f64,
    dim: usize,
    seed: u64,
    out: *mut CgDeadlockSummary,
) -> CgStatus {
    guarded(|| {
        require!(out);
        match analysis::deadlock_demo(c, kappa, dim, seed) {
            Ok(r) => {
                unsafe {
                    *out = CgDeadlockSummary {
                        lambda_std: r.lambda_std,
                        fixed_update_ratio: r.fixed_update_ratio,
                        pareto_alpha: r.pareto_alpha,
                        pareto_residual_ratio: r.pareto_residual_ratio,
                        cggs_direction_ratio: r.cggs_direction_ratio,
                        cggs_deviation_ratio: r.cggs_deviation_ratio,
                        pass: r.pass,
                    };
                }
                if r.pass {
                    CgStatus::Ok
                } else {
                    set_error("deadlock construction checks failed");
                    CgStatus::CheckFailed
                }
            }
            Err(e) => fail(&e),
        }
    })
}

/// Descent-check summary over a trace.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct CgVerifySummary {
    pub checked: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub pass: bool,
}

/// Replays the per-step sufficient-descent check on a trace at gate
/// sharpness `kappa`.
#[no_mangle]
pub extern "C" fn cg_verify_descent(
    trace: *const CgTrace,
    kappa: f64,
    out: *mut CgVerifySummary,
) -> CgStatus {
    guarded(|| {
        require!(trace);
        require!(out);
        let trace = unsafe { &*trace };
        let constants = compute_m_kappa(kappa);
        match analysis::verify_trace(&trace.0, &constants, VerifyMode::Descent) {
            Ok(report) => {
                unsafe {
                    *out = CgVerifySummary {
                        checked: report.descent_checked,
                        passed: report.descent_passed,
                        pass_rate: report.descent_pass_rate,
                        pass: report.pass,
                    };
                }
                CgStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
