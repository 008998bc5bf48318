//! C ABI over the `twoscale` solvers.
//!
//! Every function returns a [`TsStatus`]. Results come back through out
//! pointers as opaque handles that the caller releases with the matching
//! `*_free`. On failure `ts_last_error` holds a message for the calling
//! thread. Panics never cross the boundary.

use num_complex::Complex64;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use twoscale::analysis::{compare_at, CompareOptions};
use twoscale::coefficients::CoefficientSet;
use twoscale::config::RunConfig;
use twoscale::limit_solver::{solve_profile, SolveDiagnostics};
use twoscale::reference_solver::{integrate, project_initial, ReferenceState};
use twoscale::spectral::{eval_on_grid, slice_theta, GridSpec, SpectralField2, SpectralField3};
use twoscale::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    Singular = 5,
    NotReal = 6,
    Diverged = 7,
    NonConvergence = 8,
    OutOfRange = 9,
    BufferTooSmall = 10,
    Io = 11,
    Panic = 12,
}

/// Discrepancy norms returned by `ts_compare_at`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TsNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub steps: usize,
}

/// Validated run configuration with its coefficient set.
pub struct TsConfig {
    cfg: RunConfig,
    set: CoefficientSet,
}

/// Limit profile `Z(t, theta, x)` with its solve diagnostics.
pub struct TsProfile {
    profile: SpectralField3,
    diagnostics: SolveDiagnostics,
}

/// Reference seabed `z(t, x)` at one instant.
pub struct TsField {
    field: SpectralField2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TsStatus {
    match e {
        Error::Config(_) => TsStatus::Config,
        Error::Parameter(_) | Error::Aliasing { .. } | Error::OrderMismatch { .. } | Error::ShapeMismatch { .. } => {
            TsStatus::InvalidArgument
        }
        Error::Singular { .. } => TsStatus::Singular,
        Error::NotReal { .. } => TsStatus::NotReal,
        Error::Divergence { .. } => TsStatus::Diverged,
        Error::NonConvergence { .. } => TsStatus::NonConvergence,
        Error::Io(_) => TsStatus::Io,
        _ => TsStatus::Solver,
    }
}

fn fail(status: TsStatus, msg: impl Into<String>) -> TsStatus {
    set_error(msg.into());
    status
}

/// Runs `body`, mapping errors and panics to status codes.
fn guard(body: impl FnOnce() -> Result<(), TsStatus>) -> TsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(TsStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: twoscale::Result<T>) -> Result<T, TsStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, TsStatus> {
    if p.is_null() {
        return Err(fail(TsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, TsStatus> {
    p.as_ref()
        .ok_or_else(|| fail(TsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, TsStatus> {
    p.as_mut()
        .ok_or_else(|| fail(TsStatus::NullPointer, format!("{what} is null")))
}

/// Copies the calling thread's last error message into `buf` (nul
/// terminated, truncated to `len`). Returns the full message length, or 0
/// when there is none.
#[no_mangle]
pub unsafe extern "C" fn ts_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Static version string.
#[no_mangle]
pub extern "C" fn ts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a TOML configuration; `toml` may be empty for the defaults.
#[no_mangle]
pub unsafe extern "C" fn ts_config_from_toml(toml: *const c_char, out: *mut *mut TsConfig) -> TsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(toml, "toml")?;
        let cfg = lift(RunConfig::parse(text))?;
        let set = lift(cfg.coefficient_set())?;
        *out = Box::into_raw(Box::new(TsConfig { cfg, set }));
        Ok(())
    })
}

/// Applies one `key=value` override and revalidates; the handle is left
/// unchanged on failure.
#[no_mangle]
pub unsafe extern "C" fn ts_config_set(config: *mut TsConfig, assignment: *const c_char) -> TsStatus {
    guard(|| {
        let config = out_arg(config, "config")?;
        let assignment = str_arg(assignment, "assignment")?;
        let cfg = lift(RunConfig::parse_with(&config.cfg.to_toml(), &[assignment.to_string()]))?;
        let set = lift(cfg.coefficient_set())?;
        *config = TsConfig { cfg, set };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ts_config_free(config: *mut TsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Limit profile at slow time `t` with the configured order, quadrature
/// and gauge.
#[no_mangle]
pub unsafe extern "C" fn ts_limit_solve(config: *const TsConfig, t: f64, out: *mut *mut TsProfile) -> TsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let c = ref_arg(config, "config")?;
        let order = c.cfg.discretization.order;
        let z0 = lift(project_initial(&lift(c.cfg.initial_condition())?, order, &c.set))?;
        let gauge = lift(c.cfg.gauge())?.resolve(&z0);
        let sol = lift(solve_profile(&c.set, t, order, c.cfg.quadrature(order), gauge))?;
        *out = Box::into_raw(Box::new(TsProfile {
            profile: sol.profile,
            diagnostics: sol.diagnostics,
        }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ts_profile_free(profile: *mut TsProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ts_profile_order(profile: *const TsProfile, order: *mut usize) -> TsStatus {
    guard(|| {
        *out_arg(order, "order")? = ref_arg(profile, "profile")?.profile.order();
        Ok(())
    })
}

/// Residual and condition estimate of the solve.
#[no_mangle]
pub unsafe extern "C" fn ts_profile_diagnostics(
    profile: *const TsProfile,
    residual: *mut f64,
    cond: *mut f64,
) -> TsStatus {
    guard(|| {
        let p = ref_arg(profile, "profile")?;
        *out_arg(residual, "residual")? = p.diagnostics.residual;
        *out_arg(cond, "cond")? = p.diagnostics.cond;
        Ok(())
    })
}

fn coefficient<const D: usize>(
    field: &twoscale::spectral::SpectralField<D>,
    mode: [i32; D],
) -> Result<Complex64, TsStatus> {
    if field.index_of(mode).is_none() {
        return Err(fail(
            TsStatus::OutOfRange,
            format!("mode {mode:?} outside order {}", field.order()),
        ));
    }
    Ok(field.at(mode))
}

/// Fourier coefficient of mode `(l, m, n)`.
#[no_mangle]
pub unsafe extern "C" fn ts_profile_coefficient(
    profile: *const TsProfile,
    l: i32,
    m: i32,
    n: i32,
    re: *mut f64,
    im: *mut f64,
) -> TsStatus {
    guard(|| {
        let c = coefficient(&ref_arg(profile, "profile")?.profile, [l, m, n])?;
        *out_arg(re, "re")? = c.re;
        *out_arg(im, "im")? = c.im;
        Ok(())
    })
}

unsafe fn write_grid(field: &SpectralField2, n: usize, out: *mut f64, len: usize) -> Result<(), TsStatus> {
    if out.is_null() {
        return Err(fail(TsStatus::NullPointer, "out is null"));
    }
    let grid = lift(GridSpec::new(n))?;
    if len < n * n {
        return Err(fail(TsStatus::BufferTooSmall, format!("need {} values, got {len}", n * n)));
    }
    let values = lift(eval_on_grid(field, &grid))?;
    ptr::copy_nonoverlapping(values.values().as_ptr(), out, n * n);
    Ok(())
}

/// Samples `Z(t, theta, x)` on the `n x n` grid, row-major by `x1`.
#[no_mangle]
pub unsafe extern "C" fn ts_profile_eval_grid(
    profile: *const TsProfile,
    theta: f64,
    n: usize,
    out: *mut f64,
    len: usize,
) -> TsStatus {
    guard(|| {
        let p = ref_arg(profile, "profile")?;
        if !theta.is_finite() {
            return Err(fail(TsStatus::InvalidArgument, "theta must be finite"));
        }
        write_grid(&slice_theta(&p.profile, theta), n, out, len)
    })
}

/// Integrates the oscillating problem from the configured initial seabed
/// to `t_end` at the configured epsilon.
#[no_mangle]
pub unsafe extern "C" fn ts_reference_solve(config: *const TsConfig, t_end: f64, out: *mut *mut TsField) -> TsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let c = ref_arg(config, "config")?;
        let order = c.cfg.discretization.order;
        let z0 = lift(project_initial(&lift(c.cfg.initial_condition())?, order, &c.set))?;
        let state = lift(ReferenceState::new(z0, c.cfg.run.epsilon))?;
        let traj = lift(integrate(
            &state,
            &c.set,
            c.cfg.quadrature(order),
            t_end,
            &lift(c.cfg.integrator())?,
            &[],
        ))?;
        *out = Box::into_raw(Box::new(TsField {
            field: traj.last().clone(),
        }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ts_field_free(field: *mut TsField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ts_field_time(field: *const TsField, t: *mut f64) -> TsStatus {
    guard(|| {
        *out_arg(t, "t")? = ref_arg(field, "field")?.field.t();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ts_field_coefficient(
    field: *const TsField,
    m: i32,
    n: i32,
    re: *mut f64,
    im: *mut f64,
) -> TsStatus {
    guard(|| {
        let c = coefficient(&ref_arg(field, "field")?.field, [m, n])?;
        *out_arg(re, "re")? = c.re;
        *out_arg(im, "im")? = c.im;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ts_field_eval_grid(field: *const TsField, n: usize, out: *mut f64, len: usize) -> TsStatus {
    guard(|| write_grid(&ref_arg(field, "field")?.field, n, out, len))
}

/// Error norms between the reference and the sliced limit profile at `t`.
#[no_mangle]
pub unsafe extern "C" fn ts_compare_at(config: *const TsConfig, t: f64, out: *mut TsNorms) -> TsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = ref_arg(config, "config")?;
        let opts: CompareOptions = lift(c.cfg.compare_options())?;
        let r = compare_at(
            &c.set,
            c.cfg.run.epsilon,
            c.cfg.discretization.order,
            t,
            &lift(c.cfg.initial_condition())?,
            lift(c.cfg.gauge())?,
            &opts,
        );
        if let Some(msg) = r.error {
            return Err(fail(TsStatus::Solver, msg));
        }
        *out = TsNorms {
            l1: r.norms.l1,
            l2: r.norms.l2,
            linf: r.norms.linf,
            steps: r.steps,
        };
        Ok(())
    })
}
