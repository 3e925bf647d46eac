//! C ABI for objectives, PDE solves and optimizer runs.
//!
//! Handles are opaque pointers created by `hjs_*_new`/solve/run functions and
//! released with the matching `hjs_*_free`. Every fallible call returns an
//! [`HjsStatus`]; on failure [`hjs_last_error_message`] describes the error
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hjsmooth::optim::{run_with_budget, Algorithm, OptimizerConfig, RunRecord};
use hjsmooth::pde::{self, GridFunction, GridGeometry, PdeSolveConfig, Scheme};
use hjsmooth::{Error, ObjectiveRef};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HjsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownObjective = 3,
    DimensionMismatch = 4,
    Numerical = 5,
    Io = 6,
    Config = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HjsScheme {
    ColeHopf = 0,
    HopfLax = 1,
    MonotoneFd = 2,
    Heat = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HjsAlgorithm {
    Sgd = 0,
    EntropySgd = 1,
    Hj = 2,
    Hj2 = 3,
    Heat = 4,
    Elastic = 5,
}

/// A named objective from the test corpus.
pub struct HjsObjective(ObjectiveRef);

/// A function sampled on a 1D or 2D grid.
pub struct HjsGrid(GridFunction);

/// The trajectory of one optimizer run.
pub struct HjsRunRecord(RunRecord);

/// One logged row of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HjsRunRow {
    pub k: u64,
    pub grad_evals: u64,
    pub effective_epoch: f64,
    pub loss: f64,
    pub grad_norm: f64,
    pub gamma: f64,
    pub control_energy: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HjsStatus {
    match e {
        Error::InvalidArgument(_) => HjsStatus::InvalidArgument,
        Error::UnknownObjective(_) => HjsStatus::UnknownObjective,
        Error::DimensionMismatch { .. } => HjsStatus::DimensionMismatch,
        Error::Io(_) | Error::GridFormat { .. } => HjsStatus::Io,
        Error::Config(_) | Error::Json(_) => HjsStatus::Config,
        _ => HjsStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (HjsStatus, String)>) -> HjsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HjsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HjsStatus::Panic
        }
    }
}

fn lift<T>(r: hjsmooth::Result<T>) -> Result<T, (HjsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (HjsStatus, String) {
    (HjsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (HjsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (HjsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(
    p: *const f64,
    n: usize,
    what: &str,
) -> Result<&'a [f64], (HjsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_out<'a>(
    p: *mut f64,
    n: usize,
    what: &str,
) -> Result<&'a mut [f64], (HjsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (HjsStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

fn check_len(expected: usize, got: usize) -> Result<(), (HjsStatus, String)> {
    if expected != got {
        return Err((
            HjsStatus::DimensionMismatch,
            format!("expected length {expected}, got {got}"),
        ));
    }
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hjs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hjs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Looks up a corpus objective such as `double_well_a1` or `rugged_s7_m5`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hjs_objective_new(
    name: *const c_char,
    out: *mut *mut HjsObjective,
) -> HjsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = str_arg(name, "name")?;
        let f = lift(hjsmooth::objective::lookup(name))?;
        *out = Box::into_raw(Box::new(HjsObjective(f)));
        Ok(())
    })
}

/// # Safety
/// `obj` must come from [`hjs_objective_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hjs_objective_free(obj: *mut HjsObjective) {
    if !obj.is_null() {
        drop(Box::from_raw(obj));
    }
}

/// Dimension of the objective, or 0 for a null handle.
///
/// # Safety
/// `obj` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hjs_objective_dim(obj: *const HjsObjective) -> usize {
    obj.as_ref().map_or(0, |o| o.0.dim())
}

/// # Safety
/// `x` must point to `n` doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn hjs_objective_value(
    obj: *const HjsObjective,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> HjsStatus {
    guard(|| {
        let f = &handle(obj, "objective")?.0;
        check_len(f.dim(), n)?;
        let x = slice_arg(x, n, "x")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f.value(x);
        Ok(())
    })
}

/// # Safety
/// `x` and `grad` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn hjs_objective_gradient(
    obj: *const HjsObjective,
    x: *const f64,
    n: usize,
    grad: *mut f64,
) -> HjsStatus {
    guard(|| {
        let f = &handle(obj, "objective")?.0;
        check_len(f.dim(), n)?;
        let x = slice_arg(x, n, "x")?;
        let g = slice_out(grad, n, "grad")?;
        f.gradient(x, g);
        Ok(())
    })
}

/// Solves for u(·, t) on the objective's box with `n_points` nodes per axis.
///
/// # Safety
/// `obj` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hjs_solve_pde(
    obj: *const HjsObjective,
    scheme: HjsScheme,
    beta_inv: f64,
    t: f64,
    n_points: usize,
    out: *mut *mut HjsGrid,
) -> HjsStatus {
    guard(|| {
        let f = &handle(obj, "objective")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let scheme = match scheme {
            HjsScheme::ColeHopf => Scheme::ColeHopf,
            HjsScheme::HopfLax => Scheme::HopfLax,
            HjsScheme::MonotoneFd => Scheme::MonotoneFd,
            HjsScheme::Heat => Scheme::Heat,
        };
        let geometry = lift(GridGeometry::for_objective(f.as_ref(), n_points))?;
        let u = lift(pde::solve(
            f.as_ref(),
            &PdeSolveConfig::new(scheme, beta_inv, t),
            &geometry,
        ))?;
        *out = Box::into_raw(Box::new(HjsGrid(u)));
        Ok(())
    })
}

/// # Safety
/// `grid` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hjs_grid_free(grid: *mut HjsGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `grid` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hjs_grid_len(grid: *const HjsGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.values.len())
}

/// Spatial dimension, or 0 for a null handle.
///
/// # Safety
/// `grid` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hjs_grid_dim(grid: *const HjsGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.dim())
}

/// Copies the node values (row-major, first axis fastest) into `out`.
///
/// # Safety
/// `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hjs_grid_values(
    grid: *const HjsGrid,
    out: *mut f64,
    len: usize,
) -> HjsStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        check_len(g.values.len(), len)?;
        slice_out(out, len, "out")?.copy_from_slice(&g.values);
        Ok(())
    })
}

/// Coordinates of node `index`.
///
/// # Safety
/// `out` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn hjs_grid_point(
    grid: *const HjsGrid,
    index: usize,
    out: *mut f64,
    dim: usize,
) -> HjsStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        check_len(g.dim(), dim)?;
        if index >= g.values.len() {
            return Err((
                HjsStatus::InvalidArgument,
                format!("index {index} out of range"),
            ));
        }
        slice_out(out, dim, "out")?.copy_from_slice(&g.geometry.point(index));
        Ok(())
    })
}

/// u at an arbitrary point by multilinear interpolation.
///
/// # Safety
/// `x` must point to `dim` doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn hjs_grid_interpolate(
    grid: *const HjsGrid,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> HjsStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        check_len(g.dim(), dim)?;
        let x = slice_arg(x, dim, "x")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = g.interpolate(x);
        Ok(())
    })
}

/// Runs an optimizer for `grad_evals` gradient evaluations.
///
/// `config_json` may be null for the algorithm's defaults, or a JSON object
/// with any optimizer keys (`eta`, `gamma0`, `L`, …); missing keys keep their defaults.
///
/// # Safety
/// `obj` must be a live handle, `config_json` null or NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hjs_optimize(
    obj: *const HjsObjective,
    algorithm: HjsAlgorithm,
    config_json: *const c_char,
    seed: u64,
    grad_evals: u64,
    out: *mut *mut HjsRunRecord,
) -> HjsStatus {
    guard(|| {
        let f = &handle(obj, "objective")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let algo = match algorithm {
            HjsAlgorithm::Sgd => Algorithm::Sgd,
            HjsAlgorithm::EntropySgd => Algorithm::EntropySgd,
            HjsAlgorithm::Hj => Algorithm::Hj,
            HjsAlgorithm::Hj2 => Algorithm::Hj2,
            HjsAlgorithm::Heat => Algorithm::Heat,
            HjsAlgorithm::Elastic => Algorithm::Elastic,
        };
        let mut cfg = OptimizerConfig::for_algorithm(algo);
        if !config_json.is_null() {
            let text = str_arg(config_json, "config_json")?;
            let value: serde_json::Value = serde_json::from_str(text)
                .map_err(|e| (HjsStatus::Config, format!("config_json: {e}")))?;
            let overrides: hjsmooth::harness::OptimizerOverrides =
                lift(hjsmooth::harness::config::from_value(value))?;
            overrides.apply(&mut cfg);
        }
        let record = lift(run_with_budget(algo, f.as_ref(), &cfg, seed, grad_evals))?;
        *out = Box::into_raw(Box::new(HjsRunRecord(record)));
        Ok(())
    })
}

/// # Safety
/// `rec` must come from [`hjs_optimize`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hjs_run_record_free(rec: *mut HjsRunRecord) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// Number of logged rows, or 0 for a null handle.
///
/// # Safety
/// `rec` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hjs_run_record_num_rows(rec: *const HjsRunRecord) -> usize {
    rec.as_ref().map_or(0, |r| r.0.rows.len())
}

/// Loss at the last logged row; NaN for a null handle.
///
/// # Safety
/// `rec` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hjs_run_record_final_loss(rec: *const HjsRunRecord) -> f64 {
    rec.as_ref().map_or(f64::NAN, |r| r.0.final_loss())
}

/// Whether the run stopped early on a non-finite value (1) or not (0).
///
/// # Safety
/// `rec` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hjs_run_record_aborted(rec: *const HjsRunRecord) -> i32 {
    rec.as_ref().map_or(0, |r| r.0.aborted as i32)
}

/// # Safety
/// `out` must point to one [`HjsRunRow`].
#[no_mangle]
pub unsafe extern "C" fn hjs_run_record_row(
    rec: *const HjsRunRecord,
    index: usize,
    out: *mut HjsRunRow,
) -> HjsStatus {
    guard(|| {
        let r = &handle(rec, "run record")?.0;
        let row = r.rows.get(index).ok_or_else(|| {
            (
                HjsStatus::InvalidArgument,
                format!("row {index} out of range"),
            )
        })?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = HjsRunRow {
            k: row.k,
            grad_evals: row.grad_evals,
            effective_epoch: row.effective_epoch,
            loss: row.loss,
            grad_norm: row.grad_norm,
            gamma: row.gamma,
            control_energy: row.control_energy,
        };
        Ok(())
    })
}

/// Copies the final iterate into `out`.
///
/// # Safety
/// `out` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn hjs_run_record_terminal_x(
    rec: *const HjsRunRecord,
    out: *mut f64,
    n: usize,
) -> HjsStatus {
    guard(|| {
        let r = &handle(rec, "run record")?.0;
        check_len(r.terminal_x.len(), n)?;
        slice_out(out, n, "out")?.copy_from_slice(&r.terminal_x);
        Ok(())
    })
}

/// Writes the run as CSV.
///
/// # Safety
/// `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hjs_run_record_write_csv(
    rec: *const HjsRunRecord,
    path: *const c_char,
) -> HjsStatus {
    guard(|| {
        let r = &handle(rec, "run record")?.0;
        let path = str_arg(path, "path")?;
        lift(r.write_csv(Path::new(path)))
    })
}
