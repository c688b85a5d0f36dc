//! C ABI for `expen`.
//!
//! Matrices cross the boundary as row-major `double` buffers with an explicit
//! element count. Objects are opaque handles created by `expen_*_new` and
//! released by the matching `expen_*_free`. Every function returns an
//! [`ExpenStatus`]; on failure [`expen_last_error`] describes the problem.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use expen::linalg::{from_row_major, to_row_major, DenseMatrix};
use expen::model::{ExPenModel, SmoothObjective};
use expen::problems::{random_stiefel, BrockettProblem, NleigProblem, RandomSpec};
use expen::solvers::{frcg_solve, gd_solve, SolverConfig, SolverReport, Termination};
use expen::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpenStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    NonFinite = 4,
    NotFeasible = 5,
    Degenerate = 6,
    MissingHessian = 7,
    LineSearch = 8,
    Numerical = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpenSolver {
    FletcherReeves = 0,
    GradientDescent = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpenTermination {
    GradTol = 0,
    MaxIters = 1,
    LineSearchFailure = 2,
}

/// Solver settings. A non-positive `restart_orthogonality` disables the
/// orthogonality restart. `solver` holds an [`ExpenSolver`] value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ExpenSolverConfig {
    pub delta: f64,
    pub sigma: f64,
    pub grad_tol: f64,
    pub max_iters: u64,
    pub initial_step: f64,
    pub restart_orthogonality: f64,
    pub solver: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ExpenReportSummary {
    pub fval: f64,
    pub iterations: u64,
    /// `||grad f(P(X))||_F` at the projected point.
    pub stationarity: f64,
    pub feasibility: f64,
    pub wall_seconds: f64,
    pub termination: ExpenTermination,
    pub h_initial: f64,
    pub h_final: f64,
    /// `||grad h||_F` at the last unprojected iterate.
    pub grad_h_norm: f64,
    pub restarts: u64,
}

type SharedObjective = Arc<dyn SmoothObjective + Send + Sync>;

/// A problem instance.
pub struct ExpenObjective {
    inner: SharedObjective,
}

/// An objective together with a penalty parameter.
pub struct ExpenModel {
    inner: ExPenModel<SharedObjective>,
}

/// Result of a solve.
pub struct ExpenReport {
    inner: SolverReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn expen_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn expen_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

struct Failure(ExpenStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Dimension { .. } => ExpenStatus::Dimension,
            Error::InvalidArgument { .. } | Error::NotSymmetric { .. } | Error::TooLarge { .. } => {
                ExpenStatus::InvalidArgument
            }
            Error::NonFinite { .. } => ExpenStatus::NonFinite,
            Error::NotFeasible { .. } | Error::NotTangent { .. } | Error::NotStationary { .. } => {
                ExpenStatus::NotFeasible
            }
            Error::DegenerateProjection { .. } => ExpenStatus::Degenerate,
            Error::MissingHessian => ExpenStatus::MissingHessian,
            Error::LineSearch(_) | Error::NonDescent { .. } => ExpenStatus::LineSearch,
            _ => ExpenStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ExpenStatus::NullPointer, format!("{what} is null"))
}

fn invalid(reason: String) -> Failure {
    Failure(ExpenStatus::InvalidArgument, reason)
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ExpenStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ExpenStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {message}"));
            ExpenStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn read_matrix(data: *const f64, len: usize, rows: usize, cols: usize, what: &str) -> Result<DenseMatrix, Failure> {
    if data.is_null() {
        return Err(null(what));
    }
    let expected = rows.checked_mul(cols).ok_or_else(|| invalid(format!("{what}: {rows}x{cols} overflows")))?;
    if len != expected {
        return Err(Failure(
            ExpenStatus::Dimension,
            format!("{what}: expected {expected} entries for a {rows}x{cols} matrix, got {len}"),
        ));
    }
    Ok(from_row_major(rows, cols, std::slice::from_raw_parts(data, len))?)
}

unsafe fn write_matrix(m: &DenseMatrix, out: *mut f64, len: usize, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    let entries = to_row_major(m);
    if len != entries.len() {
        return Err(Failure(
            ExpenStatus::Dimension,
            format!("{what}: buffer holds {len} entries, need {}", entries.len()),
        ));
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(&entries);
    Ok(())
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn publish<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Nonlinear eigenvalue energy with the `n x n` 1-D Laplacian and coupling `alpha`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn expen_nleig_new(n: usize, p: usize, alpha: f64, out: *mut *mut ExpenObjective) -> ExpenStatus {
    guard(|| {
        let inner: SharedObjective = Arc::new(NleigProblem::new(n, p, alpha)?);
        publish(out, ExpenObjective { inner })
    })
}

/// Brockett function `(1/2) tr(X^T B X C)` from row-major symmetric `B` (`n*n`
/// entries) and `C` (`p*p` entries).
///
/// # Safety
/// `b` and `c` must point to `b_len` and `c_len` readable doubles; `out` must
/// be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn expen_brockett_new(
    n: usize,
    p: usize,
    b: *const f64,
    b_len: usize,
    c: *const f64,
    c_len: usize,
    out: *mut *mut ExpenObjective,
) -> ExpenStatus {
    guard(|| {
        let b = read_matrix(b, b_len, n, n, "b")?;
        let c = read_matrix(c, c_len, p, p, "c")?;
        let inner: SharedObjective = Arc::new(BrockettProblem::new(b, c)?);
        publish(out, ExpenObjective { inner })
    })
}

/// Brockett instance with `B`, `C` the symmetric parts of seeded Gaussian matrices.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn expen_brockett_random(n: usize, p: usize, seed: u64, out: *mut *mut ExpenObjective) -> ExpenStatus {
    guard(|| {
        let inner: SharedObjective = Arc::new(BrockettProblem::random(n, p, seed)?);
        publish(out, ExpenObjective { inner })
    })
}

/// # Safety
/// `objective` must be a live handle; `n` and `p` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn expen_objective_dims(objective: *const ExpenObjective, n: *mut usize, p: *mut usize) -> ExpenStatus {
    guard(|| {
        let (rows, cols) = handle(objective, "objective")?.inner.dims();
        write_out(n, rows, "n")?;
        write_out(p, cols, "p")
    })
}

/// # Safety
/// `objective` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn expen_objective_free(objective: *mut ExpenObjective) {
    release(objective);
}

/// Penalty model with an explicit `beta > 0`. The objective handle may be
/// freed afterwards; the model keeps its own reference.
///
/// # Safety
/// `objective` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn expen_model_new(objective: *const ExpenObjective, beta: f64, out: *mut *mut ExpenModel) -> ExpenStatus {
    guard(|| {
        let objective = handle(objective, "objective")?.inner.clone();
        publish(out, ExpenModel { inner: ExPenModel::new(objective, beta)? })
    })
}

/// Penalty model with `beta = ||grad f(X0)||_F / 10`.
///
/// # Safety
/// `objective` must be a live handle, `x0` must point to `x0_len` doubles and
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn expen_model_new_default_beta(
    objective: *const ExpenObjective,
    x0: *const f64,
    x0_len: usize,
    out: *mut *mut ExpenModel,
) -> ExpenStatus {
    guard(|| {
        let objective = handle(objective, "objective")?.inner.clone();
        let (n, p) = objective.dims();
        let x0 = read_matrix(x0, x0_len, n, p, "x0")?;
        publish(out, ExpenModel { inner: ExPenModel::with_default_beta(objective, &x0)? })
    })
}

/// # Safety
/// `model` must be a live handle; `beta` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn expen_model_beta(model: *const ExpenModel, beta: *mut f64) -> ExpenStatus {
    guard(|| write_out(beta, handle(model, "model")?.inner.beta(), "beta"))
}

/// Penalty value `h(X)`.
///
/// # Safety
/// `model` must be a live handle, `x` must point to `len` doubles and `value`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn expen_model_value(model: *const ExpenModel, x: *const f64, len: usize, value: *mut f64) -> ExpenStatus {
    guard(|| {
        let model = &handle(model, "model")?.inner;
        let (n, p) = model.dims();
        let x = read_matrix(x, len, n, p, "x")?;
        write_out(value, model.value(&x)?, "value")
    })
}

/// Penalty gradient, written row-major into `out` (`len` entries).
///
/// # Safety
/// `x` and `out` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn expen_model_gradient(model: *const ExpenModel, x: *const f64, len: usize, out: *mut f64) -> ExpenStatus {
    guard(|| {
        let model = &handle(model, "model")?.inner;
        let (n, p) = model.dims();
        let x = read_matrix(x, len, n, p, "x")?;
        write_matrix(&model.gradient(&x)?, out, len, "out")
    })
}

/// Penalty Hessian applied to `d`, written row-major into `out`.
///
/// # Safety
/// `x`, `d` and `out` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn expen_model_hess_vec(
    model: *const ExpenModel,
    x: *const f64,
    d: *const f64,
    len: usize,
    out: *mut f64,
) -> ExpenStatus {
    guard(|| {
        let model = &handle(model, "model")?.inner;
        let (n, p) = model.dims();
        let x = read_matrix(x, len, n, p, "x")?;
        let d = read_matrix(d, len, n, p, "d")?;
        write_matrix(&model.hess_vec(&x, &d)?, out, len, "out")
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn expen_model_free(model: *mut ExpenModel) {
    release(model);
}

/// Seeded random point with orthonormal columns, written row-major.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn expen_random_stiefel(n: usize, p: usize, seed: u64, out: *mut f64, len: usize) -> ExpenStatus {
    guard(|| write_matrix(&random_stiefel(RandomSpec::new(n, p, seed)?)?, out, len, "out"))
}

/// Nearest matrix with orthonormal columns.
///
/// # Safety
/// `x` and `out` must each point to `n * p` doubles.
#[no_mangle]
pub unsafe extern "C" fn expen_project_stiefel(n: usize, p: usize, x: *const f64, out: *mut f64) -> ExpenStatus {
    guard(|| {
        let len = n.checked_mul(p).ok_or_else(|| invalid(format!("{n}x{p} overflows")))?;
        let x = read_matrix(x, len, n, p, "x")?;
        write_matrix(&expen::geometry::project_stiefel(&x)?, out, len, "out")
    })
}

/// `||X^T X - I||_F`.
///
/// # Safety
/// `x` must point to `n * p` doubles and `value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn expen_feasibility(n: usize, p: usize, x: *const f64, value: *mut f64) -> ExpenStatus {
    guard(|| {
        let len = n.checked_mul(p).ok_or_else(|| invalid(format!("{n}x{p} overflows")))?;
        let x = read_matrix(x, len, n, p, "x")?;
        write_out(value, expen::geometry::feasibility(&x), "value")
    })
}

/// Defaults matching the benchmark protocol.
#[no_mangle]
pub extern "C" fn expen_solver_config_default() -> ExpenSolverConfig {
    let d = SolverConfig::default();
    ExpenSolverConfig {
        delta: d.delta,
        sigma: d.sigma,
        grad_tol: d.grad_tol,
        max_iters: d.max_iters as u64,
        initial_step: d.initial_step,
        restart_orthogonality: d.restart_orthogonality.unwrap_or(0.0),
        solver: ExpenSolver::FletcherReeves as u32,
    }
}

fn solver_config(c: &ExpenSolverConfig) -> Result<SolverConfig, Failure> {
    let max_iters = usize::try_from(c.max_iters).map_err(|_| invalid(format!("max_iters {} too large", c.max_iters)))?;
    Ok(SolverConfig {
        delta: c.delta,
        sigma: c.sigma,
        grad_tol: c.grad_tol,
        max_iters,
        initial_step: c.initial_step,
        restart_orthogonality: (c.restart_orthogonality > 0.0).then_some(c.restart_orthogonality),
        trace_enabled: false,
    })
}

/// Minimises the penalty from `x0`. A line-search failure is reported through
/// the report's termination field, not as an error status.
///
/// # Safety
/// `model` must be a live handle, `x0` must point to `len` doubles, `config`
/// must be null (defaults) or valid, and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn expen_solve(
    model: *const ExpenModel,
    x0: *const f64,
    len: usize,
    config: *const ExpenSolverConfig,
    out: *mut *mut ExpenReport,
) -> ExpenStatus {
    guard(|| {
        let model = &handle(model, "model")?.inner;
        let (n, p) = model.dims();
        let x0 = read_matrix(x0, len, n, p, "x0")?;
        let ffi_config = config.as_ref().copied().unwrap_or_else(|| expen_solver_config_default());
        let config = solver_config(&ffi_config)?;
        let report = match ffi_config.solver {
            s if s == ExpenSolver::FletcherReeves as u32 => frcg_solve(model, &x0, &config)?,
            s if s == ExpenSolver::GradientDescent as u32 => gd_solve(model, &x0, &config)?,
            other => return Err(invalid(format!("unknown solver {other}"))),
        };
        publish(out, ExpenReport { inner: report })
    })
}

/// # Safety
/// `report` must be a live handle; `summary` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn expen_report_summary(report: *const ExpenReport, summary: *mut ExpenReportSummary) -> ExpenStatus {
    guard(|| {
        let r = &handle(report, "report")?.inner;
        let termination = match r.termination {
            Termination::GradTol => ExpenTermination::GradTol,
            Termination::MaxIters => ExpenTermination::MaxIters,
            Termination::LineSearchFailure => ExpenTermination::LineSearchFailure,
        };
        let value = ExpenReportSummary {
            fval: r.fval,
            iterations: r.iterations as u64,
            stationarity: r.stationarity,
            feasibility: r.feasibility,
            wall_seconds: r.wall_seconds,
            termination,
            h_initial: r.h_initial,
            h_final: r.h_final,
            grad_h_norm: r.certificate.grad_h_norm,
            restarts: r.restarts as u64,
        };
        write_out(summary, value, "summary")
    })
}

/// Projected final point, row-major.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn expen_report_final_point(report: *const ExpenReport, out: *mut f64, len: usize) -> ExpenStatus {
    guard(|| write_matrix(&handle(report, "report")?.inner.final_point, out, len, "out"))
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn expen_report_free(report: *mut ExpenReport) {
    release(report);
}
