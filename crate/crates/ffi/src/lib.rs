//! C interface to the deflated GMRES solvers.
//!
//! Every function returns a [`DgStatus`]; on failure the message is available
//! from [`dg_last_error_message`] on the same thread. Handles are opaque and
//! must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use defgmres::cli::build_problem;
use defgmres::cli::config::ExperimentConfig;
use defgmres::deflation::{ApChoice, DeflationBasis};
use defgmres::harmonic::rdgmres;
use defgmres::krylov::{gmres, GmresConfig, Preconditioner, SolveReport};
use defgmres::linalg::SparseMatrix;
use defgmres::physics::{partition_to_basis, pdgmres, Partition, PartitionKind};
use defgmres::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// The report is still produced.
    NotConverged = 4,
    SingularCoarseMatrix = 5,
    SingularProblem = 6,
    EigenFailure = 7,
    Format = 8,
    Io = 9,
    Config = 10,
    SizeLimit = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgPrecond {
    Identity = 0,
    Jacobi = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgSolverOptions {
    pub restart: usize,
    pub max_iters: usize,
    pub min_iters: usize,
    pub tol: f64,
    pub precond: DgPrecond,
}

pub struct DgMatrix(SparseMatrix);

pub struct DgProblem {
    matrix: DgMatrix,
    rhs: Vec<f64>,
}

pub struct DgBasis(DeflationBasis);

pub struct DgReport(SolveReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. } => DgStatus::DimensionMismatch,
            Error::SingularCoarseMatrix { .. } => DgStatus::SingularCoarseMatrix,
            Error::SingularProblem(_) => DgStatus::SingularProblem,
            Error::EigNonConvergence { .. } | Error::HarmonicRitzFailure(_) => DgStatus::EigenFailure,
            Error::Format { .. } => DgStatus::Format,
            Error::Config { .. } => DgStatus::Config,
            Error::InvalidArgument(_) => DgStatus::InvalidArgument,
            Error::SizeLimit { .. } => DgStatus::SizeLimit,
            Error::Io { .. } => DgStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DgStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure and converts panics into [`DgStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<DgStatus, Failure>) -> DgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Failure(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {msg}"));
            DgStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<DgStatus, Failure> {
    *out = Box::into_raw(Box::new(value));
    Ok(DgStatus::Ok)
}

fn check_out<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    // SAFETY: caller guarantees `out` points to writable storage.
    unsafe { *out = ptr::null_mut() };
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Defaults: restart 30, 1000 iterations, tolerance 1e-6, Jacobi.
#[no_mangle]
pub extern "C" fn dg_solver_options_default() -> DgSolverOptions {
    let c = GmresConfig::default();
    DgSolverOptions {
        restart: c.restart,
        max_iters: c.max_iters,
        min_iters: c.min_iters,
        tol: c.tol,
        precond: DgPrecond::Jacobi,
    }
}

/// Copies a CSR matrix of order `n` with `nnz` stored entries.
///
/// # Safety
/// `row_offsets` must hold `n + 1` entries, `col_indices` and `values` `nnz`
/// entries each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_matrix_from_csr(
    n: usize,
    nnz: usize,
    row_offsets: *const usize,
    col_indices: *const usize,
    values: *const f64,
    out: *mut *mut DgMatrix,
) -> DgStatus {
    guard(|| {
        check_out(out)?;
        let offs = slice(row_offsets, n + 1, "row_offsets")?.to_vec();
        let cols = slice(col_indices, nnz, "col_indices")?.to_vec();
        let vals = slice(values, nnz, "values")?.to_vec();
        let m = SparseMatrix::new(n, offs, cols, vals)?;
        store(out, DgMatrix(m))
    })
}

/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dg_matrix_n(m: *const DgMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.n())
}

/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dg_matrix_nnz(m: *const DgMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.nnz())
}

/// # Safety
/// `m` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dg_matrix_free(m: *mut DgMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Builds the linear system described by an experiment config file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_problem_from_config(path: *const c_char, out: *mut *mut DgProblem) -> DgStatus {
    guard(|| {
        check_out(out)?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(DgStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let cfg = ExperimentConfig::load(Path::new(path))?;
        let built = build_problem(&cfg)?;
        store(
            out,
            DgProblem {
                matrix: DgMatrix(built.matrix),
                rhs: built.rhs,
            },
        )
    })
}

/// # Safety
/// `p` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dg_problem_n(p: *const DgProblem) -> usize {
    p.as_ref().map_or(0, |p| p.rhs.len())
}

/// Matrix owned by the problem; valid while the problem lives.
///
/// # Safety
/// `p` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dg_problem_matrix(p: *const DgProblem) -> *const DgMatrix {
    p.as_ref().map_or(ptr::null(), |p| &p.matrix)
}

/// Copies the right-hand side into `buf`, which must hold `len == n` values.
///
/// # Safety
/// `p` must be a live handle; `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn dg_problem_rhs(p: *const DgProblem, buf: *mut f64, len: usize) -> DgStatus {
    guard(|| copy_out(&handle(p, "problem")?.rhs, buf, len))
}

/// # Safety
/// `p` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dg_problem_free(p: *mut DgProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Dense deflation basis from `d` columns of length `n`, stored column after
/// column.
///
/// # Safety
/// `data` must hold `n * d` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_basis_from_columns(n: usize, d: usize, data: *const f64, out: *mut *mut DgBasis) -> DgStatus {
    guard(|| {
        check_out(out)?;
        let len = n
            .checked_mul(d)
            .ok_or_else(|| Failure(DgStatus::InvalidArgument, "n * d overflows".into()))?;
        let data = slice(data, len, "data")?;
        let cols = if n == 0 { vec![] } else { data.chunks(n).map(<[f64]>::to_vec).collect() };
        store(out, DgBasis(DeflationBasis::from_dense_columns(n, cols)?))
    })
}

/// One indicator column per distinct label; labels must cover `0..=max`.
///
/// # Safety
/// `labels` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dg_basis_from_labels(n: usize, labels: *const usize, out: *mut *mut DgBasis) -> DgStatus {
    guard(|| {
        check_out(out)?;
        let labels = slice(labels, n, "labels")?.to_vec();
        let part = Partition::from_labels(labels, PartitionKind::Manual)?;
        store(out, DgBasis(partition_to_basis(&part, None)?))
    })
}

/// # Safety
/// `b` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dg_basis_d(b: *const DgBasis) -> usize {
    b.as_ref().map_or(0, |b| b.0.d())
}

/// # Safety
/// `b` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dg_basis_free(b: *mut DgBasis) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

enum Method<'a> {
    Plain,
    Harmonic(usize),
    Physics(&'a DeflationBasis),
}

unsafe fn run(
    a: *const DgMatrix,
    rhs: *const f64,
    n: usize,
    opts: *const DgSolverOptions,
    method: impl FnOnce() -> Result<Method<'static>, Failure>,
    out: *mut *mut DgReport,
) -> DgStatus {
    guard(|| {
        check_out(out)?;
        let a = &handle(a, "matrix")?.0;
        let opts = match opts.as_ref() {
            Some(o) => *o,
            None => dg_solver_options_default(),
        };
        let b = slice(rhs, n, "rhs")?;
        let cfg = GmresConfig {
            restart: opts.restart,
            tol: opts.tol,
            max_iters: opts.max_iters,
            min_iters: opts.min_iters,
            ..GmresConfig::default()
        };
        let precond = match opts.precond {
            DgPrecond::Identity => Preconditioner::Identity,
            DgPrecond::Jacobi => Preconditioner::jacobi(a)?,
        };
        let report = match method()? {
            Method::Plain => gmres(a, b, None, &precond, &cfg, None)?,
            Method::Harmonic(d) => rdgmres(a, b, None, &precond, &cfg, d)?,
            Method::Physics(z) => pdgmres(a, b, None, &precond, &cfg, z.clone(), ApChoice::A)?,
        };
        let status = if report.converged { DgStatus::Ok } else { DgStatus::NotConverged };
        if status == DgStatus::NotConverged {
            set_error(format!("not converged after {} iterations", report.iterations));
        }
        store(out, DgReport(report))?;
        Ok(status)
    })
}

/// Restarted GMRES from a zero initial guess. `opts` may be null for defaults.
///
/// # Safety
/// `a` must be a live handle, `rhs` must hold `n` values, `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dg_gmres(
    a: *const DgMatrix,
    rhs: *const f64,
    n: usize,
    opts: *const DgSolverOptions,
    out: *mut *mut DgReport,
) -> DgStatus {
    run(a, rhs, n, opts, || Ok(Method::Plain), out)
}

/// GMRES deflated with `d` harmonic Ritz vectors refreshed from the first
/// full cycle.
///
/// # Safety
/// As for [`dg_gmres`].
#[no_mangle]
pub unsafe extern "C" fn dg_rdgmres(
    a: *const DgMatrix,
    rhs: *const f64,
    n: usize,
    opts: *const DgSolverOptions,
    d: usize,
    out: *mut *mut DgReport,
) -> DgStatus {
    run(a, rhs, n, opts, || Ok(Method::Harmonic(d)), out)
}

/// GMRES deflated with a fixed basis.
///
/// # Safety
/// As for [`dg_gmres`]; `basis` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dg_pdgmres(
    a: *const DgMatrix,
    rhs: *const f64,
    n: usize,
    opts: *const DgSolverOptions,
    basis: *const DgBasis,
    out: *mut *mut DgReport,
) -> DgStatus {
    run(a, rhs, n, opts, || Ok(Method::Physics(&handle(basis, "basis")?.0)), out)
}

/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dg_report_iterations(r: *const DgReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.iterations)
}

/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dg_report_converged(r: *const DgReport) -> bool {
    r.as_ref().is_some_and(|r| r.0.converged)
}

/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dg_report_final_relres(r: *const DgReport) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.0.final_relres)
}

/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dg_report_deflation_dim(r: *const DgReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.deflation_dim)
}

/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dg_report_n(r: *const DgReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.x.len())
}

/// Copies the solution; `len` must equal [`dg_report_n`].
///
/// # Safety
/// `r` must be a live handle; `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn dg_report_solution(r: *const DgReport, buf: *mut f64, len: usize) -> DgStatus {
    guard(|| copy_out(&handle(r, "report")?.0.x, buf, len))
}

/// Number of entries in the residual history, `iterations + 1`.
///
/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dg_report_history_len(r: *const DgReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.history.len())
}

/// Copies the relative residual history; `len` must equal
/// [`dg_report_history_len`].
///
/// # Safety
/// `r` must be a live handle; `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn dg_report_history(r: *const DgReport, buf: *mut f64, len: usize) -> DgStatus {
    guard(|| copy_out(&handle(r, "report")?.0.relative_history(), buf, len))
}

/// # Safety
/// `r` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dg_report_free(r: *mut DgReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<DgStatus, Failure> {
    if len != src.len() {
        return Err(Failure(
            DgStatus::DimensionMismatch,
            format!("buffer holds {len} values, need {}", src.len()),
        ));
    }
    if len > 0 {
        if buf.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, len);
    }
    Ok(DgStatus::Ok)
}
