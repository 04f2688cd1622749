//! C ABI over `darcy-core`.
//!
//! Results live behind opaque handles that the caller releases with the
//! matching `*_free` function. Every entry point returns a [`DarcyStatus`];
//! on failure, [`darcy_last_error`] describes the error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use darcy_core::convergence::{measure_errors, ErrorRow, ERROR_COLUMNS};
use darcy_core::export::{write_report_csv, write_vtk, VtkFields};
use darcy_core::gpp::GppParams;
use darcy_core::{builtin_problem, run_convergence, run_method, ConvergenceReport, Degree, Error, Method, MethodOptions, RunResult, StorageMode};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DarcyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownName = 3,
    MeshError = 4,
    InterfaceError = 5,
    SolverFailure = 6,
    NoExactSolution = 7,
    IoError = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

impl From<&Error> for DarcyStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::IndexOutOfRange { .. } | Error::Parse(_) => DarcyStatus::InvalidArgument,
            Error::Unknown { .. } => DarcyStatus::UnknownName,
            Error::Mesh(_) => DarcyStatus::MeshError,
            Error::Interface { .. } => DarcyStatus::InterfaceError,
            Error::NoExactSolution(_) => DarcyStatus::NoExactSolution,
            Error::Io { .. } => DarcyStatus::IoError,
            Error::MeshRun { source, .. } => DarcyStatus::from(source.as_ref()),
            Error::ConflictingConstraint { .. }
            | Error::Singular { .. }
            | Error::NotConverged { .. }
            | Error::SingularMacro { .. }
            | Error::MacroFailures { .. } => DarcyStatus::SolverFailure,
        }
    }
}

/// Method parameters. Obtain defaults from [`darcy_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DarcyOptions {
    pub delta1: f64,
    pub delta2: f64,
    pub gpp_delta: f64,
    pub gpp_alpha: f64,
    pub macro_x: u32,
    pub macro_y: u32,
}

/// Errors against the exact solution on one mesh.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DarcyErrors {
    pub nx: u32,
    pub ny: u32,
    pub h: f64,
    pub l2_p: f64,
    pub h1_p: f64,
    pub l2_u: f64,
    pub l2_div: f64,
    pub grad_sc: f64,
}

impl From<&ErrorRow> for DarcyErrors {
    fn from(r: &ErrorRow) -> Self {
        Self { nx: r.nx as u32, ny: r.ny as u32, h: r.h, l2_p: r.l2_p, h1_p: r.h1_p, l2_u: r.l2_u, l2_div: r.l2_div, grad_sc: r.grad_sc }
    }
}

/// Opaque solution of one run.
pub struct DarcySolution(RunResult);

/// Opaque convergence report.
pub struct DarcyReport(ConvergenceReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(e: Error) -> DarcyStatus {
    set_error(e.to_string());
    DarcyStatus::from(&e)
}

/// Runs `f`, turning panics into [`DarcyStatus::Panic`].
fn guard(f: impl FnOnce() -> DarcyStatus) -> DarcyStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == DarcyStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(format!("internal panic: {}", msg.unwrap_or_else(|| "unknown".into())));
            DarcyStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("argument `", stringify!($p), "` is null"));
            return DarcyStatus::NullPointer;
        })+
    };
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, DarcyStatus> {
    // SAFETY: caller guarantees a valid NUL-terminated string; null is checked before
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| {
        set_error(format!("argument `{name}` is not UTF-8"));
        DarcyStatus::InvalidArgument
    })
}

fn degree(order: u32) -> Result<Degree, DarcyStatus> {
    Degree::from_order(order as usize).map_err(fail)
}

unsafe fn options(p: *const DarcyOptions) -> MethodOptions {
    // SAFETY: null means defaults; otherwise the caller passes a valid struct
    let o = if p.is_null() { darcy_options_default() } else { unsafe { *p } };
    MethodOptions {
        delta1: o.delta1,
        delta2: o.delta2,
        gpp: GppParams { delta: o.gpp_delta, alpha: o.gpp_alpha },
        macros: (o.macro_x as usize, o.macro_y as usize),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn darcy_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn darcy_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn darcy_options_default() -> DarcyOptions {
    let d = MethodOptions::default();
    DarcyOptions {
        delta1: d.delta1,
        delta2: d.delta2,
        gpp_delta: d.gpp.delta,
        gpp_alpha: d.gpp.alpha,
        macro_x: d.macros.0 as u32,
        macro_y: d.macros.1 as u32,
    }
}

/// Solves a built-in problem. `opts` may be null for defaults. On success
/// `*out` receives a handle to release with [`darcy_solution_free`].
///
/// # Safety
/// `problem` and `method` must be NUL-terminated strings, `opts` null or
/// valid, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn darcy_run(
    problem: *const c_char,
    method: *const c_char,
    degree_order: u32,
    nx: u32,
    ny: u32,
    opts: *const DarcyOptions,
    out: *mut *mut DarcySolution,
) -> DarcyStatus {
    guard(|| {
        non_null!(problem, method, out);
        // SAFETY: checked non-null above, validity is the caller's contract
        let inner = || -> Result<DarcySolution, DarcyStatus> {
            let problem = builtin_problem(unsafe { str_arg(problem, "problem") }?).map_err(fail)?;
            let method: Method = unsafe { str_arg(method, "method") }?.parse().map_err(fail)?;
            let degree = degree(degree_order)?;
            let opts = unsafe { options(opts) };
            run_method(&problem, method, degree, nx as usize, ny as usize, &opts).map(DarcySolution).map_err(fail)
        };
        match inner() {
            Ok(s) => {
                // SAFETY: out checked non-null
                unsafe { *out = Box::into_raw(Box::new(s)) };
                DarcyStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// # Safety
/// `solution` must come from [`darcy_run`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn darcy_solution_free(solution: *mut DarcySolution) {
    if !solution.is_null() {
        // SAFETY: pointer created by Box::into_raw in darcy_run
        drop(unsafe { Box::from_raw(solution) });
    }
}

/// Node and element counts of the solution mesh.
///
/// # Safety
/// `solution` must be a live handle; `nodes` and `elements` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn darcy_solution_counts(solution: *const DarcySolution, nodes: *mut usize, elements: *mut usize) -> DarcyStatus {
    guard(|| {
        non_null!(solution, nodes, elements);
        // SAFETY: all checked non-null
        unsafe {
            let s = &(*solution).0;
            *nodes = s.mesh.node_count();
            *elements = s.mesh.element_count();
        }
        DarcyStatus::Ok
    })
}

/// Copies the nodal potential into `buffer` of `len` doubles.
///
/// # Safety
/// `solution` must be a live handle; `buffer` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn darcy_solution_potential(solution: *const DarcySolution, buffer: *mut f64, len: usize) -> DarcyStatus {
    guard(|| {
        non_null!(solution, buffer);
        // SAFETY: checked non-null
        let values = unsafe { &(*solution).0.potential.values };
        if len < values.len() {
            set_error(format!("buffer holds {len} values, {} needed", values.len()));
            return DarcyStatus::BufferTooSmall;
        }
        // SAFETY: buffer has room for len >= values.len() doubles
        unsafe { ptr::copy_nonoverlapping(values.as_ptr(), buffer, values.len()) };
        DarcyStatus::Ok
    })
}

/// Velocity of `element` at reference point `(xi, eta)` in `[-1,1]^2`,
/// written to `out[0..2]`.
///
/// # Safety
/// `solution` must be a live handle; `out` valid for two writes.
#[no_mangle]
pub unsafe extern "C" fn darcy_solution_velocity_at(
    solution: *const DarcySolution,
    element: usize,
    xi: f64,
    eta: f64,
    out: *mut f64,
) -> DarcyStatus {
    guard(|| {
        non_null!(solution, out);
        // SAFETY: checked non-null
        let s = unsafe { &(*solution).0 };
        if element >= s.mesh.element_count() {
            return fail(Error::IndexOutOfRange { index: element, dim: s.mesh.element_count() });
        }
        if !(xi.abs() <= 1.0 && eta.abs() <= 1.0) {
            return fail(Error::InvalidArgument(format!("reference point ({xi}, {eta}) outside [-1,1]^2")));
        }
        let u = s.velocity_field().value(&s.mesh, element, [xi, eta]);
        // SAFETY: out valid for two doubles
        unsafe {
            *out = u[0];
            *out.add(1) = u[1];
        }
        DarcyStatus::Ok
    })
}

/// Errors against the exact solution, when the problem has one.
///
/// # Safety
/// `solution` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn darcy_solution_errors(solution: *const DarcySolution, out: *mut DarcyErrors) -> DarcyStatus {
    guard(|| {
        non_null!(solution, out);
        // SAFETY: checked non-null
        match measure_errors(unsafe { &(*solution).0 }) {
            Ok(row) => {
                // SAFETY: checked non-null
                unsafe { *out = DarcyErrors::from(&row) };
                DarcyStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Writes the mesh, potential and velocity as legacy ASCII VTK.
///
/// # Safety
/// `solution` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn darcy_solution_write_vtk(solution: *const DarcySolution, path: *const c_char) -> DarcyStatus {
    guard(|| {
        non_null!(solution, path);
        // SAFETY: checked non-null
        let (s, path) = unsafe { (&(*solution).0, str_arg(path, "path")) };
        let path = match path {
            Ok(p) => p,
            Err(st) => return st,
        };
        let values = s.element_velocities();
        let duplicate = s.velocity.as_ref().is_none_or(|v| v.mode != StorageMode::C0Nodal);
        let fields = VtkFields { potential: Some(&s.potential), velocity: Some(&values), duplicate_points: duplicate };
        match write_vtk(Path::new(path), &s.mesh, &format!("{} {}", s.problem.name, s.method), &fields) {
            Ok(()) => DarcyStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Refinement study over `count` square meshes `meshes[i] x meshes[i]`.
///
/// # Safety
/// Strings NUL-terminated, `meshes` valid for `count` reads, `opts` null
/// or valid, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn darcy_converge(
    problem: *const c_char,
    method: *const c_char,
    degree_order: u32,
    meshes: *const u32,
    count: usize,
    opts: *const DarcyOptions,
    out: *mut *mut DarcyReport,
) -> DarcyStatus {
    guard(|| {
        non_null!(problem, method, meshes, out);
        // SAFETY: checked non-null, validity is the caller's contract
        let inner = || -> Result<DarcyReport, DarcyStatus> {
            let problem = builtin_problem(unsafe { str_arg(problem, "problem") }?).map_err(fail)?;
            let method: Method = unsafe { str_arg(method, "method") }?.parse().map_err(fail)?;
            let degree = degree(degree_order)?;
            let list: Vec<(usize, usize)> =
                unsafe { std::slice::from_raw_parts(meshes, count) }.iter().map(|&n| (n as usize, n as usize)).collect();
            let opts = unsafe { options(opts) };
            run_convergence(&problem, method, degree, &list, &opts).map(DarcyReport).map_err(fail)
        };
        match inner() {
            Ok(r) => {
                // SAFETY: out checked non-null
                unsafe { *out = Box::into_raw(Box::new(r)) };
                DarcyStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// # Safety
/// `report` must come from [`darcy_converge`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn darcy_report_free(report: *mut DarcyReport) {
    if !report.is_null() {
        // SAFETY: pointer created by Box::into_raw in darcy_converge
        drop(unsafe { Box::from_raw(report) });
    }
}

/// Number of meshes in the report, 0 for null.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn darcy_report_len(report: *const DarcyReport) -> usize {
    // SAFETY: null handled, otherwise a live handle
    unsafe { report.as_ref() }.map_or(0, |r| r.0.rows.len())
}

/// Row `index`, coarsest mesh first.
///
/// # Safety
/// `report` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn darcy_report_row(report: *const DarcyReport, index: usize, out: *mut DarcyErrors) -> DarcyStatus {
    guard(|| {
        non_null!(report, out);
        // SAFETY: checked non-null
        let rows = unsafe { &(*report).0.rows };
        match rows.get(index) {
            Some(r) => {
                // SAFETY: checked non-null
                unsafe { *out = DarcyErrors::from(r) };
                DarcyStatus::Ok
            }
            None => fail(Error::IndexOutOfRange { index, dim: rows.len() }),
        }
    })
}

/// Least-squares rate over the finest three meshes of one error column
/// (`l2_p`, `h1_p`, `l2_u`, `l2_div` or `grad_sc`).
///
/// # Safety
/// `report` must be a live handle; `column` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn darcy_report_ls_rate(report: *const DarcyReport, column: *const c_char, out: *mut f64) -> DarcyStatus {
    guard(|| {
        non_null!(report, column, out);
        // SAFETY: checked non-null
        let column = match unsafe { str_arg(column, "column") } {
            Ok(c) => c,
            Err(s) => return s,
        };
        if !ERROR_COLUMNS.contains(&column) {
            return fail(Error::Unknown { kind: "error column", name: column.to_string() });
        }
        // SAFETY: checked non-null
        unsafe { *out = (*report).0.ls_rate(column) };
        DarcyStatus::Ok
    })
}

/// Writes the report as CSV.
///
/// # Safety
/// `report` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn darcy_report_write_csv(report: *const DarcyReport, path: *const c_char) -> DarcyStatus {
    guard(|| {
        non_null!(report, path);
        // SAFETY: checked non-null
        let path = match unsafe { str_arg(path, "path") } {
            Ok(p) => p,
            Err(s) => return s,
        };
        // SAFETY: checked non-null
        match write_report_csv(unsafe { &(*report).0 }, Path::new(path)) {
            Ok(()) => DarcyStatus::Ok,
            Err(e) => fail(e),
        }
    })
}
