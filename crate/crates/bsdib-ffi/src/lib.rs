//! C interface to the simulator: opaque handles, integer status codes, and
//! a per-thread error message. The committed header `include/bsdib.h` is
//! regenerated by the build script and must match this file.
//!
//! Conventions: every fallible call returns a [`BsdibStatus`]; on failure
//! the message behind [`bsdib_last_error`] describes what went wrong. Out
//! parameters are written only on success. Handles are freed exactly once
//! with their matching `_free` call; `NULL` is tolerated there.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use bsdib_core::cli_io::{load_config, parse_mode, run_to_directory, CliError};
use bsdib_core::kinetics::ModelParameters;
use bsdib_core::mesh::{
    build_graded_mesh, build_uniform_mesh, read_mesh_file, write_mesh_file, GradedMeshSpec,
    PolyhedralMesh,
};

/// Call outcome. Mirrors the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsdibStatus {
    Ok = 0,
    /// Unexpected internal failure (including a caught panic).
    Internal = 1,
    /// Invalid configuration, parameters, or arguments.
    Config = 2,
    /// The simulation left the admissible range and was aborted.
    Diverged = 3,
    /// File could not be read or written.
    Io = 4,
}

/// A polyhedral mesh handle.
pub struct BsdibMesh {
    inner: PolyhedralMesh,
}

/// Result summary of a finished run; the heavyweight output lives in the
/// run directory.
pub struct BsdibRunSummary {
    n_steps: usize,
    final_increment: f64,
    eta: Vec<f64>,
    theta: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(sanitized).unwrap());
}

fn fail(err: CliError) -> BsdibStatus {
    set_last_error(&err.to_string());
    match err.exit_code() {
        2 => BsdibStatus::Config,
        3 => BsdibStatus::Diverged,
        4 => BsdibStatus::Io,
        _ => BsdibStatus::Internal,
    }
}

fn config_error(message: &str) -> BsdibStatus {
    set_last_error(message);
    BsdibStatus::Config
}

/// Catches panics so they never unwind across the C boundary.
fn guarded(body: impl FnOnce() -> BsdibStatus) -> BsdibStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            BsdibStatus::Internal
        }
    }
}

/// Borrows a UTF-8 string argument.
///
/// # Safety
/// `arg` must be null or a valid NUL-terminated string.
unsafe fn utf8_arg<'a>(arg: *const c_char, name: &str) -> Result<&'a str, BsdibStatus> {
    if arg.is_null() {
        return Err(config_error(&format!("{name} is a null pointer")));
    }
    CStr::from_ptr(arg)
        .to_str()
        .map_err(|_| config_error(&format!("{name} is not valid UTF-8")))
}

fn emit_mesh(mesh: PolyhedralMesh, out: *mut *mut BsdibMesh) -> BsdibStatus {
    if out.is_null() {
        return config_error("out is a null pointer");
    }
    let handle = Box::new(BsdibMesh { inner: mesh });
    unsafe { *out = Box::into_raw(handle) };
    BsdibStatus::Ok
}

/// Writes `value` through `ptr` unless it is null; out parameters are
/// documented as null-or-valid, so null means the caller skips the value.
fn write_optional<T>(ptr: *mut T, value: T) {
    if !ptr.is_null() {
        unsafe { *ptr = value };
    }
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bsdib_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bsdib_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds the bottom-graded mesh of `[0,L]^3`: `fine_layers` layers of
/// `nx * nx` cubes, then `coarse_levels` coarsening levels.
#[no_mangle]
pub extern "C" fn bsdib_mesh_build_graded(
    domain_edge: f64,
    nx: u32,
    fine_layers: u32,
    coarse_levels: u32,
    out: *mut *mut BsdibMesh,
) -> BsdibStatus {
    guarded(|| {
        let spec = GradedMeshSpec {
            domain_edge,
            nx,
            fine_layers,
            coarse_levels,
        };
        match build_graded_mesh(&spec) {
            Ok(mesh) => emit_mesh(mesh, out),
            Err(err) => fail(err.into()),
        }
    })
}

/// Builds the uniform mesh of `[0,L]^3` with `nx` cubes per side.
#[no_mangle]
pub extern "C" fn bsdib_mesh_build_uniform(
    domain_edge: f64,
    nx: u32,
    out: *mut *mut BsdibMesh,
) -> BsdibStatus {
    guarded(|| match build_uniform_mesh(domain_edge, nx) {
        Ok(mesh) => emit_mesh(mesh, out),
        Err(err) => fail(err.into()),
    })
}

/// Reads a mesh from its binary file format.
///
/// # Safety
/// `path` must be null or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bsdib_mesh_load(
    path: *const c_char,
    out: *mut *mut BsdibMesh,
) -> BsdibStatus {
    guarded(|| {
        let path = match utf8_arg(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match read_mesh_file(Path::new(path)) {
            Ok(mesh) => emit_mesh(mesh, out),
            Err(err) => fail(err.into()),
        }
    })
}

/// Writes a mesh in its binary file format.
///
/// # Safety
/// `mesh` must be a live handle; `path` must be null or a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bsdib_mesh_save(
    mesh: *const BsdibMesh,
    path: *const c_char,
) -> BsdibStatus {
    guarded(|| {
        if mesh.is_null() {
            return config_error("mesh is a null pointer");
        }
        let path = match utf8_arg(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match write_mesh_file(&(*mesh).inner, Path::new(path)) {
            Ok(()) => BsdibStatus::Ok,
            Err(err) => fail(err.into()),
        }
    })
}

/// Entity counts of a mesh. Null out-pointers are skipped.
///
/// # Safety
/// `mesh` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bsdib_mesh_counts(
    mesh: *const BsdibMesh,
    out_vertices: *mut usize,
    out_faces: *mut usize,
    out_cells: *mut usize,
    out_surface_vertices: *mut usize,
) -> BsdibStatus {
    guarded(|| {
        if mesh.is_null() {
            return config_error("mesh is a null pointer");
        }
        let inner = &(*mesh).inner;
        for (slot, value) in [
            (out_vertices, inner.n_vertices()),
            (out_faces, inner.n_faces()),
            (out_cells, inner.n_cells()),
            (out_surface_vertices, inner.n_gamma_vertices()),
        ] {
            if !slot.is_null() {
                *slot = value;
            }
        }
        BsdibStatus::Ok
    })
}

/// Frees a mesh handle.
///
/// # Safety
/// `mesh` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn bsdib_mesh_free(mesh: *mut BsdibMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Runs a simulation from a config file into `out_dir`, like the CLI `run`
/// subcommand. `mode` is `"3d"` or `"2d"`. When `out_summary` is non-null
/// it receives a summary handle on success.
///
/// # Safety
/// String arguments must be null or valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn bsdib_run(
    config_path: *const c_char,
    mode: *const c_char,
    out_dir: *const c_char,
    out_summary: *mut *mut BsdibRunSummary,
) -> BsdibStatus {
    guarded(|| {
        let (config_path, mode, out_dir) = match (
            utf8_arg(config_path, "config_path"),
            utf8_arg(mode, "mode"),
            utf8_arg(out_dir, "out_dir"),
        ) {
            (Ok(c), Ok(m), Ok(o)) => (c, m, o),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let run = || -> Result<BsdibRunSummary, CliError> {
            let config = load_config(Path::new(config_path))?;
            let mode = parse_mode(mode)?;
            let artifacts = run_to_directory(&config, mode, Path::new(out_dir), false)?;
            let result = artifacts.result;
            Ok(BsdibRunSummary {
                n_steps: result.n_steps,
                final_increment: result.increments.eta.last().copied().unwrap_or(0.0),
                eta: result.final_state.eta,
                theta: result.final_state.theta,
            })
        };
        match run() {
            Ok(summary) => {
                if !out_summary.is_null() {
                    *out_summary = Box::into_raw(Box::new(summary));
                }
                BsdibStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Number of time steps the run took.
///
/// # Safety
/// `summary` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bsdib_run_summary_n_steps(summary: *const BsdibRunSummary) -> usize {
    if summary.is_null() {
        return 0;
    }
    (*summary).n_steps
}

/// Last per-step increment of the surface field `eta`.
///
/// # Safety
/// `summary` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bsdib_run_summary_final_increment(summary: *const BsdibRunSummary) -> f64 {
    if summary.is_null() {
        return f64::NAN;
    }
    (*summary).final_increment
}

/// Number of surface nodes (length of the field arrays).
///
/// # Safety
/// `summary` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bsdib_run_summary_surface_len(summary: *const BsdibRunSummary) -> usize {
    if summary.is_null() {
        return 0;
    }
    (*summary).eta.len()
}

/// Final surface field `eta`, one value per surface node. Valid until the
/// summary is freed.
///
/// # Safety
/// `summary` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bsdib_run_summary_eta(summary: *const BsdibRunSummary) -> *const f64 {
    if summary.is_null() {
        return ptr::null();
    }
    (*summary).eta.as_ptr()
}

/// Final surface field `theta`, one value per surface node. Valid until the
/// summary is freed.
///
/// # Safety
/// `summary` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bsdib_run_summary_theta(summary: *const BsdibRunSummary) -> *const f64 {
    if summary.is_null() {
        return ptr::null();
    }
    (*summary).theta.as_ptr()
}

/// Frees a run summary handle.
///
/// # Safety
/// `summary` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn bsdib_run_summary_free(summary: *mut BsdibRunSummary) {
    if !summary.is_null() {
        drop(Box::from_raw(summary));
    }
}

/// Linear stability of the spatially homogeneous equilibrium at bifurcation
/// point `(B, C)` with the standard fixed constants and `gamma = 0`.
/// Writes 1 into `out_stable` when all eigenvalues have negative real part,
/// and the largest real part into `out_max_real_part` (null skips either).
#[no_mangle]
pub extern "C" fn bsdib_stability_check(
    b_coef: f64,
    c_coef: f64,
    out_stable: *mut i32,
    out_max_real_part: *mut f64,
) -> BsdibStatus {
    guarded(|| {
        let params = ModelParameters::baseline(b_coef, c_coef);
        let report = match params.validate().and_then(|()| params.stability_check()) {
            Ok(report) => report,
            Err(err) => return fail(err.into()),
        };
        let max_re = report
            .eigenvalues
            .iter()
            .fold(f64::NEG_INFINITY, |acc, e| acc.max(e.re));
        write_optional(out_stable, report.stable as i32);
        write_optional(out_max_real_part, max_re);
        BsdibStatus::Ok
    })
}
