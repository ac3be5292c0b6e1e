//! C ABI for the usct toolkit.
//!
//! Every fallible call returns a [`UsctStatus`]; on failure the message is
//! kept per thread and read back with [`usct_last_error`]. Objects live
//! behind opaque pointers that the caller releases with the matching
//! `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use num_complex::Complex64;
use usct::array::{make_point_source, simulate_observation, SourcePlan, TransducerRing};
use usct::field::{Grid2D, RealField};
use usct::io::FieldContainer;
use usct::medium::SoundSpeedMap;
use usct::phantom::{gen_phantom, PhantomKind, PhantomSpec};
use usct::solver::{HelmholtzSolver, SolverOptions};
use usct::Error;

/// Result of every fallible call. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UsctStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    BufferTooSmall = 3,
    Config = 4,
    Io = 5,
    Format = 6,
    Solver = 7,
    Panic = 8,
}

/// Phantom family for [`usct_phantom_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UsctPhantomKind {
    BreastLike = 0,
    BrainLike = 1,
    InclusionTest = 2,
}

/// Sound-speed map on a centered square-cell grid.
pub struct UsctMedium(SoundSpeedMap);

/// Helmholtz solver bound to one medium and angular frequency.
pub struct UsctSolver(HelmholtzSolver);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> UsctStatus {
    match e.category() {
        "config" => UsctStatus::Config,
        "io" => UsctStatus::Io,
        "format" => UsctStatus::Format,
        "solver" => UsctStatus::Solver,
        _ => UsctStatus::InvalidInput,
    }
}

/// Internal failure carrying the status it maps to.
struct Fail(UsctStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(UsctStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic for [`usct_last_error`].
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> UsctStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            UsctStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            UsctStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Fail(UsctStatus::InvalidInput, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_slice<'a, T>(ptr: *mut T, len: usize, need: usize) -> Result<&'a mut [T], Fail> {
    if ptr.is_null() {
        return Err(null("output buffer"));
    }
    if len < need {
        return Err(Fail(UsctStatus::BufferTooSmall, format!("buffer holds {len} values, {need} needed")));
    }
    Ok(unsafe { std::slice::from_raw_parts_mut(ptr, need) })
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn usct_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn usct_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Medium from `nx * ny` row-major speeds (m/s), background speed `c0`.
///
/// # Safety
/// `speeds` must point to `nx * ny` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn usct_medium_new(
    nx: usize,
    ny: usize,
    dx: f64,
    c0: f64,
    speeds: *const f64,
    out: *mut *mut UsctMedium,
) -> UsctStatus {
    guard(|| {
        if speeds.is_null() {
            return Err(null("speeds"));
        }
        let grid = Grid2D::centered(nx, ny, dx)?;
        let values = unsafe { std::slice::from_raw_parts(speeds, grid.len()) }.to_vec();
        let field = RealField::new(grid, values)?;
        store(out, UsctMedium(SoundSpeedMap::new(field, c0, None)?))
    })
}

/// Seeded random phantom with default tissue ranges and water background.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn usct_phantom_new(
    kind: UsctPhantomKind,
    nx: usize,
    ny: usize,
    dx: f64,
    seed: u64,
    out: *mut *mut UsctMedium,
) -> UsctStatus {
    guard(|| {
        let kind = match kind {
            UsctPhantomKind::BreastLike => PhantomKind::BreastLike,
            UsctPhantomKind::BrainLike => PhantomKind::BrainLike,
            UsctPhantomKind::InclusionTest => PhantomKind::InclusionTest,
        };
        let spec = PhantomSpec::new(kind, Grid2D::centered(nx, ny, dx)?, seed);
        store(out, UsctMedium(gen_phantom(&spec)?))
    })
}

/// Reads a real container written by the toolkit as a medium.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn usct_medium_read(path: *const c_char, c0: f64, out: *mut *mut UsctMedium) -> UsctStatus {
    guard(|| {
        let field = FieldContainer::read(&unsafe { path_arg(path) }?)?.to_real_field()?;
        store(out, UsctMedium(SoundSpeedMap::new(field, c0, None)?))
    })
}

/// Writes the medium as a real64 container.
///
/// # Safety
/// `medium` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn usct_medium_write(medium: *const UsctMedium, path: *const c_char) -> UsctStatus {
    guard(|| {
        let m = unsafe { medium.as_ref() }.ok_or_else(|| null("medium"))?;
        usct::io::write_real_field(&unsafe { path_arg(path) }?, m.0.field())?;
        Ok(())
    })
}

/// Grid size of the medium.
///
/// # Safety
/// `medium` must come from this library; `nx`, `ny`, `dx` must be writable.
#[no_mangle]
pub unsafe extern "C" fn usct_medium_shape(
    medium: *const UsctMedium,
    nx: *mut usize,
    ny: *mut usize,
    dx: *mut f64,
) -> UsctStatus {
    guard(|| {
        let m = unsafe { medium.as_ref() }.ok_or_else(|| null("medium"))?;
        if nx.is_null() || ny.is_null() || dx.is_null() {
            return Err(null("shape output"));
        }
        let g = m.0.grid();
        unsafe {
            *nx = g.nx();
            *ny = g.ny();
            *dx = g.dx();
        }
        Ok(())
    })
}

/// Copies the row-major speeds into `buf` of `len` doubles.
///
/// # Safety
/// `medium` must come from this library; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn usct_medium_speeds(medium: *const UsctMedium, buf: *mut f64, len: usize) -> UsctStatus {
    guard(|| {
        let m = unsafe { medium.as_ref() }.ok_or_else(|| null("medium"))?;
        let s = m.0.speeds();
        unsafe { out_slice(buf, len, s.len()) }?.copy_from_slice(s);
        Ok(())
    })
}

/// Releases a medium. Null is ignored.
///
/// # Safety
/// `medium` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn usct_medium_free(medium: *mut UsctMedium) {
    if !medium.is_null() {
        drop(unsafe { Box::from_raw(medium) });
    }
}

/// Solver for `medium` at angular frequency `omega` (rad/s). `tol` and
/// `max_iter` of zero keep the defaults. The medium may be freed afterwards.
///
/// # Safety
/// `medium` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn usct_solver_new(
    medium: *const UsctMedium,
    omega: f64,
    tol: f64,
    max_iter: usize,
    out: *mut *mut UsctSolver,
) -> UsctStatus {
    guard(|| {
        let m = unsafe { medium.as_ref() }.ok_or_else(|| null("medium"))?;
        let mut opts = SolverOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        if max_iter > 0 {
            opts.max_iter = max_iter;
        }
        store(out, UsctSolver(HelmholtzSolver::new(&m.0, omega, &opts)?))
    })
}

/// Field of a point source at `(x, y)` metres. `field` receives `nx * ny`
/// interleaved (re, im) pairs, so `len` counts doubles and must be at least
/// `2 * nx * ny`. `iterations` may be null.
///
/// # Safety
/// `solver` must come from this library; `field` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn usct_solver_point_source(
    solver: *const UsctSolver,
    x: f64,
    y: f64,
    amplitude_re: f64,
    amplitude_im: f64,
    field: *mut f64,
    len: usize,
    iterations: *mut usize,
) -> UsctStatus {
    guard(|| {
        let s = unsafe { solver.as_ref() }.ok_or_else(|| null("solver"))?;
        let grid = *s.0.interior_grid();
        let rho = make_point_source(&grid, usct::field::Point::new(x, y), Complex64::new(amplitude_re, amplitude_im))?;
        let buf = unsafe { out_slice(field, len, 2 * grid.len()) }?;
        let (u, report) = s.0.solve(&rho)?;
        if !report.converged {
            return Err(Error::NotConverged { source_index: 0, residual: report.final_residual() }.into());
        }
        for (pair, v) in buf.chunks_exact_mut(2).zip(u.values()) {
            pair[0] = v.re;
            pair[1] = v.im;
        }
        if !iterations.is_null() {
            unsafe { *iterations = report.iterations };
        }
        Ok(())
    })
}

/// Releases a solver. Null is ignored.
///
/// # Safety
/// `solver` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn usct_solver_free(solver: *mut UsctSolver) {
    if !solver.is_null() {
        drop(unsafe { Box::from_raw(solver) });
    }
}

/// Full transmit/receive matrix for `count` transducers on a ring of
/// `radius` metres around the grid center, every transducer firing with unit
/// amplitude. `data` receives `count * count` interleaved (re, im) pairs,
/// row = source, so `len` must be at least `2 * count * count`.
///
/// # Safety
/// `medium` must come from this library; `data` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn usct_observe(
    medium: *const UsctMedium,
    omega: f64,
    count: usize,
    radius: f64,
    tol: f64,
    data: *mut f64,
    len: usize,
) -> UsctStatus {
    guard(|| {
        let m = unsafe { medium.as_ref() }.ok_or_else(|| null("medium"))?;
        let ring = TransducerRing::new(m.0.grid().center(), radius, count)?;
        let plan = SourcePlan::every_nth(&ring, 1)?;
        let buf = unsafe { out_slice(data, len, 2 * count * count) }?;
        let opts = if tol > 0.0 { SolverOptions::with_tol(tol) } else { SolverOptions::default() };
        let y = simulate_observation(&m.0, &ring, &plan, omega, &opts)?;
        if let Some(k) = y.row_converged.iter().position(|ok| !ok) {
            return Err(Error::NotConverged { source_index: k, residual: f64::NAN }.into());
        }
        for (pair, v) in buf.chunks_exact_mut(2).zip(&y.data) {
            pair[0] = v.re;
            pair[1] = v.im;
        }
        Ok(())
    })
}
