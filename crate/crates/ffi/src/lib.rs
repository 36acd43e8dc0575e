//! C interface to `trotterflow`.
//!
//! Matrices cross the boundary as row-major arrays of interleaved `(re, im)` doubles, so an
//! `r x c` matrix occupies `2 r c` doubles. Vectors use the same interleaving. Every entry
//! point returns a [`TfStatus`]; on failure the message is available from
//! [`tf_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use trotterflow::flow::{flow_matrix_element, FlowDiscretization, StepFunction, StepScheme};
use trotterflow::runner::{run_config_text, RunStatus};
use trotterflow::semigroup::semigroup;
use trotterflow::structure::{build_inner_structure, combined_structure, EHStructure};
use trotterflow::table::{Cell, OutputFormat};
use trotterflow::{ComplexMatrix, Error};

use num_complex::Complex64;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotSelfAdjoint = 4,
    NotUnitary = 5,
    Numeric = 6,
    Config = 7,
    Io = 8,
    Panic = 9,
}

/// Output format for [`tf_run_config`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfFormat {
    Csv = 0,
    Json = 1,
}

/// Opaque handle to a validated structure `(H, W, R)`.
pub struct TfStructure {
    inner: EHStructure,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TfStatus {
    match e {
        Error::DimensionMismatch(_) | Error::GridMismatch(_) => TfStatus::DimensionMismatch,
        Error::NotSelfAdjoint(_) => TfStatus::NotSelfAdjoint,
        Error::NotUnitary(_) => TfStatus::NotUnitary,
        Error::Numeric(_) => TfStatus::Numeric,
        Error::Config(_) | Error::Json(_) => TfStatus::Config,
        Error::Io(_) => TfStatus::Io,
        _ => TfStatus::InvalidArgument,
    }
}

struct Fail(TfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TfStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TfStatus::Panic
        }
    }
}

unsafe fn read_matrix(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<ComplexMatrix, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = std::slice::from_raw_parts(p, 2 * rows * cols);
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| {
        let at = 2 * (i * cols + j);
        Complex64::new(s[at], s[at + 1])
    }))
}

unsafe fn read_vector(p: *const f64, n: usize, what: &str) -> Result<Vec<Complex64>, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = std::slice::from_raw_parts(p, 2 * n);
    Ok(s.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

unsafe fn write_matrix(m: &ComplexMatrix, out: *mut f64) {
    let cols = m.ncols();
    let s = std::slice::from_raw_parts_mut(out, 2 * m.nrows() * cols);
    for i in 0..m.nrows() {
        for j in 0..cols {
            let at = 2 * (i * cols + j);
            s[at] = m[(i, j)].re;
            s[at + 1] = m[(i, j)].im;
        }
    }
}

unsafe fn structure<'a>(s: *const TfStructure) -> Result<&'a EHStructure, Fail> {
    s.as_ref().map(|s| &s.inner).ok_or_else(|| null("structure"))
}

/// Library version, a static nul-terminated string.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn tf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a structure from `H` (`d x d`), `W` (`dk x dk`) and `R` (`dk x d`).
///
/// # Safety
/// The arrays must hold `2 d^2`, `2 (dk)^2` and `2 dk d` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_structure_new(
    d: usize,
    k: usize,
    h: *const f64,
    w: *const f64,
    r: *const f64,
    out: *mut *mut TfStructure,
) -> TfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if d == 0 || k == 0 {
            return Err(Fail(TfStatus::InvalidArgument, "d and k must be positive".into()));
        }
        let h = read_matrix(h, d, d, "h")?;
        let w = read_matrix(w, d * k, d * k, "w")?;
        let r = read_matrix(r, d * k, d, "r")?;
        let inner = build_inner_structure(h, w, r)?;
        *out = Box::into_raw(Box::new(TfStructure { inner }));
        Ok(())
    })
}

/// Releases a structure handle. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tf_structure_free(s: *mut TfStructure) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Writes the algebra dimension `d` and the noise dimension `k`.
///
/// # Safety
/// `s` must be a live handle; `d` and `k` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_structure_dims(s: *const TfStructure, d: *mut usize, k: *mut usize) -> TfStatus {
    guard(|| {
        let s = structure(s)?;
        if d.is_null() || k.is_null() {
            return Err(null("output"));
        }
        *d = s.d();
        *k = s.k();
        Ok(())
    })
}

/// Structure of the two flows run side by side on noise `k1 + k2`.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_structure_combine(
    a: *const TfStructure,
    b: *const TfStructure,
    out: *mut *mut TfStructure,
) -> TfStatus {
    guard(|| {
        let (a, b) = (structure(a)?, structure(b)?);
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = combined_structure(a, b)?;
        *out = Box::into_raw(Box::new(TfStructure { inner }));
        Ok(())
    })
}

/// Vacuum generator as a `d^2 x d^2` matrix acting on column-stacked `x`.
///
/// # Safety
/// `s` must be a live handle; `out` must hold `2 d^4` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_structure_generator(s: *const TfStructure, out: *mut f64) -> TfStatus {
    guard(|| {
        let s = structure(s)?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_matrix(s.generator().matrix(), out);
        Ok(())
    })
}

/// Writes `exp(tL)(x)` for a `d x d` matrix `x`.
///
/// # Safety
/// `s` must be a live handle; `x` and `out` must hold `2 d^2` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_semigroup_apply(s: *const TfStructure, t: f64, x: *const f64, out: *mut f64) -> TfStatus {
    guard(|| {
        let s = structure(s)?;
        let d = s.d();
        let x = read_matrix(x, d, d, "x")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let y = semigroup(&s.generator(), t)?.apply(&x);
        write_matrix(&y, out);
        Ok(())
    })
}

/// Discrete flow matrix element `<j_t(x) u e(f), v e(g)>` with constant `f`, `g` on `[0, t]`
/// over `steps` polar-corrected steps. Null `f` or `g` means the zero function.
///
/// # Safety
/// `s` must be a live handle; `x` holds `2 d^2` doubles, `u` and `v` hold `2 d`, `f` and `g`
/// (if not null) hold `2 k`; `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_flow_matrix_element(
    s: *const TfStructure,
    t: f64,
    steps: usize,
    x: *const f64,
    u: *const f64,
    v: *const f64,
    f: *const f64,
    g: *const f64,
    re: *mut f64,
    im: *mut f64,
) -> TfStatus {
    guard(|| {
        let s = structure(s)?;
        let (d, k) = (s.d(), s.k());
        let x = read_matrix(x, d, d, "x")?;
        let u = read_vector(u, d, "u")?;
        let v = read_vector(v, d, "v")?;
        let f = if f.is_null() {
            vec![Complex64::new(0.0, 0.0); k]
        } else {
            read_vector(f, k, "f")?
        };
        let g = if g.is_null() {
            vec![Complex64::new(0.0, 0.0); k]
        } else {
            read_vector(g, k, "g")?
        };
        if re.is_null() || im.is_null() {
            return Err(null("output"));
        }
        let disc = FlowDiscretization::new(s.clone(), t, steps, StepScheme::Polar)?;
        let z = flow_matrix_element(
            &disc,
            &x,
            &u,
            &v,
            &StepFunction::constant(t, 1, &f)?,
            &StepFunction::constant(t, 1, &g)?,
        )?;
        *re = z.re;
        *im = z.im;
        Ok(())
    })
}

/// Runs an experiment config given as JSON text and returns the rendered result table.
///
/// `seed` overrides the config seed when `use_seed` is nonzero. On success `*out_text`
/// receives a string to release with [`tf_string_free`], and `*exit_code` the CLI exit
/// code (0 all checks passed, 1 a check failed, 3 numeric failure). Config errors return
/// [`TfStatus::Config`] and leave the outputs untouched.
///
/// # Safety
/// `config_json` must be a nul-terminated string; `out_text` and `exit_code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_run_config(
    config_json: *const c_char,
    seed: u64,
    use_seed: i32,
    format: TfFormat,
    out_text: *mut *mut c_char,
    exit_code: *mut i32,
) -> TfStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        if out_text.is_null() || exit_code.is_null() {
            return Err(null("output"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|_| Fail(TfStatus::Config, "config is not valid UTF-8".into()))?;
        let cli_seed = (use_seed != 0).then_some(seed);
        let outcome = run_config_text(text, cli_seed, None)?;
        if outcome.status == RunStatus::ConfigError {
            let msg = match outcome.table.rows().first().map(|r| &r[1]) {
                Some(Cell::Text(m)) => m.clone(),
                _ => "config error".into(),
            };
            return Err(Fail(TfStatus::Config, msg));
        }
        let format = match format {
            TfFormat::Csv => OutputFormat::Csv,
            TfFormat::Json => OutputFormat::Json,
        };
        let rendered = outcome.table.render(format)?;
        let c = CString::new(rendered).map_err(|_| Fail(TfStatus::Numeric, "output contains nul".into()))?;
        *out_text = c.into_raw();
        *exit_code = outcome.exit_code();
        Ok(())
    })
}
