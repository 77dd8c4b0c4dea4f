//! C ABI over the curvature engine. Metrics are opaque handles; every fallible
//! call returns a `CurvhomStatus` and leaves a message for `curvhom_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use curvhom::classify::{classify_walker_kv, Region, DEFAULT_TOL};
use curvhom::curvature::evaluate;
use curvhom::expr::Params;
use curvhom::families::{family, Family};
use curvhom::maps::mu;
use curvhom::models::{extract_model, kv_equivalent, EquivalenceConfig, EquivalenceVerdict, Mode};
use curvhom::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvhomStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed formula, unknown family, bad parameters or wrong point length.
    InvalidInput = 3,
    /// Domain, degeneracy or convergence failure during evaluation.
    Numeric = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvhomMode {
    Isometry = 0,
    Homothety = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvhomVerdict {
    Equivalent = 0,
    NotEquivalent = 1,
    Unknown = 2,
}

/// Opaque metric handle.
pub struct CurvhomMetric {
    family: Family,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CurvhomStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_numeric() {
            CurvhomStatus::Numeric
        } else {
            CurvhomStatus::InvalidInput
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: Option<String>) {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = msg.map(|m| CString::new(m.replace('\0', " ")).expect("no interior nul"));
    });
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CurvhomStatus {
    set_error(None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CurvhomStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(_) => {
            set_error(Some("internal panic".into()));
            CurvhomStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CurvhomStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CurvhomStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

/// `NULL` or `""` means no parameters; otherwise a JSON object of numbers.
unsafe fn params(p: *const c_char) -> Result<Params, Failure> {
    if p.is_null() {
        return Ok(Params::new());
    }
    let s = text(p, "params_json")?;
    if s.trim().is_empty() {
        return Ok(Params::new());
    }
    serde_json::from_str(s).map_err(|e| Failure(CurvhomStatus::InvalidInput, format!("params_json: {e}")))
}

unsafe fn metric<'a>(h: *const CurvhomMetric, what: &str) -> Result<&'a Family, Failure> {
    h.as_ref().map(|m| &m.family).ok_or_else(|| null(what))
}

unsafe fn point<'a>(p: *const f64, len: usize, fam: &Family, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != fam.dim() {
        return Err(Failure(
            CurvhomStatus::InvalidInput,
            format!("`{what}` has {len} coordinates, the metric has {}", fam.dim()),
        ));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn store(out: *mut *mut CurvhomMetric, family: Family) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(CurvhomMetric { family }));
    Ok(())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn curvhom_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, the reason behind an
/// `Unknown` verdict, or `NULL`. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn curvhom_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn curvhom_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Catalog family such as `"walker:exp_ay"` or `"warped:sphere"`.
///
/// # Safety
/// `name` must be a nul-terminated string; `params_json` nul-terminated or `NULL`;
/// `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn curvhom_metric_family(
    name: *const c_char,
    params_json: *const c_char,
    out: *mut *mut CurvhomMetric,
) -> CurvhomStatus {
    guard(|| {
        let fam = family(text(name, "name")?, &params(params_json)?)?;
        store(out, fam)
    })
}

/// Walker metric of the formula `f(x, y)`; parameters named in `params_json` may appear in `f`.
///
/// # Safety
/// As for [`curvhom_metric_family`].
#[no_mangle]
pub unsafe extern "C" fn curvhom_metric_walker(
    f: *const c_char,
    params_json: *const c_char,
    out: *mut *mut CurvhomMetric,
) -> CurvhomStatus {
    guard(|| {
        let fam = Family::custom_walker(text(f, "f")?, &params(params_json)?)?;
        store(out, fam)
    })
}

/// # Safety
/// `h` must be `NULL` or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn curvhom_metric_free(h: *mut CurvhomMetric) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Dimension of the metric, 0 for `NULL`.
///
/// # Safety
/// `h` must be `NULL` or a live handle.
#[no_mangle]
pub unsafe extern "C" fn curvhom_metric_dim(h: *const CurvhomMetric) -> usize {
    h.as_ref().map_or(0, |m| m.family.dim())
}

/// Components of `∇^level R` (all indices down, derivative indices last) in
/// row-major order, `dim^(4+level)` values. `*out_len` holds the capacity of
/// `out` on entry and the required length on return.
///
/// # Safety
/// `point` must hold `point_len` values, `out` `*out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn curvhom_curvature(
    h: *const CurvhomMetric,
    point: *const f64,
    point_len: usize,
    level: usize,
    out: *mut f64,
    out_len: *mut usize,
) -> CurvhomStatus {
    guard(|| {
        let fam = metric(h, "h")?;
        let p = self::point(point, point_len, fam, "point")?;
        if out_len.is_null() {
            return Err(null("out_len"));
        }
        let data = evaluate(&fam.metric, p, &Params::new(), level)?;
        let values = data.chain[level].data();
        let capacity = *out_len;
        *out_len = values.len();
        if capacity < values.len() {
            return Err(Failure(
                CurvhomStatus::BufferTooSmall,
                format!("need {} values, got room for {capacity}", values.len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
        Ok(())
    })
}

/// Scalar curvature at `point`.
///
/// # Safety
/// `point` must hold `point_len` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn curvhom_scalar_curvature(
    h: *const CurvhomMetric,
    point: *const f64,
    point_len: usize,
    out: *mut f64,
) -> CurvhomStatus {
    guard(|| {
        let fam = metric(h, "h")?;
        let p = self::point(point, point_len, fam, "point")?;
        let tau = evaluate(&fam.metric, p, &Params::new(), 0)?.invariants().tau;
        *out.as_mut().ok_or_else(|| null("out"))? = tau;
        Ok(())
    })
}

/// Compare the `k`-models of two metrics at two points. On `Equivalent`,
/// `*out_lambda` is the homothety factor (1 in isometry mode); otherwise NaN.
/// On `Unknown`, `curvhom_last_error` gives the reason.
///
/// # Safety
/// Points must hold the stated number of values; outputs must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn curvhom_equivalent(
    h1: *const CurvhomMetric,
    point1: *const f64,
    len1: usize,
    h2: *const CurvhomMetric,
    point2: *const f64,
    len2: usize,
    k: usize,
    mode: CurvhomMode,
    out_verdict: *mut CurvhomVerdict,
    out_lambda: *mut f64,
) -> CurvhomStatus {
    guard(|| {
        let (f1, f2) = (metric(h1, "h1")?, metric(h2, "h2")?);
        let p1 = point(point1, len1, f1, "point1")?;
        let p2 = point(point2, len2, f2, "point2")?;
        let (verdict, lambda) = (out_verdict.as_mut().ok_or_else(|| null("out_verdict"))?, out_lambda.as_mut());
        let m1 = extract_model(&f1.metric, p1, &Params::new(), k)?;
        let m2 = extract_model(&f2.metric, p2, &Params::new(), k)?;
        let mode = match mode {
            CurvhomMode::Isometry => Mode::Isometry,
            CurvhomMode::Homothety => Mode::Homothety,
        };
        let v = kv_equivalent(&m1, &m2, mode, &EquivalenceConfig::default())?;
        let (code, l) = match v {
            EquivalenceVerdict::Equivalent { lambda, .. } => (CurvhomVerdict::Equivalent, lambda),
            EquivalenceVerdict::NotEquivalent { .. } => (CurvhomVerdict::NotEquivalent, f64::NAN),
            EquivalenceVerdict::Unknown { reason } => {
                set_error(Some(reason));
                (CurvhomVerdict::Unknown, f64::NAN)
            }
        };
        *verdict = code;
        if let Some(out) = lambda {
            *out = l;
        }
        Ok(())
    })
}

/// `μ(point) = |R|²(base) / |R|²(point)`.
///
/// # Safety
/// `base` and `point` must hold `len` values each and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn curvhom_mu(
    h: *const CurvhomMetric,
    base: *const f64,
    point: *const f64,
    len: usize,
    out: *mut f64,
) -> CurvhomStatus {
    guard(|| {
        let fam = metric(h, "h")?;
        let b = self::point(base, len, fam, "base")?;
        let p = self::point(point, len, fam, "point")?;
        let m = mu(&fam.metric, b, p, &Params::new())?;
        *out.as_mut().ok_or_else(|| null("out"))? = m.mu;
        Ok(())
    })
}

/// Classification of a Walker metric over its default region, as a JSON
/// string to release with `curvhom_string_free`.
///
/// # Safety
/// `h` must be a live handle and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn curvhom_classify_json(h: *const CurvhomMetric, out_json: *mut *mut c_char) -> CurvhomStatus {
    guard(|| {
        let fam = metric(h, "h")?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let f = fam
            .walker_f()
            .ok_or_else(|| Failure(CurvhomStatus::InvalidInput, format!("`{}` is not a Walker family", fam.name)))?;
        let c = classify_walker_kv(f, &Params::new(), &Region::for_family(fam), DEFAULT_TOL)?;
        let json = serde_json::to_string(&c).map_err(|e| Failure(CurvhomStatus::Numeric, e.to_string()))?;
        *out_json = CString::new(json).expect("JSON has no nul").into_raw();
        Ok(())
    })
}
