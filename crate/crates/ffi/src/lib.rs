//! C interface to `odeinv`.
//!
//! Equations and maps are opaque handles created by `*_parse` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`OdeinvStatus`]; on failure `odeinv_last_error` describes the problem.
//! Strings returned through `char **` are owned by the caller and must be
//! released with [`odeinv_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use odeinv::canonical::{canonical_form, decide_equivalence, EquivalenceStatus};
use odeinv::invariants::{classify_orbit, InvariantBundle, Locus, OrbitLevel};
use odeinv::ode::{pushforward_ode, CubicOde, Domain, PointMap};
use odeinv::report;
use odeinv::{Error, Point2};

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeinvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Degenerate = 5,
    Evaluation = 6,
    NoConvergence = 7,
    Internal = 8,
}

/// Orbit class of an equation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeinvOrbit {
    GeneralPosition3 = 0,
    Degenerate2 = 1,
    Degenerate3 = 2,
    Undetermined = 3,
}

/// Outcome of an equivalence test.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeinvVerdict {
    Equivalent = 0,
    NotEquivalent = 1,
    Inconclusive = 2,
}

/// Numeric invariants at a point.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeinvValues {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub xi1: [f64; 2],
    pub xi2: [f64; 2],
    pub nu: f64,
    pub i1: f64,
    pub i2: f64,
}

/// Summary of an equivalence test.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeinvEquivResult {
    pub verdict: OdeinvVerdict,
    pub max_deviation: f64,
    pub coverage: f64,
}

/// Opaque equation `y'' = a3 p^3 + a2 p^2 + a1 p + a0`.
pub struct OdeinvOde(CubicOde);

/// Opaque point map with its inverse and domain.
pub struct OdeinvMap(PointMap);

/// Opaque symbolic invariants of a general-position equation.
pub struct OdeinvInvariants(InvariantBundle);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Fail(OdeinvStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        let status = match &e {
            Error::Parse(_) | Error::Format { .. } => OdeinvStatus::Parse,
            Error::MapInvalid(_) | Error::ClosureViolation(_) | Error::DomainMismatch(_) => {
                OdeinvStatus::InvalidArgument
            }
            Error::DegenerateOrbit(_) | Error::NotInGeneralPosition { .. } | Error::NowhereGeneralPosition => {
                OdeinvStatus::Degenerate
            }
            Error::Eval(_) | Error::SingularEvaluation { .. } | Error::AllPointsSingular { .. } => {
                OdeinvStatus::Evaluation
            }
            Error::OutOfRange(_) | Error::NoConvergence { .. } => OdeinvStatus::NoConvergence,
            Error::Io(_) => OdeinvStatus::Internal,
        };
        Fail(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> OdeinvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            OdeinvStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal error: panic inside odeinv");
            OdeinvStatus::Internal
        }
    }
}

fn null() -> Fail {
    Fail(OdeinvStatus::NullPointer, "null pointer argument".into())
}

unsafe fn utf8<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|e| Fail(OdeinvStatus::InvalidUtf8, e.to_string()))
}

unsafe fn borrow<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(null)
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null());
    }
    let c = CString::new(s).map_err(|e| Fail(OdeinvStatus::Internal, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn domain(p: *const f64) -> Result<Domain, Fail> {
    if p.is_null() {
        return Ok(Domain::new(-1.0, 1.0, -1.0, 1.0)?);
    }
    let d = std::slice::from_raw_parts(p, 4);
    Ok(Domain::new(d[0], d[1], d[2], d[3])?)
}

fn general(e: &CubicOde) -> Result<(), Fail> {
    let c = classify_orbit(e, Locus::Identically);
    match c.level {
        OrbitLevel::Degenerate2 | OrbitLevel::Degenerate3 => Err(Fail(
            OdeinvStatus::Degenerate,
            format!("the equation is {}: the operation requires L3 != 0", c.level),
        )),
        _ => Ok(()),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn odeinv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failed call on this thread; empty after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn odeinv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn odeinv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses an equation file (`a0 = ...` through `a3 = ...`).
///
/// # Safety
/// `text` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn odeinv_ode_parse(text: *const c_char, out: *mut *mut OdeinvOde) -> OdeinvStatus {
    guard(|| {
        let e = CubicOde::parse_file(utf8(text)?, "<input>")?;
        put(out, OdeinvOde(e))
    })
}

/// Builds an equation from four coefficient expressions.
///
/// # Safety
/// Each `a*` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn odeinv_ode_from_coefficients(
    a0: *const c_char,
    a1: *const c_char,
    a2: *const c_char,
    a3: *const c_char,
    out: *mut *mut OdeinvOde,
) -> OdeinvStatus {
    guard(|| {
        let e = CubicOde::from_strs([utf8(a0)?, utf8(a1)?, utf8(a2)?, utf8(a3)?])?;
        put(out, OdeinvOde(e))
    })
}

/// # Safety
/// `ode` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn odeinv_ode_free(ode: *mut OdeinvOde) {
    if !ode.is_null() {
        drop(Box::from_raw(ode));
    }
}

/// Writes the equation in file format.
///
/// # Safety
/// `ode` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn odeinv_ode_to_string(ode: *const OdeinvOde, out: *mut *mut c_char) -> OdeinvStatus {
    guard(|| put_string(out, borrow(ode)?.0.to_file_string()))
}

/// Parses a map file (`fx`, `fy`, `invx`, `invy`, `domain`).
///
/// # Safety
/// `text` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn odeinv_map_parse(text: *const c_char, out: *mut *mut OdeinvMap) -> OdeinvStatus {
    guard(|| {
        let f = PointMap::parse_file(utf8(text)?, "<input>")?;
        put(out, OdeinvMap(f))
    })
}

/// # Safety
/// `map` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn odeinv_map_free(map: *mut OdeinvMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Pushes `ode` forward along `map` into a new handle.
///
/// # Safety
/// `ode` and `map` are live handles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn odeinv_transform(
    ode: *const OdeinvOde,
    map: *const OdeinvMap,
    out: *mut *mut OdeinvOde,
) -> OdeinvStatus {
    guard(|| {
        let pushed = pushforward_ode(&borrow(ode)?.0, &borrow(map)?.0)?;
        put(out, OdeinvOde(pushed))
    })
}

/// Orbit class on the whole plane.
///
/// # Safety
/// `ode` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn odeinv_classify(ode: *const OdeinvOde, out: *mut OdeinvOrbit) -> OdeinvStatus {
    guard(|| {
        let level = classify_orbit(&borrow(ode)?.0, Locus::Identically).level;
        let out = out.as_mut().ok_or_else(null)?;
        *out = match level {
            OrbitLevel::GeneralPosition3 => OdeinvOrbit::GeneralPosition3,
            OrbitLevel::Degenerate2 => OdeinvOrbit::Degenerate2,
            OrbitLevel::Degenerate3 => OdeinvOrbit::Degenerate3,
            OrbitLevel::Undetermined => OdeinvOrbit::Undetermined,
        };
        Ok(())
    })
}

/// Symbolic invariants; fails with `ODEINV_STATUS_DEGENERATE` when `L3 = 0`.
///
/// # Safety
/// `ode` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn odeinv_invariants_new(
    ode: *const OdeinvOde,
    out: *mut *mut OdeinvInvariants,
) -> OdeinvStatus {
    guard(|| {
        let b = InvariantBundle::new(&borrow(ode)?.0)?;
        put(out, OdeinvInvariants(b))
    })
}

/// # Safety
/// `inv` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn odeinv_invariants_free(inv: *mut OdeinvInvariants) {
    if !inv.is_null() {
        drop(Box::from_raw(inv));
    }
}

/// Evaluates the invariants at `(x, y)`.
///
/// # Safety
/// `inv` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn odeinv_invariants_eval(
    inv: *const OdeinvInvariants,
    x: f64,
    y: f64,
    out: *mut OdeinvValues,
) -> OdeinvStatus {
    guard(|| {
        let v = borrow(inv)?.0.eval(Point2::new(x, y))?;
        let out = out.as_mut().ok_or_else(null)?;
        *out = OdeinvValues {
            l1: v.l1,
            l2: v.l2,
            l3: v.l3,
            psi1: v.psi1,
            psi2: v.psi2,
            xi1: v.xi1,
            xi2: v.xi2,
            nu: v.nu_density,
            i1: v.i1,
            i2: v.i2,
        };
        Ok(())
    })
}

/// Symbolic invariants as a JSON document.
///
/// # Safety
/// `inv` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn odeinv_invariants_json(inv: *const OdeinvInvariants, out: *mut *mut c_char) -> OdeinvStatus {
    guard(|| {
        let mut m = report::document("invariants");
        m.insert("invariants".into(), report::bundle_json(&borrow(inv)?.0));
        put_string(out, report::to_pretty(m))
    })
}

/// Canonical form sampled on an `n` by `n` grid, as JSON. `domain` points to
/// `{x0, x1, y0, y1}` or is null for the unit square.
///
/// # Safety
/// `ode` is a live handle; `domain` is null or points to four doubles; `out`
/// is writable.
#[no_mangle]
pub unsafe extern "C" fn odeinv_canonical_json(
    ode: *const OdeinvOde,
    domain_: *const f64,
    n: usize,
    out: *mut *mut c_char,
) -> OdeinvStatus {
    guard(|| {
        let e = &borrow(ode)?.0;
        general(e)?;
        if n < 5 {
            return Err(Fail(OdeinvStatus::InvalidArgument, "grid must have at least 5 nodes per side".into()));
        }
        let form = canonical_form(e, domain(domain_)?, n)?;
        put_string(out, report::to_pretty(report::canonical_json(&form)))
    })
}

/// Decides point equivalence of two equations. `domain1` and `domain2` are
/// null or point to `{x0, x1, y0, y1}`; a null `domain2` reuses `domain1`.
/// `json_out` may be null; otherwise it receives the full report.
///
/// # Safety
/// Handles are live; domains are null or point to four doubles; `out` is
/// writable; `json_out` is null or writable.
#[no_mangle]
pub unsafe extern "C" fn odeinv_equiv(
    ode1: *const OdeinvOde,
    ode2: *const OdeinvOde,
    domain1: *const f64,
    domain2: *const f64,
    n: usize,
    tol: f64,
    out: *mut OdeinvEquivResult,
    json_out: *mut *mut c_char,
) -> OdeinvStatus {
    guard(|| {
        let (e1, e2) = (&borrow(ode1)?.0, &borrow(ode2)?.0);
        general(e1)?;
        general(e2)?;
        if n < 5 || !(tol > 0.0 && tol.is_finite()) {
            return Err(Fail(OdeinvStatus::InvalidArgument, "need n >= 5 and a positive tolerance".into()));
        }
        let d1 = domain(domain1)?;
        let d2 = if domain2.is_null() { d1 } else { domain(domain2)? };
        let out = out.as_mut().ok_or_else(null)?;
        let v = decide_equivalence(e1, e2, d1, d2, n, tol);
        *out = OdeinvEquivResult {
            verdict: match v.status {
                EquivalenceStatus::Equivalent => OdeinvVerdict::Equivalent,
                EquivalenceStatus::NotEquivalent => OdeinvVerdict::NotEquivalent,
                EquivalenceStatus::Inconclusive => OdeinvVerdict::Inconclusive,
            },
            max_deviation: v.max_deviation,
            coverage: v.coverage,
        };
        if !json_out.is_null() {
            let mut m = report::verdict_json(&v, tol, n);
            m.insert("domain".into(), report::domain_json(d1));
            m.insert("domain2".into(), report::domain_json(d2));
            put_string(json_out, report::to_pretty(m))?;
        }
        Ok(())
    })
}
