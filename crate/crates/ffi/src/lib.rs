//! C ABI over the apollon library.
//!
//! Every fallible call returns an [`ApollonStatus`]; on failure the message is kept per thread
//! and read with [`apollon_last_error`]. Domains and maps are opaque handles released with
//! their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use apollon::estimators::Metric;
use apollon::format::{parse_domain, parse_map, Syntax};
use apollon::geometry::{cross_ratio, Domain, ExtendedPoint};
use apollon::maps::{apply_map, MapSpec};
use apollon::metrics::{Bound, Method, MetricEstimate};
use apollon::qh::KBackend;
use apollon::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApollonStatus {
    Ok = 0,
    Rejected = 1,
    InfiniteCrossRatio = 2,
    EmptyGrid = 3,
    NotConnected = 4,
    SegmentExits = 5,
    Unsupported = 6,
    NumericalFault = 7,
    Parse = 8,
    NullArgument = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApollonMetric {
    Alpha = 0,
    J = 1,
    R = 2,
    Delta = 3,
    H = 4,
    K = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApollonMethod {
    Exact = 0,
    Sampled = 1,
    Grid = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApollonBound {
    Lower = 0,
    Upper = 1,
    TwoSided = 2,
}

/// Metric parameters. `level` applies to alpha and delta, `c` to h. For k a positive
/// `resolution` selects the grid backend at that spacing; zero selects the closed form.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ApollonMetricParams {
    pub level: u32,
    pub c: f64,
    pub resolution: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ApollonEstimate {
    pub value: f64,
    pub method: ApollonMethod,
    /// Sampling level for sampled values, otherwise 0.
    pub level: u32,
    /// Grid spacing for grid values, otherwise 0.
    pub resolution: f64,
    pub bound: ApollonBound,
    pub gap: f64,
    pub pseudometric: bool,
}

/// Opaque domain handle.
pub struct ApollonDomain {
    inner: Domain,
}

/// Opaque map handle.
pub struct ApollonMap {
    inner: MapSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ApollonStatus {
    match e {
        Error::Rejected(_) => ApollonStatus::Rejected,
        Error::InfiniteCrossRatio => ApollonStatus::InfiniteCrossRatio,
        Error::EmptyGrid { .. } => ApollonStatus::EmptyGrid,
        Error::NotConnected { .. } => ApollonStatus::NotConnected,
        Error::SegmentExits { .. } => ApollonStatus::SegmentExits,
        Error::Unsupported(_) => ApollonStatus::Unsupported,
        Error::NumericalFault(_) => ApollonStatus::NumericalFault,
        Error::Parse { .. } => ApollonStatus::Parse,
        Error::At { source, .. } => status_of(source),
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ApollonStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ApollonStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("`{name}` is null"));
            ApollonStatus::NullArgument
        }
        Err(_) => {
            set_error("internal panic".to_string());
            ApollonStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn text<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::Parse { field: name.to_string(), message: "not UTF-8".to_string() }))
}

unsafe fn coords<'a>(p: *const f64, dim: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, dim))
}

fn to_c(e: &MetricEstimate) -> ApollonEstimate {
    let (method, level, resolution) = match e.method {
        Method::Exact => (ApollonMethod::Exact, 0, 0.0),
        Method::Sampled { level } => (ApollonMethod::Sampled, level, 0.0),
        Method::Grid { h } => (ApollonMethod::Grid, 0, h),
    };
    let bound = match e.bound {
        Bound::Lower => ApollonBound::Lower,
        Bound::Upper => ApollonBound::Upper,
        Bound::TwoSided { .. } => ApollonBound::TwoSided,
    };
    ApollonEstimate { value: e.value, method, level, resolution, bound, gap: e.gap(), pseudometric: e.pseudometric }
}

/// Version string of the library; static, never freed.
#[no_mangle]
pub extern "C" fn apollon_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated, NUL-terminated) and
/// returns the full message length without the NUL. Returns 0 when the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn apollon_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Parses a domain spec (JSON or TOML) into a new handle.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apollon_domain_parse(spec: *const c_char, out: *mut *mut ApollonDomain) -> ApollonStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let g = parse_domain(text(spec, "spec")?, Syntax::Auto)?;
        *out = Box::into_raw(Box::new(ApollonDomain { inner: g }));
        Ok(())
    })
}

/// # Safety
/// `domain` must be null or a handle from [`apollon_domain_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn apollon_domain_free(domain: *mut ApollonDomain) {
    if !domain.is_null() {
        drop(Box::from_raw(domain));
    }
}

/// Ambient dimension of the domain, 0 for a null handle.
///
/// # Safety
/// `domain` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn apollon_domain_dim(domain: *const ApollonDomain) -> usize {
    domain.as_ref().map_or(0, |d| d.inner.dim())
}

/// Euclidean distance from `x` to the boundary.
///
/// # Safety
/// `domain` must be a live handle, `x` must point to `dim` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn apollon_dist_to_boundary(
    domain: *const ApollonDomain,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> ApollonStatus {
    guard(|| {
        let g = &non_null(domain, "domain")?.inner;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = g.dist_to_boundary(coords(x, dim, "x")?)?;
        Ok(())
    })
}

/// Evaluates a metric at `(x, y)`.
///
/// # Safety
/// `domain` must be a live handle, `x` and `y` must point to `dim` doubles, `params` and `out`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn apollon_metric(
    domain: *const ApollonDomain,
    metric: ApollonMetric,
    params: *const ApollonMetricParams,
    x: *const f64,
    y: *const f64,
    dim: usize,
    out: *mut ApollonEstimate,
) -> ApollonStatus {
    guard(|| {
        let g = &non_null(domain, "domain")?.inner;
        let p = non_null(params, "params")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let m = match metric {
            ApollonMetric::Alpha => Metric::Alpha { level: p.level },
            ApollonMetric::J => Metric::J,
            ApollonMetric::R => Metric::R,
            ApollonMetric::Delta => Metric::Delta { level: p.level },
            ApollonMetric::H => Metric::H { c: p.c },
            ApollonMetric::K if p.resolution > 0.0 => Metric::K { backend: KBackend::Grid { h: p.resolution } },
            ApollonMetric::K => Metric::K { backend: KBackend::Exact },
        };
        let e = m.evaluate(g, coords(x, dim, "x")?, coords(y, dim, "y")?)?;
        *out = to_c(&e);
        Ok(())
    })
}

/// Cross ratio `|a-c| |b-d| / (|a-d| |b-c|)` of four finite points.
///
/// # Safety
/// `a`, `b`, `c`, `d` must point to `dim` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn apollon_cross_ratio(
    a: *const f64,
    b: *const f64,
    c: *const f64,
    d: *const f64,
    dim: usize,
    out: *mut f64,
) -> ApollonStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let p = |q, name| coords(q, dim, name).map(ExtendedPoint::finite);
        *out = cross_ratio(&p(a, "a")?, &p(b, "b")?, &p(c, "c")?, &p(d, "d")?)?;
        Ok(())
    })
}

/// Parses a map spec (JSON or TOML) into a new handle.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apollon_map_parse(spec: *const c_char, out: *mut *mut ApollonMap) -> ApollonStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let f = parse_map(text(spec, "spec")?, Syntax::Auto)?;
        *out = Box::into_raw(Box::new(ApollonMap { inner: f }));
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a handle from [`apollon_map_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn apollon_map_free(map: *mut ApollonMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Applies the map to the finite point `x`. When the image is ∞, `*at_infinity` is set and
/// `out` is left untouched.
///
/// # Safety
/// `map` must be a live handle, `x` and `out` must point to `dim` doubles and `at_infinity`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn apollon_map_apply(
    map: *const ApollonMap,
    x: *const f64,
    dim: usize,
    out: *mut f64,
    at_infinity: *mut bool,
) -> ApollonStatus {
    guard(|| {
        let f = &non_null(map, "map")?.inner;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        if at_infinity.is_null() {
            return Err(Failure::Null("at_infinity"));
        }
        match apply_map(f, &ExtendedPoint::finite(coords(x, dim, "x")?))? {
            ExtendedPoint::Finite(v) => {
                if v.len() != dim {
                    return Err(Error::Rejected("image dimension differs from input".into()).into());
                }
                ptr::copy_nonoverlapping(v.as_ptr(), out, dim);
                *at_infinity = false;
            }
            ExtendedPoint::Infinity => *at_infinity = true,
        }
        Ok(())
    })
}
