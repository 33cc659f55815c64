use std::ffi::{c_char, CStr, CString};
use std::ptr;

use apollon_ffi::*;

fn domain(spec: &str) -> *mut ApollonDomain {
    let spec = CString::new(spec).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { apollon_domain_parse(spec.as_ptr(), &mut g) }, ApollonStatus::Ok);
    assert!(!g.is_null());
    g
}

fn params() -> ApollonMetricParams {
    ApollonMetricParams { level: 6, c: 2.0, resolution: 0.0 }
}

fn metric(g: *const ApollonDomain, m: ApollonMetric, p: &ApollonMetricParams, x: [f64; 2], y: [f64; 2]) -> (ApollonStatus, ApollonEstimate) {
    let mut out = ApollonEstimate {
        value: f64::NAN,
        method: ApollonMethod::Exact,
        level: 0,
        resolution: 0.0,
        bound: ApollonBound::TwoSided,
        gap: 0.0,
        pseudometric: false,
    };
    let s = unsafe { apollon_metric(g, m, p, x.as_ptr(), y.as_ptr(), 2, &mut out) };
    (s, out)
}

fn last_error() -> String {
    let mut buf = [0 as c_char; 512];
    unsafe { apollon_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn half_plane_metrics() {
    let g = domain(r#"{"variant": "half_space", "normal": [0, 1]}"#);
    assert_eq!(unsafe { apollon_domain_dim(g) }, 2);
    let e = std::f64::consts::E;
    let (s, j) = metric(g, ApollonMetric::J, &params(), [0.0, 1.0], [0.0, e]);
    assert_eq!(s, ApollonStatus::Ok);
    assert!((j.value - 1.0).abs() < 1e-12);
    assert_eq!(j.method, ApollonMethod::Exact);
    let (_, k) = metric(g, ApollonMetric::K, &params(), [0.0, 1.0], [0.0, e]);
    assert!((k.value - 1.0).abs() < 1e-12);
    let grid = ApollonMetricParams { resolution: 0.02, ..params() };
    let (s, kg) = metric(g, ApollonMetric::K, &grid, [0.0, 1.0], [0.0, e]);
    assert_eq!(s, ApollonStatus::Ok);
    assert_eq!(kg.method, ApollonMethod::Grid);
    assert_eq!(kg.resolution, 0.02);
    assert!((kg.value - 1.0).abs() < 1e-2);
    let (_, h) = metric(g, ApollonMetric::H, &params(), [0.0, 1.0], [0.0, 4.0]);
    assert!((h.value - 4f64.ln()).abs() < 1e-12);
    let mut d = 0.0;
    assert_eq!(unsafe { apollon_dist_to_boundary(g, [3.0, 2.5].as_ptr(), 2, &mut d) }, ApollonStatus::Ok);
    assert_eq!(d, 2.5);
    unsafe { apollon_domain_free(g) };
}

#[test]
fn sampled_alpha_is_flagged_lower() {
    let g = domain(r#"{"variant": "polygon2d", "vertices": [[0,0],[2,0],[2,1],[0,1]], "orientation": "ccw"}"#);
    let (s, a) = metric(g, ApollonMetric::Alpha, &params(), [0.5, 0.5], [1.5, 0.5]);
    assert_eq!(s, ApollonStatus::Ok);
    assert_eq!(a.method, ApollonMethod::Sampled);
    assert_eq!(a.level, 6);
    assert_eq!(a.bound, ApollonBound::Lower);
    unsafe { apollon_domain_free(g) };
}

#[test]
fn errors_carry_status_and_message() {
    let g = domain(r#"{"variant": "ball", "center": [0, 0], "radius": 1}"#);
    let (s, _) = metric(g, ApollonMetric::J, &params(), [0.0, 0.0], [2.0, 0.0]);
    assert_eq!(s, ApollonStatus::Rejected);
    assert!(!last_error().is_empty());
    let bad_c = ApollonMetricParams { c: 1.0, ..params() };
    let (s, _) = metric(g, ApollonMetric::H, &bad_c, [0.0, 0.0], [0.5, 0.0]);
    assert_eq!(s, ApollonStatus::Rejected);
    let (s, _) = metric(g, ApollonMetric::K, &params(), [0.0, 0.0], [0.5, 0.0]);
    assert_eq!(s, ApollonStatus::Unsupported);
    let (s, _) = metric(ptr::null(), ApollonMetric::J, &params(), [0.0, 0.0], [0.5, 0.0]);
    assert_eq!(s, ApollonStatus::NullArgument);
    assert!(last_error().contains("domain"));
    let (s, _) = metric(g, ApollonMetric::J, &params(), [0.0, 0.0], [0.5, 0.0]);
    assert_eq!(s, ApollonStatus::Ok);
    assert_eq!(last_error(), "");
    unsafe { apollon_domain_free(g) };
}

#[test]
fn inversion_round_trip_and_cross_ratio() {
    let spec = CString::new("variant = \"inversion\"\ncenter = [0.0, 0.0]\n").unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { apollon_map_parse(spec.as_ptr(), &mut f) }, ApollonStatus::Ok);
    let mut out = [0.0; 2];
    let mut inf = true;
    assert_eq!(unsafe { apollon_map_apply(f, [2.0, 0.0].as_ptr(), 2, out.as_mut_ptr(), &mut inf) }, ApollonStatus::Ok);
    assert!(!inf);
    assert_eq!(out, [0.5, 0.0]);
    assert_eq!(unsafe { apollon_map_apply(f, [0.0, 0.0].as_ptr(), 2, out.as_mut_ptr(), &mut inf) }, ApollonStatus::Ok);
    assert!(inf);

    let pts = [[1.0, 0.0], [0.0, 2.0], [-3.0, 1.0], [0.5, -0.5]];
    let mut before = 0.0;
    assert_eq!(
        unsafe { apollon_cross_ratio(pts[0].as_ptr(), pts[1].as_ptr(), pts[2].as_ptr(), pts[3].as_ptr(), 2, &mut before) },
        ApollonStatus::Ok
    );
    let images: Vec<[f64; 2]> = pts
        .iter()
        .map(|p| {
            let mut o = [0.0; 2];
            unsafe { apollon_map_apply(f, p.as_ptr(), 2, o.as_mut_ptr(), &mut inf) };
            o
        })
        .collect();
    let mut after = 0.0;
    unsafe { apollon_cross_ratio(images[0].as_ptr(), images[1].as_ptr(), images[2].as_ptr(), images[3].as_ptr(), 2, &mut after) };
    assert!((before - after).abs() <= 1e-12 * before);

    assert_eq!(
        unsafe { apollon_cross_ratio(pts[0].as_ptr(), pts[1].as_ptr(), pts[2].as_ptr(), pts[0].as_ptr(), 2, &mut after) },
        ApollonStatus::InfiniteCrossRatio
    );
    unsafe { apollon_map_free(f) };
}

#[test]
fn free_accepts_null() {
    unsafe {
        apollon_domain_free(ptr::null_mut());
        apollon_map_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/apollon.h")).unwrap();
    for symbol in [
        "typedef struct ApollonDomain ApollonDomain;",
        "typedef struct ApollonMap ApollonMap;",
        "APOLLON_STATUS_NOT_CONNECTED = 4",
        "apollon_domain_parse(",
        "apollon_metric(",
        "apollon_map_apply(",
        "apollon_last_error(",
    ] {
        assert!(header.contains(symbol), "header lacks {symbol}");
    }
}
