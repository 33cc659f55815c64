//! Points of the Möbius space, cross ratios and proper subdomains of R^n.

mod boundary;
mod domain;

pub use boundary::BoundarySample;
pub use domain::{Domain, DomainKind, Orientation, Provenance, SampledBoundary, SampledGrid};

use crate::error::{Error, Result};

/// A point of R^n or the point at infinity.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtendedPoint {
    Finite(Vec<f64>),
    Infinity,
}

impl ExtendedPoint {
    pub fn finite(coords: impl Into<Vec<f64>>) -> Self {
        ExtendedPoint::Finite(coords.into())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedPoint::Infinity)
    }

    pub fn as_finite(&self) -> Option<&[f64]> {
        match self {
            ExtendedPoint::Finite(c) => Some(c),
            ExtendedPoint::Infinity => None,
        }
    }
}

impl From<Vec<f64>> for ExtendedPoint {
    fn from(v: Vec<f64>) -> Self {
        ExtendedPoint::Finite(v)
    }
}

impl From<&[f64]> for ExtendedPoint {
    fn from(v: &[f64]) -> Self {
        ExtendedPoint::Finite(v.to_vec())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + t (b - a)`
pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Distance from `p` to the closed segment `[a, b]` and the parameter of the closest point.
pub fn point_segment(p: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let ab = sub(b, a);
    let len2 = dot(&ab, &ab);
    let t = if len2 == 0.0 {
        0.0
    } else {
        (dot(&sub(p, a), &ab) / len2).clamp(0.0, 1.0)
    };
    (dist(p, &lerp(a, b, t)), t)
}

/// Euclidean distance between points of the Möbius space; `None` encodes an infinite distance.
fn ext_dist(a: &ExtendedPoint, b: &ExtendedPoint) -> Option<f64> {
    match (a, b) {
        (ExtendedPoint::Infinity, ExtendedPoint::Infinity) => Some(0.0),
        (ExtendedPoint::Finite(p), ExtendedPoint::Finite(q)) => Some(dist(p, q)),
        _ => None,
    }
}

/// Quotient of two products of distances where every infinite factor in the numerator
/// cancels one in the denominator: each point occurs once above and once below, so a ratio
/// containing ∞ counts as 1.
fn distance_quotient(num: [Option<f64>; 2], den: [Option<f64>; 2]) -> Result<f64> {
    let num_inf = num.iter().filter(|v| v.is_none()).count();
    let den_inf = den.iter().filter(|v| v.is_none()).count();
    let num_val: f64 = num.iter().flatten().product();
    let den_val: f64 = den.iter().flatten().product();
    let num_zero = num_val == 0.0;
    let den_zero = den_val == 0.0;
    match (num_zero, den_zero) {
        (true, true) => Err(Error::rejected("coincident points make the cross ratio 0/0")),
        (false, true) => Err(Error::InfiniteCrossRatio),
        (true, false) => Ok(0.0),
        (false, false) => match num_inf.cmp(&den_inf) {
            std::cmp::Ordering::Equal => Ok(num_val / den_val),
            std::cmp::Ordering::Greater => Err(Error::InfiniteCrossRatio),
            std::cmp::Ordering::Less => Ok(0.0),
        },
    }
}

/// The cross ratio `|a,b,c,d| = |a-c| |b-d| / (|a-d| |b-c|)`.
pub fn cross_ratio(
    a: &ExtendedPoint,
    b: &ExtendedPoint,
    c: &ExtendedPoint,
    d: &ExtendedPoint,
) -> Result<f64> {
    distance_quotient(
        [ext_dist(a, c), ext_dist(b, d)],
        [ext_dist(a, d), ext_dist(b, c)],
    )
}

/// `|a,y,x,b| = |a-x| |b-y| / (|a-y| |b-x|)` for boundary points `a, b` and interior `x, y`.
/// `a = b` is admitted and gives 1.
pub fn apollonian_cross_ratio(
    a: &ExtendedPoint,
    y: &[f64],
    x: &[f64],
    b: &ExtendedPoint,
) -> Result<f64> {
    for (name, p) in [("a", a), ("b", b)] {
        if let ExtendedPoint::Finite(q) = p {
            if dist(q, x) == 0.0 || dist(q, y) == 0.0 {
                return Err(Error::rejected(format!(
                    "interior point coincides with boundary point {name}"
                )));
            }
        }
    }
    let x = ExtendedPoint::finite(x);
    let y = ExtendedPoint::finite(y);
    cross_ratio(a, b, &x, &y)
}

/// Inversion in the sphere `S(center, radius)`; the center and ∞ are exchanged.
pub fn mobius_inversion(x: &ExtendedPoint, center: &[f64], radius: f64) -> ExtendedPoint {
    match x {
        ExtendedPoint::Infinity => ExtendedPoint::Finite(center.to_vec()),
        ExtendedPoint::Finite(p) => {
            let v = sub(p, center);
            let r2 = dot(&v, &v);
            if r2 == 0.0 {
                ExtendedPoint::Infinity
            } else {
                ExtendedPoint::Finite(add(center, &scale(&v, radius * radius / r2)))
            }
        }
    }
}
