//! Distance-ratio, Apollonian, Seittenranta and `h_{G,c}` metrics.
//!
//! Sampled Apollonian and Seittenranta values are sups over a finite boundary sample and are
//! therefore lower bounds of the true values. Closed forms are used where the boundary is a
//! point pair, a hyperplane or a sphere.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{dist, dist2, BoundarySample, Domain, DomainKind, Provenance};

/// How a value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Exact,
    Sampled { level: u32 },
    Grid { h: f64 },
}

/// Which side of the true value an estimate lies on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    Lower,
    Upper,
    TwoSided { gap: f64 },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Exact => write!(f, "exact"),
            Method::Sampled { level } => write!(f, "sampled({level})"),
            Method::Grid { h } => write!(f, "grid({h})"),
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Lower => write!(f, "lower"),
            Bound::Upper => write!(f, "upper"),
            Bound::TwoSided { gap } => write!(f, "two_sided({gap})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricEstimate {
    pub value: f64,
    pub method: Method,
    pub bound: Bound,
    /// The domain boundary lies in a hyperplane or sphere; α is then only a pseudometric.
    pub pseudometric: bool,
}

impl MetricEstimate {
    pub fn exact(value: f64) -> Self {
        MetricEstimate {
            value,
            method: Method::Exact,
            bound: Bound::TwoSided { gap: 0.0 },
            pseudometric: false,
        }
    }

    pub fn sampled_lower(value: f64, level: u32) -> Self {
        MetricEstimate {
            value,
            method: Method::Sampled { level },
            bound: Bound::Lower,
            pseudometric: false,
        }
    }

    /// Sampling level, when the value came from a boundary sample.
    pub fn level(&self) -> Option<u32> {
        match self.method {
            Method::Sampled { level } => Some(level),
            _ => None,
        }
    }

    /// Width of the uncertainty interval in the direction that could make `value` too small.
    pub fn gap(&self) -> f64 {
        match self.bound {
            Bound::TwoSided { gap } => gap,
            _ => 0.0,
        }
    }
}

/// Metrics built from `d_G` alone. For sampled boundaries `d_G` is underestimated, which
/// overestimates these metrics.
fn from_distances(g: &Domain, value: f64) -> MetricEstimate {
    match g.provenance() {
        Provenance::Exact => MetricEstimate::exact(value),
        Provenance::Approximate => MetricEstimate {
            value,
            method: Method::Sampled { level: 0 },
            bound: Bound::Upper,
            pseudometric: false,
        },
    }
}

fn ratio_value(g: &Domain, x: &[f64], y: &[f64]) -> Result<f64> {
    let dx = g.dist_to_boundary(x)?;
    let dy = g.dist_to_boundary(y)?;
    Ok(dist(x, y) / dx.min(dy))
}

/// `r_G(x,y) = |x-y| / min(d_G(x), d_G(y))`.
pub fn r_ratio(g: &Domain, x: &[f64], y: &[f64]) -> Result<MetricEstimate> {
    Ok(from_distances(g, ratio_value(g, x, y)?))
}

/// `j_G(x,y) = log(1 + r_G(x,y))`.
pub fn j_metric(g: &Domain, x: &[f64], y: &[f64]) -> Result<MetricEstimate> {
    Ok(from_distances(g, ratio_value(g, x, y)?.ln_1p()))
}

/// `h_{G,c}(x,y) = log(1 + c |x-y| / sqrt(d_G(x) d_G(y)))`, defined for `c >= 2`.
pub fn h_metric(g: &Domain, x: &[f64], y: &[f64], c: f64) -> Result<MetricEstimate> {
    if !(c >= 2.0) || !c.is_finite() {
        return Err(Error::rejected(format!("h metric needs c >= 2, got {c}")));
    }
    let dx = g.dist_to_boundary(x)?;
    let dy = g.dist_to_boundary(y)?;
    Ok(from_distances(g, (c * dist(x, y) / (dx * dy).sqrt()).ln_1p()))
}

/// Closed-form α for boundaries consisting of two points, a hyperplane or a sphere.
/// Returns `Ok(None)` for other variants.
pub fn apollonian_exact(g: &Domain, x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    let dx = g.dist_to_boundary(x)?;
    let dy = g.dist_to_boundary(y)?;
    let v = match g.kind() {
        DomainKind::Punctured { .. } => (dx / dy).ln().abs(),
        DomainKind::HalfSpace { .. } => {
            2.0 * (dist(x, y) / (2.0 * (dx * dy).sqrt())).asinh()
        }
        DomainKind::Ball { radius, .. } => {
            // R^2 - |x - c|^2 = d (2R - d)
            let px = dx * (2.0 * radius - dx);
            let py = dy * (2.0 * radius - dy);
            2.0 * (radius * dist(x, y) / (px * py).sqrt()).asinh()
        }
        _ => return Ok(None),
    };
    Ok(Some(v))
}

/// `log sup |a,y,x,b|` over all pairs of the sample. The ratio factorizes as
/// `(|a-x|/|a-y|) (|b-y|/|b-x|)`, so the sup over pairs is the product of two sups.
pub fn apollonian_over(sample: &BoundarySample, x: &[f64], y: &[f64]) -> f64 {
    let (mut best_a, mut best_b) = if sample.includes_infinity { (1.0f64, 1.0f64) } else { (0.0, 0.0) };
    for p in sample.finite_points() {
        let q = (dist2(p, x) / dist2(p, y)).sqrt();
        best_a = best_a.max(q);
        best_b = best_b.max(1.0 / q);
    }
    (best_a * best_b).ln().max(0.0)
}

pub fn apollonian_sampled(g: &Domain, x: &[f64], y: &[f64], level: u32) -> Result<MetricEstimate> {
    g.dist_to_boundary(x)?;
    g.dist_to_boundary(y)?;
    let sample = g.sample_boundary(level)?;
    let mut est = MetricEstimate::sampled_lower(apollonian_over(&sample, x, y), level);
    est.pseudometric = g.is_degenerate();
    Ok(est)
}

/// `α_G(x,y) = log sup_{a,b ∈ ∂G} |a,y,x,b|`; closed form where available, otherwise the sup
/// over the boundary sample at `level`.
pub fn apollonian(g: &Domain, x: &[f64], y: &[f64], level: u32) -> Result<MetricEstimate> {
    match apollonian_exact(g, x, y)? {
        Some(v) => {
            let mut est = MetricEstimate::exact(v);
            est.pseudometric = g.is_degenerate();
            Ok(est)
        }
        None => apollonian_sampled(g, x, y, level),
    }
}

const BLOCK: usize = 32;

struct PointBlock {
    start: usize,
    end: usize,
    center: Vec<f64>,
    radius: f64,
    max_weight: f64,
}

/// `sup |a,x,b,y| = sup |a-b| |x-y| / (|a-y| |x-b|)` over pairs of the sample.
///
/// Exact maximum over the sample by branch and bound: the `b` candidates are grouped into
/// runs of consecutive samples, and a run is skipped when
/// `|a-b| <= |a-center| + radius` proves it cannot beat the current best.
pub fn seittenranta_sup_over(sample: &BoundarySample, x: &[f64], y: &[f64]) -> f64 {
    let xy = dist(x, y);
    if xy == 0.0 {
        return 0.0;
    }
    let n = sample.finite_len();
    let dim = sample.dim();
    let inv_ay: Vec<f64> = sample.finite_points().map(|a| 1.0 / dist2(a, y)).collect();
    let inv_bx: Vec<f64> = sample.finite_points().map(|b| 1.0 / dist2(b, x)).collect();

    // squared sup divided by |x-y|^2
    let mut best = 0.0f64;
    if sample.includes_infinity {
        // a = ∞ leaves |x-y|/|x-b|, b = ∞ leaves |x-y|/|a-y|
        for i in 0..n {
            best = best.max(inv_bx[i]).max(inv_ay[i]);
        }
    }

    let blocks: Vec<PointBlock> = (0..n)
        .step_by(BLOCK)
        .map(|start| {
            let end = (start + BLOCK).min(n);
            let mut center = vec![0.0; dim];
            for i in start..end {
                for (c, v) in center.iter_mut().zip(sample.finite_point(i)) {
                    *c += v;
                }
            }
            let cnt = (end - start) as f64;
            center.iter_mut().for_each(|c| *c /= cnt);
            let radius = (start..end)
                .map(|i| dist(&center, sample.finite_point(i)))
                .fold(0.0, f64::max);
            let max_weight = inv_bx[start..end].iter().copied().fold(0.0, f64::max);
            PointBlock { start, end, center, radius, max_weight }
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| inv_ay[j].total_cmp(&inv_ay[i]).then(i.cmp(&j)));

    for &ai in &order {
        let a = sample.finite_point(ai);
        let wa = inv_ay[ai];
        for blk in &blocks {
            let reach = dist(a, &blk.center) + blk.radius;
            if wa * reach * reach * blk.max_weight <= best {
                continue;
            }
            for bi in blk.start..blk.end {
                let v = dist2(a, sample.finite_point(bi)) * wa * inv_bx[bi];
                if v > best {
                    best = v;
                }
            }
        }
    }
    xy * best.sqrt()
}

/// `δ_G(x,y) = log(1 + sup_{a,b ∈ ∂G} |a,x,b,y|)`. Exact for punctured spaces, whose
/// two-point boundary is enumerated completely; a sampled lower bound otherwise.
pub fn seittenranta(g: &Domain, x: &[f64], y: &[f64], level: u32) -> Result<MetricEstimate> {
    g.dist_to_boundary(x)?;
    g.dist_to_boundary(y)?;
    let sample = g.sample_boundary(level)?;
    let v = seittenranta_sup_over(&sample, x, y).ln_1p();
    Ok(match g.kind() {
        DomainKind::Punctured { .. } => MetricEstimate::exact(v),
        _ => MetricEstimate::sampled_lower(v, level),
    })
}

/// Segment sampling density for [`r_of_segment`] and the refined density.
pub const SEGMENT_SAMPLES: (usize, usize) = (200, 399);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentEstimate {
    pub estimate: MetricEstimate,
    /// `d(A) = |x - y|`
    pub diameter: f64,
    /// `d(A, ∂G)`
    pub boundary_distance: f64,
    /// `(d(A) / (2 d(A,∂G)), d(A) / d(A,∂G))`
    pub sandwich: (f64, f64),
    pub samples: (usize, usize),
}

fn max_pair_ratio(points: &[Vec<f64>], d: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.max(dist(&points[i], &points[j]) / d[i].min(d[j]));
        }
    }
    best
}

fn segment_params(count: usize, extra: f64) -> Vec<f64> {
    let mut t: Vec<f64> = (0..count).map(|i| i as f64 / (count - 1) as f64).collect();
    t.push(extra);
    t
}

/// First parameter in `[0, 1]` at which the segment `[x, y]` leaves the domain.
pub(crate) fn first_exit(g: &Domain, x: &[f64], y: &[f64], fallback: f64) -> f64 {
    const STEPS: usize = 4096;
    (0..=STEPS)
        .map(|i| i as f64 / STEPS as f64)
        .find(|&t| !g.contains(&crate::geometry::lerp(x, y, t)))
        .unwrap_or(fallback)
}

/// `r_G(A)` for the segment `A = [x, y]` by dense sampling of the segment.
///
/// The sample always contains the point of `A` closest to `∂G`, so the value lies within
/// `[d(A)/(2 d(A,∂G)), d(A)/d(A,∂G)]`.
pub fn r_of_segment(g: &Domain, x: &[f64], y: &[f64]) -> Result<SegmentEstimate> {
    g.dist_to_boundary(x)?;
    g.dist_to_boundary(y)?;
    let (bd, t_star) = g.segment_boundary_distance(x, y);
    if !(bd > 0.0) {
        return Err(Error::SegmentExits { t: first_exit(g, x, y, t_star) });
    }
    let diameter = dist(x, y);
    let evaluate = |count: usize| -> Result<f64> {
        let ts = segment_params(count, t_star);
        let pts: Vec<Vec<f64>> = ts.iter().map(|&t| crate::geometry::lerp(x, y, t)).collect();
        let mut d = Vec::with_capacity(pts.len());
        for (p, &t) in pts.iter().zip(&ts) {
            d.push(g.interior_distance(p).ok_or(Error::SegmentExits { t })?);
        }
        Ok(max_pair_ratio(&pts, &d))
    };
    let (coarse_n, fine_n) = SEGMENT_SAMPLES;
    let coarse = evaluate(coarse_n)?;
    let fine = evaluate(fine_n)?;
    let mut estimate = from_distances(g, fine);
    if g.provenance() == Provenance::Exact {
        estimate.method = Method::Sampled { level: 1 };
        estimate.bound = Bound::TwoSided { gap: (fine - coarse).abs() };
    }
    Ok(SegmentEstimate {
        estimate,
        diameter,
        boundary_distance: bd,
        sandwich: (diameter / (2.0 * bd), diameter / bd),
        samples: SEGMENT_SAMPLES,
    })
}
