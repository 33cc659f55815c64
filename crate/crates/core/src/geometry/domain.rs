use nalgebra::DMatrix;

use super::{dist, dist2, dot, norm, point_segment, scale, sub};
use crate::error::{Error, Result};

/// Vertex order of a polygon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Ccw,
    Cw,
}

/// Whether a distance-to-boundary value is exact or only estimated from samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    Approximate,
}

/// Occupancy grid marking which cells belong to a sampled domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGrid {
    pub origin: Vec<f64>,
    pub cell: f64,
    pub shape: Vec<usize>,
    /// Row-major with the first axis varying fastest.
    pub inside: Vec<bool>,
}

impl SampledGrid {
    fn lookup(&self, x: &[f64]) -> bool {
        let mut idx = 0usize;
        let mut stride = 1usize;
        for ((xi, oi), &n) in x.iter().zip(&self.origin).zip(&self.shape) {
            let c = ((xi - oi) / self.cell).floor();
            if c < 0.0 || c >= n as f64 {
                return false;
            }
            idx += c as usize * stride;
            stride *= n;
        }
        self.inside[idx]
    }
}

/// Boundary known only through a finite point set.
///
/// `covering_radius` bounds the distance from any true boundary point to the nearest sample,
/// so `min |x - p| - covering_radius` never exceeds the true distance to the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledBoundary {
    pub points: Vec<Vec<f64>>,
    pub grid: SampledGrid,
    pub covering_radius: f64,
    /// World-to-grid affine frame `(row-major matrix, offset)`, set once the domain has been
    /// pushed through an affine map.
    pub frame: Option<(Vec<f64>, Vec<f64>)>,
}

impl SampledBoundary {
    fn grid_coords(&self, x: &[f64]) -> Vec<f64> {
        match &self.frame {
            None => x.to_vec(),
            Some((m, b)) => {
                let n = x.len();
                (0..n)
                    .map(|i| dot(&m[i * n..(i + 1) * n], x) + b[i])
                    .collect()
            }
        }
    }

    fn nearest_sample(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|p| dist2(p, x))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    /// `{x : <normal, x> > offset}` with a unit normal.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    /// `R^n \ {point}`.
    Punctured { point: Vec<f64> },
    /// `{x : low < <normal, x> < high}` with a unit normal.
    Slab { normal: Vec<f64>, low: f64, high: f64 },
    /// Interior of a simple polygon.
    Polygon { vertices: Vec<[f64; 2]>, orientation: Orientation },
    /// `R^n \ {origin + k step : k in Z}`.
    Lattice { origin: Vec<f64>, step: Vec<f64> },
    Sampled(SampledBoundary),
}

/// A proper subdomain of R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    dim: usize,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::rejected(format!("ambient dimension must be at least 2, got {dim}")));
    }
    Ok(())
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::rejected(format!("{name} has non-finite coordinates")));
    }
    Ok(())
}

fn unit(name: &str, v: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_finite(name, v)?;
    let len = norm(v);
    if len == 0.0 {
        return Err(Error::rejected(format!("{name} must be nonzero")));
    }
    Ok((scale(v, 1.0 / len), len))
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], c: [f64; 2], o: f64| {
        o == 0.0
            && c[0] >= a[0].min(b[0])
            && c[0] <= a[0].max(b[0])
            && c[1] >= a[1].min(b[1])
            && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

pub(crate) fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

impl Domain {
    pub fn half_space(normal: &[f64], offset: f64) -> Result<Self> {
        check_dim(normal.len())?;
        let (n, len) = unit("normal", normal)?;
        if !offset.is_finite() {
            return Err(Error::rejected("offset must be finite"));
        }
        Ok(Domain {
            dim: n.len(),
            kind: DomainKind::HalfSpace { normal: n, offset: offset / len },
        })
    }

    pub fn ball(center: &[f64], radius: f64) -> Result<Self> {
        check_dim(center.len())?;
        check_finite("center", center)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::rejected("radius must be positive and finite"));
        }
        Ok(Domain {
            dim: center.len(),
            kind: DomainKind::Ball { center: center.to_vec(), radius },
        })
    }

    pub fn punctured(point: &[f64]) -> Result<Self> {
        check_dim(point.len())?;
        check_finite("point", point)?;
        Ok(Domain { dim: point.len(), kind: DomainKind::Punctured { point: point.to_vec() } })
    }

    pub fn slab(normal: &[f64], low: f64, high: f64) -> Result<Self> {
        check_dim(normal.len())?;
        let (n, len) = unit("normal", normal)?;
        if !(low < high) || !low.is_finite() || !high.is_finite() {
            return Err(Error::rejected("slab needs finite low < high"));
        }
        Ok(Domain {
            dim: n.len(),
            kind: DomainKind::Slab { normal: n, low: low / len, high: high / len },
        })
    }

    /// Axis-aligned slab `low < x[axis] < high`.
    pub fn slab_axis(dim: usize, axis: usize, low: f64, high: f64) -> Result<Self> {
        if axis >= dim {
            return Err(Error::rejected(format!("axis {axis} out of range for dimension {dim}")));
        }
        let mut n = vec![0.0; dim];
        n[axis] = 1.0;
        Self::slab(&n, low, high)
    }

    /// Interior of a simple polygon; the declared orientation must match the vertex order.
    pub fn polygon(vertices: Vec<[f64; 2]>, orientation: Orientation) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::rejected("polygon needs at least 3 vertices"));
        }
        if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::rejected("polygon has non-finite vertices"));
        }
        let area = signed_area(&vertices);
        if area == 0.0 {
            return Err(Error::rejected("polygon has zero area"));
        }
        let actual = if area > 0.0 { Orientation::Ccw } else { Orientation::Cw };
        if actual != orientation {
            return Err(Error::rejected(format!(
                "declared orientation {orientation:?} does not match vertex order ({actual:?})"
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_cross(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]) {
                    return Err(Error::rejected(format!("polygon edges {i} and {j} intersect")));
                }
            }
        }
        Ok(Domain { dim: 2, kind: DomainKind::Polygon { vertices, orientation } })
    }

    /// Complement of the lattice `{origin + k step}`.
    pub fn lattice(origin: &[f64], step: &[f64]) -> Result<Self> {
        check_dim(origin.len())?;
        check_finite("origin", origin)?;
        if step.len() != origin.len() {
            return Err(Error::rejected("lattice step and origin differ in dimension"));
        }
        unit("direction", step)?;
        Ok(Domain {
            dim: origin.len(),
            kind: DomainKind::Lattice { origin: origin.to_vec(), step: step.to_vec() },
        })
    }

    /// `R^n` minus the points `k * spacing * direction`, `k ∈ Z`.
    pub fn lattice_complement(spacing: f64, direction: &[f64]) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::rejected("lattice spacing must be positive"));
        }
        let (d, _) = unit("direction", direction)?;
        Self::lattice(&vec![0.0; d.len()], &scale(&d, spacing))
    }

    pub fn sampled(boundary: SampledBoundary) -> Result<Self> {
        let dim = boundary.grid.origin.len();
        check_dim(dim)?;
        if boundary.points.is_empty() {
            return Err(Error::rejected("sampled boundary needs at least one point"));
        }
        if boundary.points.iter().any(|p| p.len() != dim) {
            return Err(Error::rejected("sampled boundary point dimension mismatch"));
        }
        let g = &boundary.grid;
        if g.shape.len() != dim || g.inside.len() != g.shape.iter().product::<usize>() {
            return Err(Error::rejected("contains-grid shape does not match its cells"));
        }
        if !(g.cell > 0.0) {
            return Err(Error::rejected("contains-grid cell size must be positive"));
        }
        if !g.inside.iter().any(|&b| b) {
            return Err(Error::rejected("contains-grid marks no cell as inside"));
        }
        if !(boundary.covering_radius >= 0.0) {
            return Err(Error::rejected("covering radius must be nonnegative"));
        }
        Ok(Domain { dim, kind: DomainKind::Sampled(boundary) })
    }

    /// Sampled domain with the covering radius estimated as the largest nearest-neighbour
    /// spacing among the samples.
    pub fn sampled_with_default_spacing(points: Vec<Vec<f64>>, grid: SampledGrid) -> Result<Self> {
        let covering_radius = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                points
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, q)| dist(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max);
        Self::sampled(SampledBoundary { points, grid, covering_radius, frame: None })
    }

    pub fn upper_half_plane() -> Self {
        Self::half_space(&[0.0, 1.0], 0.0).unwrap()
    }

    pub fn unit_disk() -> Self {
        Self::ball(&[0.0, 0.0], 1.0).unwrap()
    }

    pub fn punctured_plane() -> Self {
        Self::punctured(&[0.0, 0.0]).unwrap()
    }

    /// Named fixture domains used by the verification suites and the CLI.
    pub fn fixture(name: &str) -> Option<Self> {
        match name {
            "half_plane" => Some(Self::upper_half_plane()),
            "unit_disk" => Some(Self::unit_disk()),
            "punctured_plane" => Some(Self::punctured_plane()),
            "lattice_plane" => Some(Self::lattice_complement(1.0, &[1.0, 0.0]).unwrap()),
            _ => None,
        }
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variant_name(&self) -> &'static str {
        match self.kind {
            DomainKind::HalfSpace { .. } => "half_space",
            DomainKind::Ball { .. } => "ball",
            DomainKind::Punctured { .. } => "punctured",
            DomainKind::Slab { .. } => "slab",
            DomainKind::Polygon { .. } => "polygon2d",
            DomainKind::Lattice { .. } => "lattice_complement",
            DomainKind::Sampled(_) => "sampled",
        }
    }

    /// Whether ∞ belongs to the boundary.
    pub fn is_unbounded(&self) -> bool {
        !matches!(
            self.kind,
            DomainKind::Ball { .. } | DomainKind::Polygon { .. } | DomainKind::Sampled(_)
        )
    }

    /// Set when the boundary lies in a hyperplane or sphere, where α is only a pseudometric.
    pub fn is_degenerate(&self) -> bool {
        match &self.kind {
            DomainKind::HalfSpace { .. }
            | DomainKind::Ball { .. }
            | DomainKind::Punctured { .. }
            | DomainKind::Lattice { .. } => true,
            DomainKind::Slab { .. } | DomainKind::Polygon { .. } => false,
            DomainKind::Sampled(s) => lies_on_sphere_or_plane(&s.points, self.dim),
        }
    }

    pub fn provenance(&self) -> Provenance {
        match self.kind {
            DomainKind::Sampled(_) => Provenance::Approximate,
            _ => Provenance::Exact,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::rejected(format!(
                "point has dimension {}, domain has {}",
                x.len(),
                self.dim
            )));
        }
        check_finite("point", x)
    }

    /// Distance to the boundary if `x` lies in the domain, `None` otherwise. No dimension check.
    pub(crate) fn interior_distance(&self, x: &[f64]) -> Option<f64> {
        let d = match &self.kind {
            DomainKind::HalfSpace { normal, offset } => dot(normal, x) - offset,
            DomainKind::Ball { center, radius } => radius - dist(x, center),
            DomainKind::Punctured { point } => dist(x, point),
            DomainKind::Slab { normal, low, high } => {
                let s = dot(normal, x);
                (s - low).min(high - s)
            }
            DomainKind::Polygon { vertices, .. } => {
                let p = [x[0], x[1]];
                if !polygon_contains(vertices, p) {
                    return None;
                }
                polygon_edge_distance(vertices, x)?
            }
            DomainKind::Lattice { origin, step } => lattice_distance(origin, step, x),
            DomainKind::Sampled(s) => {
                if !s.grid.lookup(&s.grid_coords(x)) {
                    return None;
                }
                s.nearest_sample(x) - s.covering_radius
            }
        };
        (d > 0.0).then_some(d)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && self.interior_distance(x).is_some()
    }

    /// `d_G(x) = dist(x, ∂G)`. Exact for analytic variants; for sampled boundaries a lower
    /// estimate (see [`SampledBoundary`]).
    pub fn dist_to_boundary(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.interior_distance(x)
            .ok_or_else(|| Error::rejected(format!("point {x:?} is not in the domain")))
    }

    /// Unsigned distance from an arbitrary point to the (finite part of the) boundary.
    pub fn boundary_residual(&self, p: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::HalfSpace { normal, offset } => (dot(normal, p) - offset).abs(),
            DomainKind::Ball { center, radius } => (dist(p, center) - radius).abs(),
            DomainKind::Punctured { point } => dist(p, point),
            DomainKind::Slab { normal, low, high } => {
                let s = dot(normal, p);
                (s - low).abs().min((s - high).abs())
            }
            DomainKind::Polygon { vertices, .. } => {
                polygon_edge_distance(vertices, p).unwrap_or(0.0)
            }
            DomainKind::Lattice { origin, step } => lattice_distance(origin, step, p),
            DomainKind::Sampled(s) => s.nearest_sample(p),
        }
    }

    /// `dist([x, y], ∂G)` together with the segment parameter where it is attained.
    pub fn segment_boundary_distance(&self, x: &[f64], y: &[f64]) -> (f64, f64) {
        let min_of = |a: (f64, f64), b: (f64, f64)| if b.0 < a.0 { b } else { a };
        match &self.kind {
            DomainKind::HalfSpace { .. } | DomainKind::Slab { .. } | DomainKind::Ball { .. } => {
                // d_G is concave along lines for these convex domains
                let dx = self.interior_distance(x).unwrap_or(0.0);
                let dy = self.interior_distance(y).unwrap_or(0.0);
                if let DomainKind::Slab { normal, low, high } = &self.kind {
                    let (sx, sy) = (dot(normal, x), dot(normal, y));
                    if sx.min(sy) <= *low || sx.max(sy) >= *high {
                        return (0.0, 0.0);
                    }
                }
                min_of((dx, 0.0), (dy, 1.0))
            }
            DomainKind::Punctured { point } => point_segment(point, x, y),
            DomainKind::Polygon { vertices, .. } => {
                let n = vertices.len();
                let mut best = (f64::INFINITY, 0.0);
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    best = min_of(best, segment_segment([x[0], x[1]], [y[0], y[1]], a, b));
                }
                best
            }
            DomainKind::Lattice { origin, step } => {
                let s2 = dot(step, step);
                let tx = dot(&sub(x, origin), step) / s2;
                let ty = dot(&sub(y, origin), step) / s2;
                let lo = tx.min(ty).floor() as i64 - 1;
                let hi = tx.max(ty).ceil() as i64 + 1;
                let mut best = (f64::INFINITY, 0.0);
                for k in lo..=hi {
                    let q: Vec<f64> = origin.iter().zip(step).map(|(o, s)| o + k as f64 * s).collect();
                    best = min_of(best, point_segment(&q, x, y));
                }
                best
            }
            DomainKind::Sampled(s) => {
                let mut best = (f64::INFINITY, 0.0);
                for p in &s.points {
                    best = min_of(best, point_segment(p, x, y));
                }
                (best.0 - s.covering_radius, best.1)
            }
        }
    }

    /// Axis-aligned bounding box of a bounded domain.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.kind {
            DomainKind::Ball { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            DomainKind::Polygon { vertices, .. } => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                Some((lo, hi))
            }
            DomainKind::Sampled(s) if s.frame.is_none() => {
                let g = &s.grid;
                Some((
                    g.origin.clone(),
                    g.origin.iter().zip(&g.shape).map(|(o, &n)| o + n as f64 * g.cell).collect(),
                ))
            }
            _ => None,
        }
    }
}

fn polygon_contains(v: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let xc = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < xc {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn polygon_edge_distance(v: &[[f64; 2]], x: &[f64]) -> Option<f64> {
    let n = v.len();
    (0..n)
        .map(|i| point_segment(x, &v[i], &v[(i + 1) % n]).0)
        .reduce(f64::min)
}

fn lattice_distance(origin: &[f64], step: &[f64], x: &[f64]) -> f64 {
    let rel = sub(x, origin);
    let t = dot(&rel, step) / dot(step, step);
    [t.floor(), t.ceil()]
        .iter()
        .map(|k| {
            rel.iter()
                .zip(step)
                .map(|(r, s)| (r - k * s).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Closest approach between segment `[p, q]` and segment `[a, b]`; returns the distance and
/// the parameter along `[p, q]`.
fn segment_segment(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    if segments_cross(p, q, a, b) {
        // parameter of the intersection along [p, q]
        let r = [q[0] - p[0], q[1] - p[1]];
        let s = [b[0] - a[0], b[1] - a[1]];
        let den = r[0] * s[1] - r[1] * s[0];
        let t = if den == 0.0 {
            point_segment(&a, &p, &q).1
        } else {
            ((a[0] - p[0]) * s[1] - (a[1] - p[1]) * s[0]) / den
        };
        return (0.0, t.clamp(0.0, 1.0));
    }
    let mut best = (point_segment(&p, &a, &b).0, 0.0);
    let dq = point_segment(&q, &a, &b).0;
    if dq < best.0 {
        best = (dq, 1.0);
    }
    for c in [a, b] {
        let (d, t) = point_segment(&c, &p, &q);
        if d < best.0 {
            best = (d, t);
        }
    }
    best
}

/// Whether all points lie on one hyperplane or sphere: the lifted points `(p, |p|^2, 1)` then
/// span at most `n + 1` dimensions.
fn lies_on_sphere_or_plane(points: &[Vec<f64>], dim: usize) -> bool {
    if points.len() <= dim + 1 {
        return true;
    }
    let cols = dim + 2;
    let mut data = Vec::with_capacity(points.len() * cols);
    let scale_ref = points
        .iter()
        .map(|p| norm(p))
        .fold(0.0, f64::max)
        .max(1e-300);
    for p in points {
        let q: Vec<f64> = p.iter().map(|c| c / scale_ref).collect();
        data.extend_from_slice(&q);
        data.push(dot(&q, &q));
        data.push(1.0);
    }
    let m = DMatrix::from_row_slice(points.len(), cols, &data);
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    min <= 1e-9 * max
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        assert_eq!(Domain::upper_half_plane().dist_to_boundary(&[5.0, 3.0]).unwrap(), 3.0);
        assert_eq!(Domain::punctured_plane().dist_to_boundary(&[3.0, 4.0]).unwrap(), 5.0);
        let d = Domain::unit_disk().dist_to_boundary(&[0.6, 0.0]).unwrap();
        assert!((d - 0.4).abs() < 1e-15);
    }

    #[test]
    fn exterior_points_rejected() {
        assert!(Domain::upper_half_plane().dist_to_boundary(&[0.0, -1.0]).is_err());
        assert!(Domain::upper_half_plane().dist_to_boundary(&[0.0, 0.0]).is_err());
        assert!(Domain::punctured_plane().dist_to_boundary(&[0.0, 0.0]).is_err());
        assert!(Domain::unit_disk().dist_to_boundary(&[1.0, 0.0]).is_err());
        assert!(Domain::unit_disk().dist_to_boundary(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn constructive_validation() {
        assert!(Domain::ball(&[0.0, 0.0], 0.0).is_err());
        assert!(Domain::half_space(&[0.0, 0.0], 1.0).is_err());
        assert!(Domain::punctured(&[1.0]).is_err());
        assert!(Domain::slab_axis(3, 2, 1.0, 1.0).is_err());
        assert!(Domain::lattice_complement(0.0, &[1.0, 0.0]).is_err());
        let bowtie = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(Domain::polygon(bowtie, Orientation::Ccw).is_err());
        let sq = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(Domain::polygon(sq.clone(), Orientation::Cw).is_err());
        assert!(Domain::polygon(sq, Orientation::Ccw).is_ok());
    }

    #[test]
    fn half_space_normalizes() {
        let g = Domain::half_space(&[0.0, 2.0], 2.0).unwrap();
        assert_eq!(g.dist_to_boundary(&[0.0, 3.0]).unwrap(), 2.0);
    }

    #[test]
    fn polygon_and_lattice_distances() {
        let sq = Domain::polygon(
            vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]],
            Orientation::Ccw,
        )
        .unwrap();
        assert_eq!(sq.dist_to_boundary(&[1.0, 0.5]).unwrap(), 0.5);
        assert!(!sq.contains(&[3.0, 1.0]));
        let lat = Domain::lattice_complement(1.0, &[1.0, 0.0]).unwrap();
        assert!((lat.dist_to_boundary(&[2.3, 0.0]).unwrap() - 0.3).abs() < 1e-12);
        assert!((lat.dist_to_boundary(&[-0.5, 0.5]).unwrap() - 0.5f64.hypot(0.5)).abs() < 1e-12);
        assert!(!lat.contains(&[3.0, 0.0]));
    }

    #[test]
    fn slab_distance() {
        let s = Domain::slab_axis(3, 2, 0.0, 1.0).unwrap();
        assert!((s.dist_to_boundary(&[4.0, -2.0, 0.3]).unwrap() - 0.3).abs() < 1e-15);
        assert!(!s.contains(&[0.0, 0.0, 1.0]));
    }

    #[test]
    fn degeneracy_flags() {
        assert!(Domain::upper_half_plane().is_degenerate());
        assert!(Domain::unit_disk().is_degenerate());
        assert!(!Domain::slab_axis(2, 1, 0.0, 1.0).unwrap().is_degenerate());
        let circle: Vec<Vec<f64>> = (0..32)
            .map(|i| {
                let t = i as f64 * std::f64::consts::TAU / 32.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
        assert!(lies_on_sphere_or_plane(&circle, 2));
        let mut bumped = circle.clone();
        bumped[3][0] *= 1.1;
        assert!(!lies_on_sphere_or_plane(&bumped, 2));
    }

    #[test]
    fn segment_distances() {
        let g = Domain::punctured_plane();
        let (d, t) = g.segment_boundary_distance(&[-1.0, 1.0], &[1.0, 1.0]);
        assert!((d - 1.0).abs() < 1e-15 && (t - 0.5).abs() < 1e-15);
        let g = Domain::upper_half_plane();
        let (d, t) = g.segment_boundary_distance(&[0.0, 1.0], &[2.0, 3.0]);
        assert_eq!((d, t), (1.0, 0.0));
    }
}
