//! Closed-form maps, their image domains and distortion estimates.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    check_radii, directions, monotone_envelope, per_pair, quad_ratio, spread, Certificate,
    EnvelopeBin, FitManifest, Metric, RadiusRatio, Trend,
};
use crate::geometry::{
    add, dist, dot, mobius_inversion, norm, scale, sub, Domain, DomainKind, ExtendedPoint,
    SampledBoundary,
};
use crate::sampling::{PairSample, QuadSample};

/// Relative tolerance for geometric coincidences (centre on a hyperplane, similarity test).
const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum MapSpec {
    /// `x -> center + radius^2 (x - center) / |x - center|^2`, swapping `center` and ∞.
    Inversion { center: Vec<f64>, radius: f64 },
    /// `x -> matrix x + offset`, matrix given by rows.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// `x -> |x|^(exponent - 1) x`, fixing 0 and ∞.
    RadialPower { exponent: f64 },
    /// Applied left to right.
    Composition { maps: Vec<MapSpec> },
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

impl MapSpec {
    pub fn inversion(center: &[f64], radius: f64) -> Result<Self> {
        if center.iter().any(|c| !c.is_finite()) || !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::rejected("inversion needs a finite centre and a positive radius"));
        }
        Ok(MapSpec::Inversion { center: center.to_vec(), radius })
    }

    pub fn affine(matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self> {
        let n = offset.len();
        if n == 0 || matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(Error::rejected("affine matrix must be square and match the offset"));
        }
        if matrix.iter().flatten().chain(&offset).any(|c| !c.is_finite()) {
            return Err(Error::rejected("affine map has non-finite entries"));
        }
        let m = to_matrix(&matrix);
        let sv = m.clone().singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > GEOM_TOL * smax) {
            return Err(Error::rejected("affine matrix is not invertible"));
        }
        Ok(MapSpec::Affine { matrix, offset })
    }

    pub fn identity(dim: usize) -> Self {
        let matrix = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        MapSpec::Affine { matrix, offset: vec![0.0; dim] }
    }

    pub fn radial_power(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::rejected("radial power exponent must be positive"));
        }
        Ok(MapSpec::RadialPower { exponent })
    }

    pub fn composition(maps: Vec<MapSpec>) -> Self {
        MapSpec::Composition { maps }
    }

    /// Ambient dimension fixed by the map's parameters, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            MapSpec::Inversion { center, .. } => Some(center.len()),
            MapSpec::Affine { offset, .. } => Some(offset.len()),
            MapSpec::RadialPower { .. } => None,
            MapSpec::Composition { maps } => maps.iter().find_map(|m| m.dim()),
        }
    }

    pub fn inverse(&self) -> MapSpec {
        match self {
            MapSpec::Inversion { .. } => self.clone(),
            MapSpec::Affine { matrix, offset } => {
                let inv = to_matrix(matrix).try_inverse().expect("validated invertible");
                let t = -(&inv * DVector::from_column_slice(offset));
                MapSpec::Affine { matrix: from_matrix(&inv), offset: t.as_slice().to_vec() }
            }
            MapSpec::RadialPower { exponent } => MapSpec::RadialPower { exponent: 1.0 / exponent },
            MapSpec::Composition { maps } => {
                MapSpec::Composition { maps: maps.iter().rev().map(|m| m.inverse()).collect() }
            }
        }
    }

    /// Whether the map preserves all cross ratios.
    pub fn is_mobius(&self) -> bool {
        match self {
            MapSpec::Inversion { .. } => true,
            MapSpec::Affine { matrix, .. } => similarity_factor(matrix).is_some(),
            MapSpec::RadialPower { exponent } => *exponent == 1.0,
            MapSpec::Composition { maps } => maps.iter().all(|m| m.is_mobius()),
        }
    }
}

/// `s` when `matrix = s Q` with `Q` orthogonal.
fn similarity_factor(matrix: &[Vec<f64>]) -> Option<f64> {
    let m = to_matrix(matrix);
    let mtm = m.transpose() * &m;
    let n = matrix.len();
    let s2 = mtm.trace() / n as f64;
    let off = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (mtm[(i, j)] - if i == j { s2 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    (off <= 1e-10 * s2).then(|| s2.sqrt())
}

fn check_point_dim(f: &MapSpec, n: usize) -> Result<()> {
    match f.dim() {
        Some(d) if d != n => Err(Error::rejected(format!("map acts on R^{d}, point lies in R^{n}"))),
        _ => Ok(()),
    }
}

/// Evaluates `f` at a point of the extended space.
pub fn apply_map(f: &MapSpec, x: &ExtendedPoint) -> Result<ExtendedPoint> {
    if let Some(p) = x.as_finite() {
        check_point_dim(f, p.len())?;
    }
    Ok(match f {
        MapSpec::Inversion { center, radius } => mobius_inversion(x, center, *radius),
        MapSpec::Affine { matrix, offset } => match x {
            ExtendedPoint::Infinity => ExtendedPoint::Infinity,
            ExtendedPoint::Finite(p) => {
                ExtendedPoint::Finite(matrix.iter().zip(offset).map(|(row, b)| dot(row, p) + b).collect())
            }
        },
        MapSpec::RadialPower { exponent } => match x {
            ExtendedPoint::Infinity => ExtendedPoint::Infinity,
            ExtendedPoint::Finite(p) => {
                let r = norm(p);
                if r == 0.0 {
                    x.clone()
                } else {
                    ExtendedPoint::Finite(scale(p, r.powf(exponent - 1.0)))
                }
            }
        },
        MapSpec::Composition { maps } => {
            let mut y = x.clone();
            for m in maps {
                y = apply_map(m, &y)?;
            }
            y
        }
    })
}

/// Evaluates `f` at a finite point whose image must be finite.
pub fn apply_finite(f: &MapSpec, x: &[f64]) -> Result<Vec<f64>> {
    match apply_map(f, &ExtendedPoint::Finite(x.to_vec()))? {
        ExtendedPoint::Finite(p) => Ok(p),
        ExtendedPoint::Infinity => Err(Error::rejected(format!("{x:?} maps to ∞"))),
    }
}

fn unsupported(f: &MapSpec, g: &Domain) -> Error {
    let name = match f {
        MapSpec::Inversion { .. } => "inversion",
        MapSpec::Affine { .. } => "affine map",
        MapSpec::RadialPower { .. } => "radial power",
        MapSpec::Composition { .. } => "composition",
    };
    Error::rejected(format!("no closed-form image of a {} domain under a {name}", g.variant_name()))
}

fn push_affine(matrix: &[Vec<f64>], offset: &[f64], g: &Domain) -> Result<Domain> {
    let f = MapSpec::Affine { matrix: matrix.to_vec(), offset: offset.to_vec() };
    let m = to_matrix(matrix);
    let inv = m.clone().try_inverse().ok_or_else(|| Error::rejected("affine matrix is singular"))?;
    let covector = |n: &[f64]| -> Vec<f64> {
        (inv.transpose() * DVector::from_column_slice(n)).as_slice().to_vec()
    };
    let image = |p: &[f64]| apply_finite(&f, p);
    match g.kind() {
        DomainKind::HalfSpace { normal, offset: c } => {
            let n2 = covector(normal);
            Domain::half_space(&n2, c + dot(&n2, offset))
        }
        DomainKind::Slab { normal, low, high } => {
            let n2 = covector(normal);
            let shift = dot(&n2, offset);
            Domain::slab(&n2, low + shift, high + shift)
        }
        DomainKind::Ball { center, radius } => {
            let s = similarity_factor(matrix).ok_or_else(|| {
                Error::rejected("the image of a ball under a non-similarity affine map is an ellipsoid")
            })?;
            Domain::ball(&image(center)?, radius * s)
        }
        DomainKind::Punctured { point } => Domain::punctured(&image(point)?),
        DomainKind::Polygon { vertices, orientation } => {
            let mapped = vertices
                .iter()
                .map(|v| image(v).map(|p| [p[0], p[1]]))
                .collect::<Result<Vec<_>>>()?;
            let flipped = m.determinant() < 0.0;
            let o = match (orientation, flipped) {
                (crate::geometry::Orientation::Ccw, false) | (crate::geometry::Orientation::Cw, true) => {
                    crate::geometry::Orientation::Ccw
                }
                _ => crate::geometry::Orientation::Cw,
            };
            Domain::polygon(mapped, o)
        }
        DomainKind::Lattice { origin, step } => {
            let o = image(origin)?;
            let s: Vec<f64> = matrix.iter().map(|row| dot(row, step)).collect();
            Domain::lattice(&o, &s)
        }
        DomainKind::Sampled(sb) => {
            let n = g.dim();
            // world-to-grid frame of the image: old frame composed with the inverse map
            let (fm, fb) = match &sb.frame {
                Some((fm, fb)) => (DMatrix::from_row_slice(n, n, fm), DVector::from_column_slice(fb)),
                None => (DMatrix::identity(n, n), DVector::zeros(n)),
            };
            let t = DVector::from_column_slice(offset);
            let new_m = &fm * &inv;
            let new_b = fb - &new_m * t;
            let stretch = m.clone().singular_values().max();
            let boundary = SampledBoundary {
                points: sb.points.iter().map(|p| image(p)).collect::<Result<_>>()?,
                grid: sb.grid.clone(),
                covering_radius: sb.covering_radius * stretch,
                frame: Some((new_m.transpose().as_slice().to_vec(), new_b.as_slice().to_vec())),
            };
            Domain::sampled(boundary)
        }
    }
}

fn push_inversion(center: &[f64], radius: f64, g: &Domain) -> Result<Domain> {
    let r2 = radius * radius;
    let f = MapSpec::Inversion { center: center.to_vec(), radius };
    match g.kind() {
        DomainKind::HalfSpace { normal, offset } => {
            let signed = dot(normal, center) - offset;
            let scale_ref = norm(center).max(offset.abs()).max(1.0);
            if signed.abs() <= GEOM_TOL * scale_ref {
                // the boundary hyperplane passes through the centre and is mapped onto itself
                return Ok(g.clone());
            }
            if signed > 0.0 {
                return Err(Error::rejected(
                    "inversion centre lies inside the half-space; the image is a ball complement",
                ));
            }
            let t = -signed;
            let c = add(center, &scale(normal, r2 / (2.0 * t)));
            Domain::ball(&c, r2 / (2.0 * t))
        }
        DomainKind::Ball { center: m, radius: rho } => {
            let dvec = sub(m, center);
            let dd = norm(&dvec);
            if (dd - rho).abs() <= GEOM_TOL * rho.max(dd) {
                let u = scale(&dvec, 1.0 / dd);
                let off = dot(&u, center) + r2 / (2.0 * rho);
                return Domain::half_space(&u, off);
            }
            if dd < *rho {
                return Err(Error::rejected(
                    "inversion centre lies inside the ball; the image is a ball complement",
                ));
            }
            let u = scale(&dvec, 1.0 / dd);
            let (near, far) = (r2 / (dd - rho), r2 / (dd + rho));
            Domain::ball(&add(center, &scale(&u, (near + far) / 2.0)), (near - far) / 2.0)
        }
        DomainKind::Punctured { point } => {
            if dist(point, center) <= GEOM_TOL * norm(center).max(1.0) {
                Ok(g.clone())
            } else {
                Err(Error::rejected(format!(
                    "inverting a space punctured at {point:?} about {center:?} leaves two finite punctures"
                )))
            }
        }
        _ => Err(unsupported(&f, g)),
    }
}

/// Image domain `f(G)` for the supported closed pairs.
pub fn push_domain(f: &MapSpec, g: &Domain) -> Result<Domain> {
    if let Some(d) = f.dim() {
        if d != g.dim() {
            return Err(Error::rejected(format!("map acts on R^{d}, domain lies in R^{}", g.dim())));
        }
    }
    match f {
        MapSpec::Affine { matrix, offset } => push_affine(matrix, offset, g),
        MapSpec::Inversion { center, radius } => push_inversion(center, *radius, g),
        MapSpec::RadialPower { .. } => match g.kind() {
            DomainKind::Punctured { point } if point.iter().all(|c| *c == 0.0) => Ok(g.clone()),
            _ => Err(Error::rejected("radial power maps only the space punctured at 0 onto itself")),
        },
        MapSpec::Composition { maps } => {
            let mut d = g.clone();
            for m in maps {
                d = push_domain(m, &d)?;
            }
            Ok(d)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistortionKind {
    /// `m' <= M m + C` and `m <= M m' + C` on every pair, with `C` minimized first.
    RoughBilipschitz { metric: String, m: f64, c: f64, tight_pair: Option<usize> },
    /// Binned cross-ratio envelope with a dominating power envelope `c0 max(t^λ, t^(1/λ))`.
    QmTheta { bins: Vec<EnvelopeBin>, lambda: f64, c0: f64, c0_least_squares: f64 },
    Dilatation { profile: Vec<RadiusRatio>, h_hat: f64, trend: Trend },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionFit {
    pub kind: DistortionKind,
    pub certificate: Certificate,
    pub evaluated: usize,
    pub skipped: usize,
    pub manifest: FitManifest,
}

/// Minimal `(M, C)` with `M >= 1`, `C >= 0` such that the metric distorts by at most `M m + C`
/// in both directions on every pair.
///
/// `C` is minimized first: it is forced only by pairs where one of `m, m'` vanishes and the
/// other does not. Minimizing `M` first would always return `M = 1`.
pub fn estimate_rough_bilipschitz(
    f: &MapSpec,
    g: &Domain,
    metric: &Metric,
    sample: &PairSample,
) -> Result<DistortionFit> {
    let image = push_domain(f, g)?;
    let values = per_pair(sample, |x, y| {
        let m = metric.evaluate(g, x, y)?.value;
        let (fx, fy) = (apply_finite(f, x)?, apply_finite(f, y)?);
        let m2 = metric.evaluate(&image, &fx, &fy)?.value;
        Ok((m, m2))
    })?;
    let mut c = 0.0f64;
    for &(m, m2) in &values {
        if m == 0.0 {
            c = c.max(m2);
        }
        if m2 == 0.0 {
            c = c.max(m);
        }
    }
    let (mut big_m, mut tight) = (1.0f64, None);
    for (i, &(m, m2)) in values.iter().enumerate() {
        for (num, den) in [(m2, m), (m, m2)] {
            if den > 0.0 {
                let need = (num - c) / den;
                if need > big_m || (tight.is_none() && need >= big_m) {
                    big_m = need.max(1.0);
                    tight = Some(i);
                }
            }
        }
    }
    Ok(DistortionFit {
        kind: DistortionKind::RoughBilipschitz {
            metric: metric.name().to_string(),
            m: big_m,
            c,
            tight_pair: tight,
        },
        certificate: Certificate::LowerBoundOnTrueConstant,
        evaluated: values.len(),
        skipped: 0,
        manifest: FitManifest::default_for(sample).with_entry("metric", metric).with_entry(
            "objective",
            "minimize C, then M",
        ),
    })
}

impl FitManifest {
    fn default_for(sample: &PairSample) -> Self {
        FitManifest { sample: Some(sample.descriptor.clone()), ..Default::default() }
    }

    fn with_entry(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        self.methods.insert(key.to_string(), value.to_string());
        self
    }
}

fn envelope_factor(t: f64, lambda: f64) -> f64 {
    t.powf(lambda).max(t.powf(1.0 / lambda))
}

/// Power envelope `C max(t^λ, t^(1/λ))`, `λ >= 1`, fitted in log-log coordinates under the
/// constraint that it dominates every sampled `(t, τ(fQ))`: for each `λ`, `C` is the smallest
/// dominating constant, and `λ` minimizes the squared log gaps between the envelope and the
/// binned `θ̂` points. Returns `(λ, log C, unconstrained least-squares log C at λ)`.
fn fit_power(points: &[(f64, f64)], items: &[(f64, f64)]) -> (f64, f64, f64) {
    let logc_for = |lambda: f64| {
        items
            .iter()
            .map(|&(t, v)| v.ln() - envelope_factor(t, lambda).ln())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let cost = |lambda: f64| {
        let logc = logc_for(lambda);
        points
            .iter()
            .map(|&(t, v)| {
                let gap = logc + envelope_factor(t, lambda).ln() - v.ln();
                gap * gap
            })
            .sum::<f64>()
    };
    // coarse log-spaced scan, then golden-section refinement around the best node
    let nodes: Vec<f64> = (0..=120).map(|i| 64f64.powf(i as f64 / 120.0)).collect();
    let costs: Vec<f64> = nodes.iter().map(|&l| cost(l)).collect();
    let best = (0..nodes.len()).min_by(|&a, &b| costs[a].total_cmp(&costs[b])).unwrap();
    let (mut a, mut b) = (nodes[best.saturating_sub(1)], nodes[(best + 1).min(nodes.len() - 1)]);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c1 = b - phi * (b - a);
        let c2 = a + phi * (b - a);
        if cost(c1) <= cost(c2) {
            b = c2;
        } else {
            a = c1;
        }
    }
    let mid = (a + b) / 2.0;
    let lambda = if cost(mid) <= costs[best] { mid } else { nodes[best] };
    let ls = points.iter().map(|&(t, v)| v.ln() - envelope_factor(t, lambda).ln()).sum::<f64>() / points.len() as f64;
    (lambda, logc_for(lambda), ls)
}

/// Cross-ratio distortion envelope `θ̂(t) = max { τ(fQ) : τ(Q) <= t }` over sampled quadruples,
/// with a power envelope fitted in log-log coordinates and then raised to dominate every
/// quadruple.
pub fn estimate_qm_theta(f: &MapSpec, quads: &QuadSample, bins: usize) -> Result<DistortionFit> {
    if bins < 4 {
        return Err(Error::rejected("theta envelope needs at least 4 bins"));
    }
    let values: Vec<Option<(f64, f64)>> = quads
        .quads
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let Some(t) = quad_ratio(q) else { return Ok(None) };
            let image: Vec<ExtendedPoint> = q
                .iter()
                .map(|p| apply_map(f, p))
                .collect::<Result<_>>()
                .map_err(|e| e.at(format!("quadruple {i}")))?;
            let image: [ExtendedPoint; 4] = image.try_into().expect("four points");
            Ok(quad_ratio(&image).map(|t2| (t, t2)))
        })
        .collect::<Result<_>>()?;
    let items: Vec<(f64, f64, f64)> = values.iter().flatten().map(|&(t, t2)| (t, t2, 0.0)).collect();
    if items.is_empty() {
        return Err(Error::rejected("every sampled quadruple is degenerate"));
    }
    let bins = monotone_envelope(&items, bins);
    let points: Vec<(f64, f64)> = bins
        .iter()
        .filter(|b| b.count > 0 && b.value > 0.0)
        .map(|b| (b.support, b.value))
        .collect();
    let raw: Vec<(f64, f64)> = items.iter().map(|&(t, v, _)| (t, v)).collect();
    let (lambda, logc, logc_ls) = fit_power(&points, &raw);
    let c0 = logc.exp().max(1.0);
    Ok(DistortionFit {
        kind: DistortionKind::QmTheta { bins, lambda, c0, c0_least_squares: logc_ls.exp() },
        certificate: Certificate::EmpiricalEnvelope,
        evaluated: items.len(),
        skipped: values.len() - items.len(),
        manifest: FitManifest { sample: Some(quads.descriptor.clone()), ..Default::default() }
            .with_entry("fit", "dominating power envelope, lambda by least squares in log-log"),
    })
}

/// Directional spread of `|f(x) - f(x + r e)|` over `m` directions for each radius.
pub fn linear_dilatation(
    f: &MapSpec,
    g: &Domain,
    x: &[f64],
    radii: &[f64],
    m: usize,
) -> Result<DistortionFit> {
    if m < 16 {
        return Err(Error::rejected("linear dilatation needs at least 16 directions"));
    }
    check_radii(g, x, radii)?;
    let fx = apply_finite(f, x)?;
    let dirs = directions(g.dim(), m)?;
    let profile: Vec<RadiusRatio> = radii
        .iter()
        .map(|&r| {
            let values: Vec<f64> = dirs
                .iter()
                .map(|e| Ok(dist(&fx, &apply_finite(f, &add(x, &scale(e, r)))?)))
                .collect::<Result<_>>()?;
            Ok(RadiusRatio { radius: r, ratio: spread(&values) })
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = profile.iter().map(|p| p.ratio).collect();
    Ok(DistortionFit {
        kind: DistortionKind::Dilatation {
            h_hat: *ratios.last().unwrap(),
            trend: Trend::of(&ratios),
            profile,
        },
        certificate: Certificate::EmpiricalEnvelope,
        evaluated: radii.len() * m,
        skipped: 0,
        manifest: FitManifest::default().with_entry("directions", m).with_entry("point", format!("{x:?}")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cross_ratio;
    use crate::qh::{KBackend, Window};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fin(p: &[f64]) -> ExtendedPoint {
        ExtendedPoint::Finite(p.to_vec())
    }

    fn rotation(t: f64) -> Vec<Vec<f64>> {
        vec![vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]]
    }

    #[test]
    fn evaluation_examples() {
        let rp = MapSpec::radial_power(2.0).unwrap();
        assert_eq!(apply_map(&rp, &fin(&[2.0, 0.0])).unwrap(), fin(&[4.0, 0.0]));
        let inv = MapSpec::inversion(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(apply_map(&inv, &fin(&[0.0, 0.0])).unwrap(), ExtendedPoint::Infinity);
        let id = MapSpec::identity(2);
        assert_eq!(apply_map(&id, &fin(&[0.3, -7.0])).unwrap(), fin(&[0.3, -7.0]));
        assert!(MapSpec::affine(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![0.0, 0.0]).is_err());
        assert!(apply_map(&inv, &fin(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn inverses_round_trip() {
        let maps = vec![
            MapSpec::inversion(&[0.5, -1.0], 2.0).unwrap(),
            MapSpec::affine(vec![vec![2.0, 1.0], vec![-0.5, 3.0]], vec![1.0, -2.0]).unwrap(),
            MapSpec::radial_power(2.5).unwrap(),
            MapSpec::composition(vec![
                MapSpec::radial_power(0.7).unwrap(),
                MapSpec::inversion(&[1.0, 1.0], 0.5).unwrap(),
                MapSpec::affine(rotation(0.3), vec![0.2, 0.1]).unwrap(),
            ]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for f in &maps {
            let finv = f.inverse();
            for _ in 0..200 {
                let p = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
                let back = apply_map(&finv, &apply_map(f, &fin(&p)).unwrap()).unwrap();
                let back = back.as_finite().unwrap();
                assert!(dist(back, &p) <= 1e-12 * norm(&p).max(1.0), "{f:?}: {p:?} -> {back:?}");
            }
            if !matches!(f, MapSpec::Composition { .. }) {
                let back = apply_map(&finv, &apply_map(f, &ExtendedPoint::Infinity).unwrap()).unwrap();
                assert_eq!(back, ExtendedPoint::Infinity);
            }
        }
    }

    #[test]
    fn push_examples() {
        let inv = MapSpec::inversion(&[0.0, 0.0], 1.0).unwrap();
        let p = Domain::punctured_plane();
        assert_eq!(push_domain(&inv, &p).unwrap(), p);

        let rot = MapSpec::affine(rotation(0.7), vec![1.0, 2.0]).unwrap();
        let b = Domain::ball(&[1.0, 0.0], 0.5).unwrap();
        let DomainKind::Ball { center, radius } = push_domain(&rot, &b).unwrap().kind().clone() else {
            panic!()
        };
        assert!((radius - 0.5).abs() < 1e-12);
        let expected = apply_finite(&rot, &[1.0, 0.0]).unwrap();
        assert!(dist(&center, &expected) < 1e-12);

        let h = Domain::half_space(&[0.0, 1.0], 1.0).unwrap();
        let image = push_domain(&inv, &h).unwrap();
        let DomainKind::Ball { center, radius } = image.kind().clone() else { panic!() };
        assert!(dist(&center, &[0.0, 0.5]) < 1e-15 && (radius - 0.5).abs() < 1e-15);
        // sampled boundary points of the source land on the image sphere
        let sample = h.sample_boundary(1).unwrap();
        let mut checked = 0;
        for q in sample.finite_points().take(100) {
            let fq = apply_finite(&inv, q).unwrap();
            assert!((dist(&fq, &center) - radius).abs() < 1e-9);
            checked += 1;
        }
        assert_eq!(checked, 100);
    }

    #[test]
    fn push_rejections() {
        let inv = MapSpec::inversion(&[0.0, 0.0], 1.0).unwrap();
        assert!(push_domain(&inv, &Domain::unit_disk()).is_err());
        assert!(push_domain(&inv, &Domain::upper_half_plane().clone()).is_ok());
        assert!(push_domain(&inv, &Domain::half_space(&[0.0, 1.0], -1.0).unwrap()).is_err());
        let shifted = MapSpec::inversion(&[3.0, 0.0], 1.0).unwrap();
        assert!(push_domain(&shifted, &Domain::punctured_plane()).is_err());
        let rp = MapSpec::radial_power(2.0).unwrap();
        assert!(push_domain(&rp, &Domain::upper_half_plane()).is_err());
        let shear = MapSpec::affine(vec![vec![1.0, 1.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        assert!(push_domain(&shear, &Domain::unit_disk()).is_err());
    }

    #[test]
    fn ball_through_centre_maps_to_half_space() {
        let inv = MapSpec::inversion(&[0.0, 0.0], 1.0).unwrap();
        let b = Domain::ball(&[0.0, 0.5], 0.5).unwrap();
        let h = push_domain(&inv, &b).unwrap();
        assert_eq!(h.kind(), &DomainKind::HalfSpace { normal: vec![0.0, 1.0], offset: 1.0 });
        // round trip through the inverse
        let back = push_domain(&inv.inverse(), &h).unwrap();
        let DomainKind::Ball { center, radius } = back.kind().clone() else { panic!() };
        assert!(dist(&center, &[0.0, 0.5]) < 1e-15 && (radius - 0.5).abs() < 1e-15);
    }

    #[test]
    fn affine_image_distances_match() {
        let f = MapSpec::affine(vec![vec![2.0, 1.0], vec![0.0, 1.0]], vec![0.5, -1.0]).unwrap();
        let poly = Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], crate::geometry::Orientation::Ccw).unwrap();
        let h = Domain::half_space(&[1.0, 1.0], 0.5).unwrap();
        let slab = Domain::slab_axis(2, 1, 0.0, 1.0).unwrap();
        for g in [poly, h, slab] {
            let image = push_domain(&f, &g).unwrap();
            for p in [[0.3, 0.4], [0.9, 0.2], [0.5, 0.5]] {
                if g.contains(&p) {
                    assert!(image.contains(&apply_finite(&f, &p).unwrap()));
                }
            }
        }
    }

    #[test]
    fn mobius_preserves_cross_ratios() {
        let f = MapSpec::composition(vec![
            MapSpec::inversion(&[0.2, 0.1], 1.3).unwrap(),
            MapSpec::affine(vec![vec![0.0, -2.0], vec![2.0, 0.0]], vec![1.0, 0.0]).unwrap(),
            MapSpec::inversion(&[-1.0, 0.4], 0.7).unwrap(),
        ]);
        assert!(f.is_mobius());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let q: Vec<ExtendedPoint> =
                (0..4).map(|_| fin(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])).collect();
            let fq: Vec<ExtendedPoint> = q.iter().map(|p| apply_map(&f, p).unwrap()).collect();
            let a = cross_ratio(&q[0], &q[1], &q[2], &q[3]).unwrap();
            let b = cross_ratio(&fq[0], &fq[1], &fq[2], &fq[3]).unwrap();
            assert!((a - b).abs() <= 1e-9 * a, "{a} vs {b}");
        }
    }

    #[test]
    fn rough_bilipschitz_identity_and_inversion() {
        let g = Domain::punctured_plane();
        let s = PairSample::uniform(&g, &Window::centered(2, 3.0), 1, 200, 0.0).unwrap();
        for metric in [Metric::Alpha { level: 0 }, Metric::J, Metric::K { backend: KBackend::Exact }] {
            let fit = estimate_rough_bilipschitz(&MapSpec::identity(2), &g, &metric, &s).unwrap();
            let DistortionKind::RoughBilipschitz { m, c, .. } = fit.kind else { panic!() };
            assert_eq!((m, c), (1.0, 0.0), "{metric}");
        }
        let inv = MapSpec::inversion(&[0.0, 0.0], 1.0).unwrap();
        let fit = estimate_rough_bilipschitz(&inv, &g, &Metric::Alpha { level: 0 }, &s).unwrap();
        let DistortionKind::RoughBilipschitz { m, c, .. } = fit.kind else { panic!() };
        assert!((m - 1.0).abs() < 1e-9 && c < 1e-9);
    }

    #[test]
    fn rough_bilipschitz_radial_power() {
        let g = Domain::punctured_plane();
        let s = PairSample::uniform(&g, &Window::centered(2, 3.0), 2, 200, 0.0).unwrap();
        let f = MapSpec::radial_power(3.0).unwrap();
        let fit = estimate_rough_bilipschitz(&f, &g, &Metric::Alpha { level: 0 }, &s).unwrap();
        let DistortionKind::RoughBilipschitz { m, c, .. } = fit.kind else { panic!() };
        assert!((m - 3.0).abs() < 1e-9 && c == 0.0, "{m} {c}");
    }

    #[test]
    fn theta_identity_and_mobius() {
        let g = Domain::punctured_plane();
        let q = QuadSample::closure(&g, &Window::centered(2, 2.0), 3, 2000, 0.2, 0).unwrap();
        let fit = estimate_qm_theta(&MapSpec::identity(2), &q, 16).unwrap();
        let DistortionKind::QmTheta { bins, lambda, c0, .. } = fit.kind else { panic!() };
        assert!(bins.iter().all(|b| b.count == 0 || b.value == b.support));
        assert!((lambda - 1.0).abs() < 1e-6 && c0 == 1.0, "{lambda} {c0}");

        let inv = MapSpec::inversion(&[0.0, 0.0], 1.0).unwrap();
        let fit = estimate_qm_theta(&inv, &q, 16).unwrap();
        let DistortionKind::QmTheta { bins, .. } = fit.kind else { panic!() };
        for b in bins.iter().filter(|b| b.count > 0) {
            assert!((b.value - b.support).abs() <= 1e-9 * b.support);
        }
    }

    #[test]
    fn theta_fit_recovers_radial_power_exponent() {
        let g = Domain::punctured_plane();
        let q = QuadSample::log_radial(&g, &[0.0, 0.0], 1e-3, 1e3, 9, 4000, 0.25, 0).unwrap();
        let f = MapSpec::radial_power(3.0).unwrap();
        let fit = estimate_qm_theta(&f, &q, 16).unwrap();
        let DistortionKind::QmTheta { bins, lambda, c0, .. } = fit.kind else { panic!() };
        assert!((lambda - 3.0).abs() < 0.5, "{lambda}");
        for b in bins.iter().filter(|b| b.count > 0) {
            assert!(b.value <= c0 * b.support.powf(lambda).max(b.support.powf(1.0 / lambda)) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn dilatation_examples() {
        let g = Domain::punctured_plane();
        let radii = [1e-2, 1e-3, 1e-4];
        let rp = MapSpec::radial_power(2.0).unwrap();
        let fit = linear_dilatation(&rp, &g, &[1.0, 0.0], &radii, 32).unwrap();
        let DistortionKind::Dilatation { h_hat, profile, .. } = fit.kind else { panic!() };
        assert!((h_hat - 2.0).abs() < 1e-3, "{h_hat}");
        let errs: Vec<f64> = profile.iter().map(|p| (p.ratio - 2.0).abs()).collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0]));

        let inv = MapSpec::inversion(&[0.0, 0.0], 1.0).unwrap();
        let fit = linear_dilatation(&inv, &g, &[1.0, 0.5], &radii, 16).unwrap();
        let DistortionKind::Dilatation { h_hat, .. } = fit.kind else { panic!() };
        assert!((h_hat - 1.0).abs() < 1e-3);

        let fit = linear_dilatation(&MapSpec::identity(2), &g, &[1.0, 0.5], &[0.1], 16).unwrap();
        let DistortionKind::Dilatation { h_hat, .. } = fit.kind else { panic!() };
        assert!(h_hat >= 1.0);
        assert!(linear_dilatation(&rp, &g, &[1.0, 0.0], &[0.1], 8).is_err());
    }
}
