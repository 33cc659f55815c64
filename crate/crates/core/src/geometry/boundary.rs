use std::f64::consts::PI;

use super::domain::{Domain, DomainKind};
use super::{add, dot, lerp, norm, scale, sub, ExtendedPoint};
use crate::error::{Error, Result};

/// Level-0 point count of a one-dimensional boundary component; doubles per level.
pub const CURVE_BASE: usize = 64;
/// Level-0 subdivisions per polygon edge; doubles per level.
pub const EDGE_BASE: usize = 8;
/// Level-0 lattice half-range `|k| <= LATTICE_BASE`; doubles per level.
pub const LATTICE_BASE: i64 = 32;

/// Deterministic finite subset of `∂G` used to approximate sups over boundary points.
///
/// Finite points are stored contiguously in traversal order, so consecutive points are
/// spatially close along each boundary component.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample {
    dim: usize,
    coords: Vec<f64>,
    pub level: u32,
    pub includes_infinity: bool,
}

impl BoundarySample {
    fn new(dim: usize, level: u32, includes_infinity: bool) -> Self {
        BoundarySample { dim, coords: Vec::new(), level, includes_infinity }
    }

    fn push(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim);
        self.coords.extend_from_slice(p);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn finite_len(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// Number of points, counting ∞ when present.
    pub fn len(&self) -> usize {
        self.finite_len() + usize::from(self.includes_infinity)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn finite_points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn finite_point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> Vec<ExtendedPoint> {
        let mut v: Vec<ExtendedPoint> =
            self.finite_points().map(|p| ExtendedPoint::Finite(p.to_vec())).collect();
        if self.includes_infinity {
            v.push(ExtendedPoint::Infinity);
        }
        v
    }
}

/// Unit sphere grid in R^3: rows at polar angles `π i / (17·2^ℓ)`, columns at azimuths
/// `2π j / (16·2^ℓ)`, plus both poles. The north pole comes first.
fn sphere_grid(level: u32) -> Vec<[f64; 3]> {
    let rows = 17usize << level;
    let cols = 16usize << level;
    let mut out = Vec::with_capacity((rows - 1) * cols + 2);
    out.push([0.0, 0.0, 1.0]);
    for i in 1..rows {
        let theta = (PI * i as f64) / rows as f64;
        let (st, ct) = theta.sin_cos();
        for j in 0..cols {
            let phi = (2.0 * PI * j as f64) / cols as f64;
            let (sp, cp) = phi.sin_cos();
            out.push([st * cp, st * sp, ct]);
        }
    }
    out.push([0.0, 0.0, -1.0]);
    out
}

/// Orthonormal basis of the hyperplane orthogonal to the unit vector `n`.
fn complement_basis(n: &[f64]) -> Vec<Vec<f64>> {
    let dim = n.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim - 1);
    let mut axes: Vec<usize> = (0..dim).collect();
    axes.sort_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()));
    for &k in &axes {
        if basis.len() == dim - 1 {
            break;
        }
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        let proj = dot(&v, n);
        v = sub(&v, &scale(n, proj));
        for b in &basis {
            let c = dot(&v, b);
            v = sub(&v, &scale(b, c));
        }
        let len = norm(&v);
        if len > 1e-8 {
            basis.push(scale(&v, 1.0 / len));
        }
    }
    basis
}

/// Finite sample of the hyperplane `{<n, x> = offset}`; ∞ is not added here.
fn push_hyperplane(out: &mut BoundarySample, n: &[f64], offset: f64, level: u32) -> Result<()> {
    let foot = scale(n, offset);
    let basis = complement_basis(n);
    match n.len() {
        2 => {
            let count = CURVE_BASE << level;
            for i in 1..count {
                let theta = -PI / 2.0 + (PI * i as f64) / count as f64;
                out.push(&add(&foot, &scale(&basis[0], theta.tan())));
            }
        }
        3 => {
            // stereographic image of the sphere grid; the north pole goes to ∞
            for s in sphere_grid(level).into_iter().skip(1) {
                let k = 1.0 / (1.0 - s[2]);
                let p = add(&foot, &add(&scale(&basis[0], s[0] * k), &scale(&basis[1], s[1] * k)));
                out.push(&p);
            }
        }
        d => return Err(Error::Unsupported(format!("boundary sampling in dimension {d}"))),
    }
    Ok(())
}

impl Domain {
    /// Deterministic boundary sample at refinement `level`. Level ℓ is a subset of level ℓ+1,
    /// and ∞ is included exactly when the domain is unbounded.
    pub fn sample_boundary(&self, level: u32) -> Result<BoundarySample> {
        let dim = self.dim();
        let mut out = BoundarySample::new(dim, level, self.is_unbounded());
        match self.kind() {
            DomainKind::Punctured { point } => out.push(point),
            DomainKind::HalfSpace { normal, offset } => push_hyperplane(&mut out, normal, *offset, level)?,
            DomainKind::Slab { normal, low, high } => {
                push_hyperplane(&mut out, normal, *low, level)?;
                push_hyperplane(&mut out, normal, *high, level)?;
            }
            DomainKind::Ball { center, radius } => match dim {
                2 => {
                    let count = CURVE_BASE << level;
                    for i in 0..count {
                        let t = (2.0 * PI * i as f64) / count as f64;
                        let (s, c) = t.sin_cos();
                        out.push(&[center[0] + radius * c, center[1] + radius * s]);
                    }
                }
                3 => {
                    for s in sphere_grid(level) {
                        out.push(&add(center, &scale(&s, *radius)));
                    }
                }
                d => return Err(Error::Unsupported(format!("boundary sampling in dimension {d}"))),
            },
            DomainKind::Polygon { vertices, .. } => {
                let per_edge = EDGE_BASE << level;
                let n = vertices.len();
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    for j in 0..per_edge {
                        out.push(&lerp(&a, &b, j as f64 / per_edge as f64));
                    }
                }
            }
            DomainKind::Lattice { origin, step } => {
                let k_max = LATTICE_BASE << level;
                for k in -k_max..=k_max {
                    out.push(&add(origin, &scale(step, k as f64)));
                }
            }
            DomainKind::Sampled(s) => {
                for p in &s.points {
                    out.push(p);
                }
            }
        }
        Ok(out)
    }
}
