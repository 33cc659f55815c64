//! Quasihyperbolic distance `k_G` on weighted grid graphs.
//!
//! Grid nodes are the lattice points of a window with `d_G > h`. An edge `(u, v)` from the
//! stencil is admitted when `min(d_G(u), d_G(v)) > |u - v| / 2`, which keeps the whole segment
//! inside `G`, and weighs `|u - v| (1/d_G(u) + 1/d_G(v)) / 2`. Query points are attached to
//! every node within `2h`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{dist, Domain, DomainKind};
use crate::metrics::{Bound, Method, MetricEstimate};

/// Largest number of grid cells a single grid may allocate.
pub const MAX_CELLS: usize = 50_000_000;

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::rejected("window needs lo < hi in every coordinate"));
        }
        Ok(Window { lo, hi })
    }

    /// The box `[-half_width, half_width]^dim`.
    pub fn centered(dim: usize, half_width: f64) -> Self {
        Window { lo: vec![-half_width; dim], hi: vec![half_width; dim] }
    }

    /// Box hull of the points inflated by `margin` on every side.
    pub fn around(points: &[&[f64]], margin: f64) -> Self {
        let dim = points[0].len();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in points {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k] - margin);
                hi[k] = hi[k].max(p[k] + margin);
            }
        }
        Window { lo, hi }
    }

    /// Hull of `x, y` inflated by `max(d_G(x), d_G(y), |x - y|)`, clipped to the bounding box
    /// of a bounded domain.
    pub fn auto(g: &Domain, x: &[f64], y: &[f64]) -> Result<Self> {
        let m = g.dist_to_boundary(x)?.max(g.dist_to_boundary(y)?).max(dist(x, y));
        let mut w = Window::around(&[x, y], m);
        w.clip_to(g);
        Ok(w)
    }

    pub(crate) fn clip_to(&mut self, g: &Domain) {
        if let Some((blo, bhi)) = g.bounding_box() {
            for k in 0..self.lo.len() {
                self.lo[k] = self.lo[k].max(blo[k]);
                self.hi[k] = self.hi[k].min(bhi[k]);
            }
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(c, (l, h))| *c >= *l && *c <= *h)
    }
}

/// Neighbour stencil: every primitive integer offset with max-norm at most `radius`.
/// Radius 1 is the 8-neighbour (2D) / 26-neighbour (3D) stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Stencil {
    pub radius: u32,
}

impl Stencil {
    pub fn moore() -> Self {
        Stencil { radius: 1 }
    }

    /// 32 directions in the plane, 26 in space.
    pub fn default_for(dim: usize) -> Self {
        if dim == 2 {
            Stencil { radius: 3 }
        } else {
            Stencil::moore()
        }
    }

    fn offsets(&self, dim: usize) -> Vec<Vec<i64>> {
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 {
                a.abs()
            } else {
                gcd(b, a % b)
            }
        }
        let r = self.radius as i64;
        let mut out = Vec::new();
        let side = (2 * r + 1) as usize;
        let total = side.pow(dim as u32);
        for mut code in 0..total {
            let mut v = Vec::with_capacity(dim);
            for _ in 0..dim {
                v.push((code % side) as i64 - r);
                code /= side;
            }
            if v.iter().all(|&c| c == 0) {
                continue;
            }
            if v.iter().fold(0, |acc, &c| gcd(acc, c)) == 1 {
                out.push(v);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct QhOptions {
    /// Search window; defaults to [`Window::auto`].
    pub window: Option<Window>,
    /// Defaults to [`Stencil::default_for`] the ambient dimension.
    pub stencil: Option<Stencil>,
}

#[derive(Debug, Clone)]
struct Offset {
    delta: Vec<i64>,
    linear: isize,
    length: f64,
}

/// Immutable grid graph over `G ∩ window`; reusable for many queries.
#[derive(Debug, Clone)]
pub struct QhGrid {
    domain: Domain,
    h: f64,
    window: Window,
    shape: Vec<usize>,
    strides: Vec<usize>,
    /// `d_G` at admitted nodes, 0 elsewhere.
    dist: Vec<f64>,
    inv_dist: Vec<f64>,
    node_count: usize,
    offsets: Vec<Offset>,
    stencil: Stencil,
}

#[derive(Clone, Copy)]
struct HeapItem {
    cost: f64,
    node: u32,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl Ord for HeapItem {
    // min-heap on (cost, node index)
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NO_PRED: u32 = u32::MAX;

/// A grid shortest path from `x` to `y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QhPath {
    /// `x`, the visited grid nodes, then `y`.
    pub points: Vec<Vec<f64>>,
    /// Cumulative weight at each entry of `points`.
    pub cumulative: Vec<f64>,
    pub nodes: Vec<usize>,
    pub total: f64,
    /// Weights of the attachment edges at `x` and at `y`.
    pub snaps: (f64, f64),
    pub h: f64,
    /// Some node of the path lies on the window boundary; the window may truncate geodesics.
    pub touches_window: bool,
}

/// Summary of a grid, as recorded in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridStats {
    pub h: f64,
    pub window: Window,
    pub shape: Vec<usize>,
    pub node_count: usize,
    pub stencil_radius: u32,
}

struct Search {
    dist: Vec<f64>,
    pred: Vec<u32>,
}

impl QhGrid {
    pub fn build(g: &Domain, window: &Window, h: f64, stencil: Stencil) -> Result<Self> {
        let dim = g.dim();
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::rejected("grid resolution h must be positive"));
        }
        if !matches!(dim, 2 | 3) {
            return Err(Error::Unsupported(format!("quasihyperbolic grids in dimension {dim}")));
        }
        if window.lo.len() != dim {
            return Err(Error::rejected("window dimension does not match the domain"));
        }
        let shape: Vec<usize> = window
            .lo
            .iter()
            .zip(&window.hi)
            .map(|(l, u)| ((u - l) / h).floor() as usize + 1)
            .collect();
        let cells = shape.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        let cells = match cells {
            Some(c) if c <= MAX_CELLS => c,
            _ => {
                return Err(Error::rejected(format!(
                    "grid of shape {shape:?} exceeds {MAX_CELLS} cells; increase h or shrink the window"
                )))
            }
        };
        let mut strides = vec![1usize; dim];
        for k in 1..dim {
            strides[k] = strides[k - 1] * shape[k - 1];
        }
        let mut dist_v = vec![0.0; cells];
        let mut inv = vec![0.0; cells];
        let mut node_count = 0;
        let mut p = vec![0.0; dim];
        for c in 0..cells {
            let mut rem = c;
            for k in 0..dim {
                p[k] = window.lo[k] + (rem % shape[k]) as f64 * h;
                rem /= shape[k];
            }
            if let Some(d) = g.interior_distance(&p) {
                if d > h {
                    dist_v[c] = d;
                    inv[c] = 1.0 / d;
                    node_count += 1;
                }
            }
        }
        if node_count == 0 {
            return Err(Error::EmptyGrid { h });
        }
        let offsets = stencil
            .offsets(dim)
            .into_iter()
            .map(|delta| {
                let linear = delta
                    .iter()
                    .zip(&strides)
                    .map(|(d, s)| d * *s as i64)
                    .sum::<i64>() as isize;
                let length = h * (delta.iter().map(|d| (d * d) as f64).sum::<f64>()).sqrt();
                Offset { delta, linear, length }
            })
            .collect();
        Ok(QhGrid {
            domain: g.clone(),
            h,
            window: window.clone(),
            shape,
            strides,
            dist: dist_v,
            inv_dist: inv,
            node_count,
            offsets,
            stencil,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn stats(&self) -> GridStats {
        GridStats {
            h: self.h,
            window: self.window.clone(),
            shape: self.shape.clone(),
            node_count: self.node_count,
            stencil_radius: self.stencil.radius,
        }
    }

    fn coords(&self, c: usize) -> Vec<usize> {
        let mut rem = c;
        self.shape
            .iter()
            .map(|&n| {
                let i = rem % n;
                rem /= n;
                i
            })
            .collect()
    }

    pub fn node_position(&self, c: usize) -> Vec<f64> {
        self.coords(c)
            .iter()
            .zip(&self.window.lo)
            .map(|(&i, l)| l + i as f64 * self.h)
            .collect()
    }

    pub fn is_node(&self, c: usize) -> bool {
        c < self.dist.len() && self.dist[c] > 0.0
    }

    /// Positions of all admitted nodes.
    pub fn nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.dist.len()).filter(|&c| self.is_node(c)).map(|c| self.node_position(c))
    }

    fn on_window_edge(&self, c: usize) -> bool {
        self.coords(c).iter().zip(&self.shape).any(|(&i, &n)| i == 0 || i + 1 == n)
    }

    /// Attachment edges from a query point to nearby nodes.
    fn snaps(&self, p: &[f64], dp: f64) -> Vec<(usize, f64)> {
        let dim = self.shape.len();
        let reach = 2.0 * self.h;
        let mut ranges = Vec::with_capacity(dim);
        for k in 0..dim {
            let lo = ((p[k] - reach - self.window.lo[k]) / self.h).ceil().max(0.0) as i64;
            let hi = ((p[k] + reach - self.window.lo[k]) / self.h)
                .floor()
                .min(self.shape[k] as f64 - 1.0) as i64;
            if hi < lo {
                return Vec::new();
            }
            ranges.push((lo, hi));
        }
        let mut out = Vec::new();
        let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        'outer: loop {
            let c: usize = idx.iter().zip(&self.strides).map(|(&i, &s)| i as usize * s).sum();
            if self.is_node(c) {
                let q = self.node_position(c);
                let len = dist(p, &q);
                if len <= reach && dp.min(self.dist[c]) > len / 2.0 {
                    out.push((c, len * (1.0 / dp + self.inv_dist[c]) / 2.0));
                }
            }
            for k in 0..dim {
                idx[k] += 1;
                if idx[k] <= ranges[k].1 {
                    continue 'outer;
                }
                idx[k] = ranges[k].0;
            }
            break;
        }
        out
    }

    /// Dijkstra from the attachment edges `sources`; `stop` sees every settled node and its
    /// cost and returns `true` to end the search.
    fn run(&self, sources: &[(usize, f64)], mut stop: impl FnMut(usize, f64) -> bool) -> Search {
        let cells = self.dist.len();
        let mut dist_v = vec![f64::INFINITY; cells];
        let mut pred = vec![NO_PRED; cells];
        let mut heap = BinaryHeap::new();
        for &(c, w) in sources {
            if w < dist_v[c] {
                dist_v[c] = w;
                heap.push(HeapItem { cost: w, node: c as u32 });
            }
        }
        let dim = self.shape.len();
        let mut coords = vec![0i64; dim];
        while let Some(HeapItem { cost, node }) = heap.pop() {
            let u = node as usize;
            if cost > dist_v[u] {
                continue;
            }
            if stop(u, cost) {
                break;
            }
            let mut rem = u;
            for k in 0..dim {
                coords[k] = (rem % self.shape[k]) as i64;
                rem /= self.shape[k];
            }
            let du = self.dist[u];
            let iu = self.inv_dist[u];
            for off in &self.offsets {
                let in_bounds = coords
                    .iter()
                    .zip(&off.delta)
                    .zip(&self.shape)
                    .all(|((&c, &d), &n)| {
                        let v = c + d;
                        v >= 0 && v < n as i64
                    });
                if !in_bounds {
                    continue;
                }
                let v = (u as isize + off.linear) as usize;
                let dv = self.dist[v];
                if dv == 0.0 || du.min(dv) <= off.length / 2.0 {
                    continue;
                }
                let nc = cost + off.length * (iu + self.inv_dist[v]) / 2.0;
                if nc < dist_v[v] || (nc == dist_v[v] && pred[v] != NO_PRED && (u as u32) < pred[v]) {
                    if nc < dist_v[v] {
                        heap.push(HeapItem { cost: nc, node: v as u32 });
                    }
                    dist_v[v] = nc;
                    pred[v] = u as u32;
                }
            }
        }
        Search { dist: dist_v, pred }
    }

    fn endpoint_distance(&self, p: &[f64], name: &str) -> Result<f64> {
        self.domain
            .dist_to_boundary(p)
            .map_err(|_| Error::rejected(format!("{name} = {p:?} is not in the domain")))
    }

    /// Shortest grid path from `x` to `y`.
    pub fn shortest_path(&self, x: &[f64], y: &[f64]) -> Result<QhPath> {
        let dx = self.endpoint_distance(x, "x")?;
        let dy = self.endpoint_distance(y, "y")?;
        if x == y {
            return Ok(QhPath {
                points: vec![x.to_vec()],
                cumulative: vec![0.0],
                nodes: Vec::new(),
                total: 0.0,
                snaps: (0.0, 0.0),
                h: self.h,
                touches_window: false,
            });
        }
        let xy = dist(x, y);
        let direct = (xy <= 2.0 * self.h && dx.min(dy) > xy / 2.0)
            .then(|| xy * (1.0 / dx + 1.0 / dy) / 2.0);
        let src = self.snaps(x, dx);
        let dst = self.snaps(y, dy);
        if direct.is_none() && (src.is_empty() || dst.is_empty()) {
            return Err(Error::NotConnected { h: self.h });
        }
        let dst_map: HashMap<usize, f64> = dst.iter().copied().collect();
        let mut best = direct.unwrap_or(f64::INFINITY);
        let mut best_node: Option<usize> = None;
        let search = self.run(&src, |u, cost| {
            if cost >= best {
                return true;
            }
            if let Some(w) = dst_map.get(&u) {
                let total = cost + w;
                if total < best {
                    best = total;
                    best_node = Some(u);
                }
            }
            false
        });
        if !best.is_finite() {
            return Err(Error::NotConnected { h: self.h });
        }
        let Some(last) = best_node else {
            let w = direct.unwrap();
            return Ok(QhPath {
                points: vec![x.to_vec(), y.to_vec()],
                cumulative: vec![0.0, w],
                nodes: Vec::new(),
                total: w,
                snaps: (w, 0.0),
                h: self.h,
                touches_window: false,
            });
        };
        let mut nodes = vec![last];
        while search.pred[*nodes.last().unwrap()] != NO_PRED {
            nodes.push(search.pred[*nodes.last().unwrap()] as usize);
        }
        nodes.reverse();
        let snap_in = search.dist[nodes[0]];
        let snap_out = dst_map[&last];
        let mut points = vec![x.to_vec()];
        let mut cumulative = vec![0.0];
        for &c in &nodes {
            points.push(self.node_position(c));
            cumulative.push(search.dist[c]);
        }
        points.push(y.to_vec());
        cumulative.push(best);
        let touches_window = nodes.iter().any(|&c| self.on_window_edge(c));
        Ok(QhPath {
            points,
            cumulative,
            nodes,
            total: best,
            snaps: (snap_in, snap_out),
            h: self.h,
            touches_window,
        })
    }

    /// Grid distances from `source` to each target (`None` where unreachable).
    pub fn distances_from(&self, source: &[f64], targets: &[&[f64]]) -> Result<Vec<Option<f64>>> {
        let ds = self.endpoint_distance(source, "source")?;
        let mut best: Vec<f64> = vec![f64::INFINITY; targets.len()];
        let mut attach: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        for (i, t) in targets.iter().enumerate() {
            let dt = self.endpoint_distance(t, "target")?;
            if *t == source {
                best[i] = 0.0;
                continue;
            }
            let st = dist(source, t);
            if st <= 2.0 * self.h && ds.min(dt) > st / 2.0 {
                best[i] = st * (1.0 / ds + 1.0 / dt) / 2.0;
            }
            for (c, w) in self.snaps(t, dt) {
                attach.entry(c).or_default().push((i, w));
            }
        }
        let src = self.snaps(source, ds);
        let mut worst = best.iter().copied().fold(0.0, f64::max);
        self.run(&src, |u, cost| {
            if cost >= worst {
                return true;
            }
            if let Some(list) = attach.get(&u) {
                for &(i, w) in list {
                    best[i] = best[i].min(cost + w);
                }
                worst = best.iter().copied().fold(0.0, f64::max);
            }
            false
        });
        Ok(best.into_iter().map(|b| b.is_finite().then_some(b)).collect())
    }
}

fn resolve(g: &Domain, x: &[f64], y: &[f64], opts: &QhOptions) -> Result<(Window, Stencil)> {
    let window = match &opts.window {
        Some(w) => w.clone(),
        None => Window::auto(g, x, y)?,
    };
    for (name, p) in [("x", x), ("y", y)] {
        if !window.contains(p) {
            return Err(Error::rejected(format!("{name} = {p:?} lies outside the window")));
        }
    }
    Ok((window, opts.stencil.unwrap_or(Stencil::default_for(g.dim()))))
}

/// Grid geodesic at a single resolution.
pub fn qh_geodesic(g: &Domain, x: &[f64], y: &[f64], h: f64, opts: &QhOptions) -> Result<QhPath> {
    let (window, stencil) = resolve(g, x, y, opts)?;
    QhGrid::build(g, &window, h, stencil)?.shortest_path(x, y)
}

/// Grid value of `k_G(x, y)` at resolution `h`, with the change under one refinement
/// `h -> h/2` as the two-sided gap.
pub fn qh_distance(g: &Domain, x: &[f64], y: &[f64], h: f64, opts: &QhOptions) -> Result<MetricEstimate> {
    let coarse = qh_geodesic(g, x, y, h, opts)?.total;
    let fine = qh_geodesic(g, x, y, h / 2.0, opts)?.total;
    Ok(MetricEstimate {
        value: coarse,
        method: Method::Grid { h },
        bound: Bound::TwoSided { gap: (coarse - fine).abs() },
        pseudometric: false,
    })
}

/// Closed-form `k_G` for half-spaces and punctured spaces.
///
/// In a half-space `k` is the hyperbolic distance of the length element `|dx|/d_G(x)`. In
/// `R^n \ {p}` it is `sqrt(θ^2 + log^2(|x-p|/|y-p|))` with `θ ∈ [0, π]` the angle at `p`.
pub fn qh_distance_exact(g: &Domain, x: &[f64], y: &[f64]) -> Result<MetricEstimate> {
    let dx = g.dist_to_boundary(x)?;
    let dy = g.dist_to_boundary(y)?;
    let v = match g.kind() {
        DomainKind::HalfSpace { .. } => 2.0 * (dist(x, y) / (2.0 * (dx * dy).sqrt())).asinh(),
        DomainKind::Punctured { point } => {
            let u: Vec<f64> = x.iter().zip(point).map(|(a, b)| a - b).collect();
            let v: Vec<f64> = y.iter().zip(point).map(|(a, b)| a - b).collect();
            let cross2: f64 = {
                // |u|^2 |v|^2 - (u.v)^2, via Lagrange's identity
                let mut s = 0.0;
                for i in 0..u.len() {
                    for j in (i + 1)..u.len() {
                        let m = u[i] * v[j] - u[j] * v[i];
                        s += m * m;
                    }
                }
                s
            };
            let dotp: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            let theta = cross2.sqrt().atan2(dotp);
            theta.hypot((dx / dy).ln())
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "no closed-form quasihyperbolic distance for {}",
                g.variant_name()
            )))
        }
    };
    Ok(MetricEstimate::exact(v))
}

/// Source of `k_G` values for the estimators.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KBackend {
    Exact,
    /// Fixed resolution with one `h -> h/2` refinement.
    Grid { h: f64 },
    /// Resolution `fraction * min(d_G(x), d_G(y))` per pair, with one refinement.
    RelativeGrid { fraction: f64 },
}

impl KBackend {
    pub fn estimate(&self, g: &Domain, x: &[f64], y: &[f64]) -> Result<MetricEstimate> {
        match self {
            KBackend::Exact => qh_distance_exact(g, x, y),
            KBackend::Grid { h } => {
                if x == y {
                    return Ok(MetricEstimate::exact(0.0));
                }
                qh_distance(g, x, y, *h, &QhOptions::default())
            }
            KBackend::RelativeGrid { fraction } => {
                if x == y {
                    return Ok(MetricEstimate::exact(0.0));
                }
                let h = fraction * g.dist_to_boundary(x)?.min(g.dist_to_boundary(y)?);
                qh_distance(g, x, y, h, &QhOptions::default())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    #[test]
    fn half_plane_nodes_respect_margin() {
        let g = Domain::upper_half_plane();
        let w = Window::new(vec![-2.0, 0.0], vec![2.0, 2.0]).unwrap();
        let grid = QhGrid::build(&g, &w, 0.5, Stencil::moore()).unwrap();
        let ys: Vec<f64> = grid.nodes().map(|p| p[1]).collect();
        assert!(ys.iter().all(|&y| y > 0.5));
        assert_eq!(grid.node_count(), 9 * 3);
    }

    #[test]
    fn punctured_nodes_avoid_puncture() {
        let g = Domain::punctured_plane();
        let grid = QhGrid::build(&g, &Window::centered(2, 2.0), 0.1, Stencil::moore()).unwrap();
        assert!(grid.nodes().all(|p| (p[0] * p[0] + p[1] * p[1]).sqrt() > 0.1));
    }

    #[test]
    fn slab_nodes_in_3d() {
        let g = Domain::slab_axis(3, 2, 0.0, 1.0).unwrap();
        let w = Window::new(vec![-1.0, -1.0, 0.0], vec![1.0, 1.0, 1.0]).unwrap();
        let grid = QhGrid::build(&g, &w, 0.2, Stencil::moore()).unwrap();
        assert!(grid.nodes().all(|p| p[2] > 0.2 + 1e-12 && p[2] < 0.8 - 1e-12));
        assert!(grid.node_count() > 0);
    }

    #[test]
    fn empty_window_is_reported() {
        let g = Domain::upper_half_plane();
        let w = Window::new(vec![-1.0, -3.0], vec![1.0, -1.0]).unwrap();
        assert_eq!(QhGrid::build(&g, &w, 0.1, Stencil::moore()).unwrap_err(), Error::EmptyGrid { h: 0.1 });
    }

    #[test]
    fn stencil_sizes() {
        assert_eq!(Stencil::moore().offsets(2).len(), 8);
        assert_eq!(Stencil::moore().offsets(3).len(), 26);
        assert_eq!(Stencil { radius: 2 }.offsets(2).len(), 16);
        assert_eq!(Stencil { radius: 3 }.offsets(2).len(), 32);
    }

    #[test]
    fn half_plane_vertical_pair() {
        let g = Domain::upper_half_plane();
        let k = qh_distance(&g, &[0.0, 1.0], &[0.0, E], 0.01, &QhOptions::default()).unwrap();
        assert!((k.value - 1.0).abs() < 1e-2, "{k:?}");
        let exact = qh_distance_exact(&g, &[0.0, 3.0], &[0.0, 0.5]).unwrap().value;
        assert!((exact - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn identical_points() {
        let g = Domain::upper_half_plane();
        let p = qh_geodesic(&g, &[0.0, 1.0], &[0.0, 1.0], 0.05, &QhOptions::default()).unwrap();
        assert_eq!(p.total, 0.0);
        assert_eq!(p.points.len(), 1);
    }

    #[test]
    fn path_weight_is_sum_of_parts() {
        let g = Domain::punctured_plane();
        let opts = QhOptions::default();
        let p = qh_geodesic(&g, &[1.0, 0.0], &[-0.3, 0.8], 0.05, &opts).unwrap();
        let mut acc = p.snaps.0;
        for w in p.nodes.windows(2) {
            let (a, b) = (grid_pos(&p, w[0]), grid_pos(&p, w[1]));
            let len = dist(&a, &b);
            acc += len * (1.0 / norm2(&a) + 1.0 / norm2(&b)) / 2.0;
        }
        acc += p.snaps.1;
        assert!((acc - p.total).abs() < 1e-9 * p.total);
        assert_eq!(*p.cumulative.last().unwrap(), p.total);

        let k = qh_distance(&g, &[1.0, 0.0], &[-0.3, 0.8], 0.05, &opts).unwrap();
        assert_eq!(k.value, p.total);
    }

    fn grid_pos(p: &QhPath, node: usize) -> Vec<f64> {
        let i = p.nodes.iter().position(|&n| n == node).unwrap();
        p.points[i + 1].clone()
    }

    fn norm2(a: &[f64]) -> f64 {
        a.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    #[test]
    fn punctured_antipodal_pair() {
        let g = Domain::punctured_plane();
        let k = qh_distance(&g, &[1.0, 0.0], &[-1.0, 0.0], 0.02, &QhOptions::default()).unwrap();
        assert!((k.value - PI).abs() / PI < 0.02, "{k:?}");
        let exact = qh_distance_exact(&g, &[1.0, 0.0], &[-1.0, 0.0]).unwrap().value;
        assert!((exact - PI).abs() < 1e-12);
    }

    #[test]
    fn unsupported_exact_variant() {
        assert!(qh_distance_exact(&Domain::unit_disk(), &[0.0, 0.0], &[0.1, 0.0]).is_err());
    }

    #[test]
    fn multi_target_distances_agree_with_single_pairs() {
        let g = Domain::punctured_plane();
        let w = Window::centered(2, 2.5);
        let grid = QhGrid::build(&g, &w, 0.05, Stencil::default_for(2)).unwrap();
        let src = [1.0, 0.2];
        let targets: Vec<Vec<f64>> = vec![vec![-1.0, 0.5], vec![0.3, -1.2], vec![1.0, 0.2]];
        let refs: Vec<&[f64]> = targets.iter().map(|t| t.as_slice()).collect();
        let d = grid.distances_from(&src, &refs).unwrap();
        for (t, dt) in targets.iter().zip(&d) {
            let single = grid.shortest_path(&src, t).unwrap().total;
            assert!((dt.unwrap() - single).abs() < 1e-12, "{dt:?} vs {single}");
        }
    }
}
