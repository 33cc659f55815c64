//! Structural constants estimated from seeded samples.
//!
//! Every fit is a max or feasibility fold over independent per-item evaluations, so enlarging a
//! prefix-stable sample never decreases a fitted constant. Values from a finite sample are lower
//! bounds on the true optimal constants.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{add, scale, Domain, ExtendedPoint};
use crate::metrics::{
    apollonian, h_metric, j_metric, r_of_segment, r_ratio, seittenranta, Bound, Method, MetricEstimate,
};
use crate::qh::{qh_distance_exact, KBackend, QhGrid, Stencil, Window};
use crate::sampling::{PairSample, QuadSample, SampleDescriptor};

/// A metric together with the parameters needed to evaluate it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum Metric {
    Alpha { level: u32 },
    J,
    R,
    Delta { level: u32 },
    H { c: f64 },
    K { backend: KBackend },
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Alpha { .. } => "alpha",
            Metric::J => "j",
            Metric::R => "r",
            Metric::Delta { .. } => "delta",
            Metric::H { .. } => "h",
            Metric::K { .. } => "k",
        }
    }

    pub fn evaluate(&self, g: &Domain, x: &[f64], y: &[f64]) -> Result<MetricEstimate> {
        match self {
            Metric::Alpha { level } => apollonian(g, x, y, *level),
            Metric::J => j_metric(g, x, y),
            Metric::R => r_ratio(g, x, y),
            Metric::Delta { level } => seittenranta(g, x, y, *level),
            Metric::H { c } => h_metric(g, x, y, *c),
            Metric::K { backend } => backend.estimate(g, x, y),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Alpha { level } => write!(f, "alpha(level={level})"),
            Metric::Delta { level } => write!(f, "delta(level={level})"),
            Metric::H { c } => write!(f, "h(c={c})"),
            Metric::K { backend } => write!(f, "k({backend})"),
            other => write!(f, "{}", other.name()),
        }
    }
}

impl fmt::Display for KBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KBackend::Exact => write!(f, "exact"),
            KBackend::Grid { h } => write!(f, "grid(h={h})"),
            KBackend::RelativeGrid { fraction } => write!(f, "relative_grid(fraction={fraction})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    LowerBoundOnTrueConstant,
    EmpiricalEnvelope,
}

/// Inputs sufficient to reproduce a fit.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FitManifest {
    pub sample: Option<SampleDescriptor>,
    pub methods: BTreeMap<String, String>,
}

impl FitManifest {
    fn new(sample: Option<&SampleDescriptor>) -> Self {
        FitManifest { sample: sample.cloned(), methods: BTreeMap::new() }
    }

    fn with(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.methods.insert(key.to_string(), value.to_string());
        self
    }
}

/// One bin of a monotone step envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeBin {
    pub lo: f64,
    pub hi: f64,
    /// Items whose abscissa falls in this bin.
    pub count: usize,
    /// Largest ordinate among this bin's own items.
    pub raw_max: Option<f64>,
    /// Running max of `raw_max` over this and all earlier bins.
    pub value: f64,
    /// Largest abscissa among the items behind `value`.
    pub support: f64,
    /// Largest estimate gap among the items behind `value`.
    pub gap: f64,
}

/// Monotone trend of a profile as the radius decreases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Decreasing,
    Increasing,
    Constant,
    Mixed,
}

impl Trend {
    pub fn of(values: &[f64]) -> Trend {
        let (mut up, mut down) = (false, false);
        for w in values.windows(2) {
            if w[1] > w[0] {
                up = true;
            } else if w[1] < w[0] {
                down = true;
            }
        }
        match (up, down) {
            (false, false) => Trend::Constant,
            (true, false) => Trend::Increasing,
            (false, true) => Trend::Decreasing,
            (true, true) => Trend::Mixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusRatio {
    pub radius: f64,
    /// `max / min` over directions; infinite when the minimum vanishes.
    pub ratio: f64,
}

/// A pair with `α = 0` but `k > 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub index: usize,
    pub alpha: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitKind {
    /// `k <= c j + d` on every pair, with `d` minimized first.
    Uniformity { c: f64, d: f64, tight_pair: Option<usize>, max_gap: f64 },
    PhiEnvelope { bins: Vec<EnvelopeBin> },
    ARatio { sup: Option<f64>, argmax: Option<usize>, witnesses: Vec<Witness> },
    GromovDelta { delta: f64, argmax: Option<usize> },
    Isotropy { profile: Vec<RadiusRatio>, l_hat: f64, trend: Trend },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantFit {
    pub kind: FitKind,
    pub certificate: Certificate,
    /// Items that contributed to the fit.
    pub evaluated: usize,
    /// Items left out (identical points, degenerate or disconnected configurations).
    pub skipped: usize,
    pub manifest: FitManifest,
}

/// Evaluates `f` on every pair in parallel, keeping sample order and tagging errors with the
/// offending pair.
pub(crate) fn per_pair<T: Send>(
    sample: &PairSample,
    f: impl Fn(&[f64], &[f64]) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    sample
        .pairs
        .par_iter()
        .enumerate()
        .map(|(i, (x, y))| f(x, y).map_err(|e| e.at(format!("pair {i} ({x:?}, {y:?})"))))
        .collect()
}

/// Minimal `(c, d)` with `k <= c j + d` on every pair.
///
/// The additive constant is minimized first: a positive `d` is only forced by pairs with
/// `j = 0 < k`, which cannot occur since `j <= k`, so `d = 0` and `c = max k / j`. Minimizing `c`
/// first would always return `c = 0, d = max k`.
///
/// `shared` evaluates grid `k` on shared grids (see [`shared_pair_k`]); pairs the grid does not
/// connect are then skipped.
pub fn fit_uniformity(
    g: &Domain,
    sample: &PairSample,
    k: &KBackend,
    shared: Option<&PoolOptions>,
) -> Result<ConstantFit> {
    if sample.is_empty() {
        return Err(Error::rejected("uniformity fit needs at least one pair"));
    }
    let js = per_pair(sample, |x, y| Ok(j_metric(g, x, y)?.value))?;
    let ks = sample_k(g, sample, k, shared)?;
    let (mut c, mut tight, mut max_gap, mut skipped) = (0.0f64, None, 0.0f64, 0);
    for (i, (j, ke)) in js.iter().zip(&ks).enumerate() {
        let Some(ke) = ke else {
            skipped += 1;
            continue;
        };
        if *j == 0.0 {
            if ke.value > 0.0 {
                return Err(Error::NumericalFault(format!(
                    "pair {i}: j = 0 but k = {}, contradicting j <= k",
                    ke.value
                )));
            }
            skipped += 1;
            continue;
        }
        max_gap = max_gap.max(ke.gap());
        let ratio = ke.value / j;
        if tight.is_none() || ratio > c {
            c = ratio;
            tight = Some(i);
        }
    }
    Ok(ConstantFit {
        kind: FitKind::Uniformity { c, d: 0.0, tight_pair: tight, max_gap },
        certificate: Certificate::LowerBoundOnTrueConstant,
        evaluated: js.len() - skipped,
        skipped,
        manifest: FitManifest::new(Some(&sample.descriptor))
            .with("j", "exact")
            .with("k", k)
            .with("objective", "minimize d, then c"),
    })
}

/// Monotone step envelope over log-spaced bins of the abscissa. Items are `(t, value, gap)` with
/// `t > 0`.
pub(crate) fn monotone_envelope(items: &[(f64, f64, f64)], bins: usize) -> Vec<EnvelopeBin> {
    if items.is_empty() {
        return Vec::new();
    }
    let lo = items.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = items.iter().map(|p| p.0).fold(0.0, f64::max);
    let bins = if lo == hi { 1 } else { bins };
    let edge = |b: usize| {
        if b == 0 {
            lo
        } else if b == bins {
            hi
        } else {
            lo * (hi / lo).powf(b as f64 / bins as f64)
        }
    };
    let span = (hi / lo).ln();
    let mut out: Vec<EnvelopeBin> = (0..bins)
        .map(|b| EnvelopeBin {
            lo: edge(b),
            hi: edge(b + 1),
            count: 0,
            raw_max: None,
            value: 0.0,
            support: 0.0,
            gap: 0.0,
        })
        .collect();
    let mut own: Vec<(f64, f64, f64)> = vec![(f64::NEG_INFINITY, 0.0, 0.0); bins];
    for &(t, v, gap) in items {
        let mut b = if span > 0.0 {
            ((t / lo).ln() / span * bins as f64).floor() as usize
        } else {
            0
        };
        b = b.min(bins - 1);
        // keep bin membership consistent with the reported edges
        while b > 0 && t <= out[b].lo {
            b -= 1;
        }
        while b + 1 < bins && t > out[b].hi {
            b += 1;
        }
        out[b].count += 1;
        if v > own[b].0 {
            own[b] = (v, t, gap);
        }
        out[b].raw_max = Some(out[b].raw_max.map_or(v, |m: f64| m.max(v)));
    }
    let (mut run, mut support, mut gap) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for (b, bin) in out.iter_mut().enumerate() {
        if own[b].0 > run {
            run = own[b].0;
        }
        if bin.count > 0 {
            support = support.max(own[b].1);
            gap = gap.max(own[b].2);
        }
        bin.value = run.max(0.0);
        bin.support = support;
        bin.gap = gap;
    }
    out
}

/// Empirical `φ`: running max of `k` over pairs binned by `r_G`.
pub fn phi_envelope(
    g: &Domain,
    sample: &PairSample,
    k: &KBackend,
    bins: usize,
    shared: Option<&PoolOptions>,
) -> Result<ConstantFit> {
    if bins < 4 {
        return Err(Error::rejected("phi envelope needs at least 4 bins"));
    }
    let rs = per_pair(sample, |x, y| Ok(r_ratio(g, x, y)?.value))?;
    let ks = sample_k(g, sample, k, shared)?;
    let values: Vec<Option<(f64, f64, f64)>> = sample
        .pairs
        .iter()
        .zip(rs.iter().zip(&ks))
        .map(|((x, y), (r, ke))| match ke {
            Some(ke) if x != y => Some((*r, ke.value, ke.gap())),
            _ => None,
        })
        .collect();
    let items: Vec<(f64, f64, f64)> = values.iter().flatten().copied().collect();
    Ok(ConstantFit {
        evaluated: items.len(),
        skipped: values.len() - items.len(),
        kind: FitKind::PhiEnvelope { bins: monotone_envelope(&items, bins) },
        certificate: Certificate::EmpiricalEnvelope,
        manifest: FitManifest::new(Some(&sample.descriptor)).with("r", "exact").with("k", k),
    })
}

/// `sup k / α` over pairs with `α > 0`; pairs with `α = 0 < k` are listed as witnesses that no
/// finite ratio exists.
pub fn a_uniformity_ratio(
    g: &Domain,
    sample: &PairSample,
    k: &KBackend,
    alpha_level: u32,
) -> Result<ConstantFit> {
    let exact = matches!(
        g.kind(),
        crate::geometry::DomainKind::HalfSpace { .. }
            | crate::geometry::DomainKind::Ball { .. }
            | crate::geometry::DomainKind::Punctured { .. }
    );
    if !exact && alpha_level < 6 {
        return Err(Error::rejected("sampled alpha needs level >= 6 for the A-uniformity ratio"));
    }
    let values = per_pair(sample, |x, y| {
        if x == y {
            return Ok(None);
        }
        Ok(Some((apollonian(g, x, y, alpha_level)?.value, k.estimate(g, x, y)?.value)))
    })?;
    let (mut sup, mut argmax, mut witnesses, mut skipped) = (None::<f64>, None, Vec::new(), 0);
    for (i, v) in values.iter().enumerate() {
        let Some((alpha, kv)) = *v else {
            skipped += 1;
            continue;
        };
        if alpha == 0.0 {
            if kv > 0.0 {
                witnesses.push(Witness { index: i, alpha, k: kv });
            } else {
                skipped += 1;
            }
            continue;
        }
        let ratio = kv / alpha;
        if sup.is_none_or(|s| ratio > s) {
            sup = Some(ratio);
            argmax = Some(i);
        }
    }
    Ok(ConstantFit {
        kind: FitKind::ARatio { sup, argmax, witnesses },
        certificate: Certificate::LowerBoundOnTrueConstant,
        evaluated: values.len() - skipped,
        skipped,
        manifest: FitManifest::new(Some(&sample.descriptor))
            .with("alpha", format!("level={alpha_level}"))
            .with("k", k),
    })
}

/// Grid settings for pooled `k` evaluations.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PoolOptions {
    /// Grid window; defaults to the sample window (or the box hull of the points) inflated by
    /// half its extent and clipped to bounded domains.
    pub window: Option<Window>,
    pub stencil: Option<Stencil>,
}

fn resolve_h(g: &Domain, points: &[Vec<f64>], k: &KBackend) -> Result<f64> {
    match k {
        KBackend::Grid { h } => Ok(*h),
        KBackend::RelativeGrid { fraction } => {
            let mut dmin = f64::INFINITY;
            for p in points {
                dmin = dmin.min(g.dist_to_boundary(p)?);
            }
            Ok(fraction * dmin)
        }
        KBackend::Exact => Err(Error::rejected("the exact backend has no grid resolution")),
    }
}

fn shared_window(g: &Domain, points: &[Vec<f64>], base: Option<&Window>, opts: &PoolOptions) -> Window {
    if let Some(w) = &opts.window {
        return w.clone();
    }
    let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
    let hull = base.cloned().unwrap_or_else(|| Window::around(&refs, 0.0));
    let extent = hull.lo.iter().zip(&hull.hi).map(|(l, u)| u - l).fold(0.0, f64::max);
    let mut w = Window::around(&[&hull.lo, &hull.hi], extent / 2.0);
    w.clip_to(g);
    w
}

/// Grid `k` for index pairs into `points` on one shared grid, one search per distinct source.
fn grid_k_on_pairs(grid: &QhGrid, points: &[Vec<f64>], pairs: &[(usize, usize)]) -> Result<Vec<Option<f64>>> {
    let mut by_source: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in pairs {
        if a != b {
            let (s, t) = (a.min(b), a.max(b));
            by_source.entry(s).or_default().push(t);
        }
    }
    let sources: Vec<(usize, Vec<usize>)> = by_source
        .into_iter()
        .map(|(s, mut t)| {
            t.sort_unstable();
            t.dedup();
            (s, t)
        })
        .collect();
    let found: Vec<Vec<Option<f64>>> = sources
        .par_iter()
        .map(|(s, ts)| {
            let targets: Vec<&[f64]> = ts.iter().map(|&t| points[t].as_slice()).collect();
            grid.distances_from(&points[*s], &targets)
        })
        .collect::<Result<_>>()?;
    let mut table: BTreeMap<(usize, usize), Option<f64>> = BTreeMap::new();
    for ((s, ts), vals) in sources.iter().zip(found) {
        for (t, v) in ts.iter().zip(vals) {
            table.insert((*s, *t), v);
        }
    }
    Ok(pairs
        .iter()
        .map(|&(a, b)| if a == b { Some(0.0) } else { table[&(a.min(b), a.max(b))] })
        .collect())
}

/// All pairwise `k` values among `points`, `None` where the grid does not connect a pair.
/// Grid backends share one grid and run one search per point.
pub fn pairwise_k(
    g: &Domain,
    points: &[Vec<f64>],
    k: &KBackend,
    base_window: Option<&Window>,
    opts: &PoolOptions,
) -> Result<Vec<Vec<Option<f64>>>> {
    let n = points.len();
    let mut m = vec![vec![Some(0.0); n]; n];
    if n < 2 {
        return Ok(m);
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let values: Vec<Option<f64>> = match k {
        KBackend::Exact => pairs
            .par_iter()
            .map(|&(i, j)| qh_distance_exact(g, &points[i], &points[j]).map(|e| Some(e.value)))
            .collect::<Result<_>>()?,
        _ => {
            let h = resolve_h(g, points, k)?;
            let window = shared_window(g, points, base_window, opts);
            let stencil = opts.stencil.unwrap_or(Stencil::default_for(g.dim()));
            grid_k_on_pairs(&QhGrid::build(g, &window, h, stencil)?, points, &pairs)?
        }
    };
    for (&(i, j), v) in pairs.iter().zip(values) {
        m[i][j] = v;
        m[j][i] = v;
    }
    Ok(m)
}

/// `k` on every pair of a sample with one shared grid per resolution instead of a grid per pair.
/// Grid backends evaluate at `h` and `h/2` and report the difference as the gap; `None` marks
/// pairs the grid does not connect. The exact backend evaluates pair by pair.
pub fn shared_pair_k(
    g: &Domain,
    sample: &PairSample,
    k: &KBackend,
    opts: &PoolOptions,
) -> Result<Vec<Option<MetricEstimate>>> {
    if matches!(k, KBackend::Exact) {
        return per_pair(sample, |x, y| k.estimate(g, x, y).map(Some));
    }
    let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut id = |p: &[f64]| -> usize {
        let key: Vec<u64> = p.iter().map(|c| c.to_bits()).collect();
        *index.entry(key).or_insert_with(|| {
            points.push(p.to_vec());
            points.len() - 1
        })
    };
    let pairs: Vec<(usize, usize)> = sample.pairs.iter().map(|(x, y)| (id(x), id(y))).collect();
    let h = resolve_h(g, &points, k)?;
    let window = shared_window(g, &points, sample.descriptor.window.as_ref(), opts);
    let stencil = opts.stencil.unwrap_or(Stencil::default_for(g.dim()));
    let coarse = grid_k_on_pairs(&QhGrid::build(g, &window, h, stencil)?, &points, &pairs)?;
    let fine = grid_k_on_pairs(&QhGrid::build(g, &window, h / 2.0, stencil)?, &points, &pairs)?;
    Ok(coarse
        .into_iter()
        .zip(fine)
        .zip(&pairs)
        .map(|((c, f), &(a, b))| match (c, f) {
            _ if a == b => Some(MetricEstimate::exact(0.0)),
            (Some(c), Some(f)) => Some(MetricEstimate {
                value: c,
                method: Method::Grid { h },
                bound: Bound::TwoSided { gap: (c - f).abs() },
                pseudometric: false,
            }),
            _ => None,
        })
        .collect())
}

/// `k` estimates for a sample: pair by pair when `shared` is `None`, otherwise through
/// [`shared_pair_k`].
fn sample_k(
    g: &Domain,
    sample: &PairSample,
    k: &KBackend,
    shared: Option<&PoolOptions>,
) -> Result<Vec<Option<MetricEstimate>>> {
    match shared {
        Some(opts) => shared_pair_k(g, sample, k, opts),
        None => per_pair(sample, |x, y| k.estimate(g, x, y).map(Some)),
    }
}

/// Max over orderings of `min((x|y)_w, (y|z)_w) - (x|z)_w` for four points: half the gap
/// between the two largest of the pair sums `d(x,y)+d(z,w)`, `d(x,z)+d(y,w)`, `d(x,w)+d(y,z)`.
fn four_point(d: &dyn Fn(usize, usize) -> f64, x: usize, y: usize, z: usize, w: usize) -> f64 {
    let mut sums = [d(x, y) + d(z, w), d(x, z) + d(y, w), d(x, w) + d(y, z)];
    sums.sort_by(|a, b| b.total_cmp(a));
    (sums[0] - sums[1]) / 2.0
}

/// Four-point Gromov hyperbolicity estimate: the max over sampled quadruples, in every
/// ordering, of `min((x|y)_w, (y|z)_w) - (x|z)_w`, floored at 0.
pub fn gromov_delta_4pt(
    g: &Domain,
    quads: &QuadSample,
    k: &KBackend,
    opts: &PoolOptions,
) -> Result<ConstantFit> {
    // pool the distinct points; quadruples refer to pool indices
    let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut pool: Vec<Vec<f64>> = Vec::new();
    let mut qidx: Vec<[usize; 4]> = Vec::with_capacity(quads.len());
    for (qi, q) in quads.quads.iter().enumerate() {
        let mut ids = [0usize; 4];
        for (slot, p) in q.iter().enumerate() {
            let p = p.as_finite().ok_or_else(|| {
                Error::rejected(format!("quadruple {qi} contains ∞; Gromov products need interior points"))
            })?;
            if !g.contains(p) {
                return Err(Error::rejected(format!("quadruple {qi}: {p:?} is not in the domain")));
            }
            let key: Vec<u64> = p.iter().map(|c| c.to_bits()).collect();
            ids[slot] = *index.entry(key).or_insert_with(|| {
                pool.push(p.to_vec());
                pool.len() - 1
            });
        }
        qidx.push(ids);
    }
    let mut needed: Vec<(usize, usize)> = qidx
        .iter()
        .flat_map(|ids| {
            (0..4).flat_map(move |a| ((a + 1)..4).map(move |b| (ids[a].min(ids[b]), ids[a].max(ids[b]))))
        })
        .filter(|(a, b)| a != b)
        .collect();
    needed.sort_unstable();
    needed.dedup();
    let values: Vec<Option<f64>> = match k {
        KBackend::Exact => needed
            .par_iter()
            .map(|&(a, b)| qh_distance_exact(g, &pool[a], &pool[b]).map(|e| Some(e.value)))
            .collect::<Result<_>>()?,
        _ => {
            let h = resolve_h(g, &pool, k)?;
            let window = shared_window(g, &pool, quads.descriptor.window.as_ref(), opts);
            let stencil = opts.stencil.unwrap_or(Stencil::default_for(g.dim()));
            grid_k_on_pairs(&QhGrid::build(g, &window, h, stencil)?, &pool, &needed)?
        }
    };
    let table: BTreeMap<(usize, usize), Option<f64>> = needed.into_iter().zip(values).collect();
    let lookup = |a: usize, b: usize| if a == b { Some(0.0) } else { table[&(a.min(b), a.max(b))] };
    let (mut delta, mut argmax, mut skipped) = (0.0f64, None, 0);
    for (qi, &[x, y, z, w]) in qidx.iter().enumerate() {
        let ids = [x, y, z, w];
        let connected = ids.iter().all(|&a| ids.iter().all(|&b| lookup(a, b).is_some()));
        if !connected {
            skipped += 1;
            continue;
        }
        let d = |a: usize, b: usize| lookup(a, b).unwrap();
        let v = four_point(&d, x, y, z, w);
        if v > delta || (argmax.is_none() && v >= delta) {
            delta = v.max(0.0);
            argmax = Some(qi);
        }
    }
    Ok(ConstantFit {
        kind: FitKind::GromovDelta { delta, argmax },
        certificate: Certificate::LowerBoundOnTrueConstant,
        evaluated: qidx.len() - skipped,
        skipped,
        manifest: FitManifest::new(Some(&quads.descriptor))
            .with("k", k)
            .with("pool", pool.len()),
    })
}

/// `m` unit directions: equally spaced angles in the plane, a Fibonacci lattice on the sphere.
pub fn directions(dim: usize, m: usize) -> Result<Vec<Vec<f64>>> {
    match dim {
        2 => Ok((0..m)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / m as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            Ok((0..m)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect())
        }
        _ => Err(Error::Unsupported(format!("direction sets in dimension {dim}"))),
    }
}

/// Checks `radii` are positive, strictly decreasing and below `d_G(x) / 2`.
pub(crate) fn check_radii(g: &Domain, x: &[f64], radii: &[f64]) -> Result<()> {
    let dx = g.dist_to_boundary(x)?;
    if radii.is_empty() {
        return Err(Error::rejected("radius list is empty"));
    }
    for (i, &r) in radii.iter().enumerate() {
        if !(r > 0.0 && r < dx / 2.0) {
            return Err(Error::rejected(format!("radius {r} must lie in (0, d_G(x)/2 = {})", dx / 2.0)));
        }
        if i > 0 && r >= radii[i - 1] {
            return Err(Error::rejected("radii must be strictly decreasing"));
        }
    }
    Ok(())
}

/// Max/min of `values`, infinite when the minimum is 0 and the maximum is not.
pub(crate) fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(0.0, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        1.0
    } else if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Directional spread of `α(x, x + r e)` over `m` directions for each radius.
pub fn quasi_isotropy(
    g: &Domain,
    x: &[f64],
    radii: &[f64],
    m: usize,
    alpha_level: u32,
) -> Result<ConstantFit> {
    if m < 8 {
        return Err(Error::rejected("quasi-isotropy needs at least 8 directions"));
    }
    check_radii(g, x, radii)?;
    let dirs = directions(g.dim(), m)?;
    let profile: Vec<RadiusRatio> = radii
        .iter()
        .map(|&r| {
            let values: Vec<f64> = dirs
                .par_iter()
                .map(|e| Ok(apollonian(g, x, &add(x, &scale(e, r)), alpha_level)?.value))
                .collect::<Result<_>>()?;
            Ok(RadiusRatio { radius: r, ratio: spread(&values) })
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = profile.iter().map(|p| p.ratio).collect();
    Ok(ConstantFit {
        kind: FitKind::Isotropy {
            l_hat: *ratios.last().unwrap(),
            trend: Trend::of(&ratios),
            profile,
        },
        certificate: Certificate::EmpiricalEnvelope,
        evaluated: radii.len() * m,
        skipped: 0,
        manifest: FitManifest::new(None)
            .with("alpha", format!("level={alpha_level}"))
            .with("directions", m)
            .with("point", format!("{x:?}")),
    })
}

/// Relative size and quasihyperbolic diameter of a polyline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaturalReport {
    /// `max r_G` over pairs of sample points of the polyline.
    pub r: f64,
    /// `max k` over pairs of sample points of the polyline.
    pub k: f64,
    /// Points used on the polyline (vertices plus subdivisions).
    pub points: usize,
    /// Pairs the grid did not connect.
    pub disconnected: usize,
}

/// Reports `(r_G(A), k_G(A))` for the polyline `A`, both as sups over pairs of `subdivisions`
/// points per edge.
pub fn natural_check(
    g: &Domain,
    polyline: &[Vec<f64>],
    subdivisions: usize,
    k: &KBackend,
    opts: &PoolOptions,
) -> Result<NaturalReport> {
    if polyline.is_empty() {
        return Err(Error::rejected("polyline needs at least one vertex"));
    }
    for (i, w) in polyline.windows(2).enumerate() {
        r_of_segment(g, &w[0], &w[1]).map_err(|e| e.at(format!("edge {i}")))?;
    }
    for p in polyline {
        g.dist_to_boundary(p)?;
    }
    let mut points = vec![polyline[0].clone()];
    for w in polyline.windows(2) {
        let n = subdivisions.max(1);
        for s in 1..=n {
            points.push(crate::geometry::lerp(&w[0], &w[1], s as f64 / n as f64));
        }
    }
    let mut r = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            r = r.max(r_ratio(g, &points[i], &points[j])?.value);
        }
    }
    let matrix = pairwise_k(g, &points, k, None, opts)?;
    let (mut kmax, mut disconnected) = (0.0f64, 0);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            match matrix[i][j] {
                Some(v) => kmax = kmax.max(v),
                None => disconnected += 1,
            }
        }
    }
    Ok(NaturalReport { r, k: kmax, points: points.len(), disconnected })
}

/// Cross ratio `|a,b,c,d|` of a quadruple, or `None` for degenerate quadruples.
pub(crate) fn quad_ratio(q: &[ExtendedPoint; 4]) -> Option<f64> {
    crate::geometry::cross_ratio(&q[0], &q[1], &q[2], &q[3])
        .ok()
        .filter(|t| *t > 0.0 && t.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn hp_window() -> Window {
        Window::new(vec![-10.0, 0.0], vec![10.0, 10.0]).unwrap()
    }

    #[test]
    fn uniformity_single_tight_pair() {
        // vertical pair in the half-plane: k = j = 1
        let g = Domain::upper_half_plane();
        let s = PairSample::explicit(&g, vec![(vec![0.0, 1.0], vec![0.0, E])]).unwrap();
        let fit = fit_uniformity(&g, &s, &KBackend::Exact, None).unwrap();
        let FitKind::Uniformity { c, d, tight_pair, .. } = fit.kind else { panic!() };
        assert!((c - 1.0).abs() < 1e-12);
        assert_eq!(d, 0.0);
        assert_eq!(tight_pair, Some(0));
    }

    #[test]
    fn uniformity_is_tight_and_feasible() {
        let g = Domain::upper_half_plane();
        let s = PairSample::uniform(&g, &hp_window(), 1, 300, 0.0).unwrap();
        let fit = fit_uniformity(&g, &s, &KBackend::Exact, None).unwrap();
        let FitKind::Uniformity { c, d, tight_pair, .. } = fit.kind else { panic!() };
        let mut min_slack = f64::INFINITY;
        for (x, y) in &s.pairs {
            let j = j_metric(&g, x, y).unwrap().value;
            let k = qh_distance_exact(&g, x, y).unwrap().value;
            let slack = c * j + d - k;
            assert!(slack >= -1e-12);
            min_slack = min_slack.min(slack);
        }
        assert!(min_slack.abs() < 1e-12);
        assert!(tight_pair.is_some());
    }

    #[test]
    fn uniformity_skips_identical_pair() {
        let g = Domain::upper_half_plane();
        let s = PairSample::explicit(&g, vec![(vec![0.0, 1.0], vec![0.0, 1.0])]).unwrap();
        let fit = fit_uniformity(&g, &s, &KBackend::Exact, None).unwrap();
        assert_eq!(fit.skipped, 1);
    }

    #[test]
    fn envelope_single_item() {
        let bins = monotone_envelope(&[(0.5, 2.0, 0.0)], 8);
        assert_eq!(bins.len(), 1);
        assert_eq!((bins[0].lo, bins[0].hi, bins[0].value), (0.5, 0.5, 2.0));
    }

    #[test]
    fn envelope_is_monotone_and_counts_items() {
        let items: Vec<(f64, f64, f64)> =
            (1..200).map(|i| (i as f64 * 0.05, ((i * 37) % 11) as f64, 0.0)).collect();
        let bins = monotone_envelope(&items, 16);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), items.len());
        assert!(bins.windows(2).all(|w| w[0].value <= w[1].value));
        for b in &bins {
            for it in &items {
                if it.0 <= b.hi {
                    assert!(it.1 <= b.value);
                }
            }
        }
    }

    #[test]
    fn phi_envelope_half_plane() {
        let g = Domain::upper_half_plane();
        let s = PairSample::uniform(&g, &hp_window(), 2, 1000, 0.0).unwrap();
        let fit = phi_envelope(&g, &s, &KBackend::Exact, 16, None).unwrap();
        let FitKind::PhiEnvelope { bins } = fit.kind else { panic!() };
        assert_eq!(bins.len(), 16);
        assert!(bins.windows(2).all(|w| w[0].value <= w[1].value));
        assert!(phi_envelope(&g, &s, &KBackend::Exact, 3, None).is_err());
    }

    #[test]
    fn a_ratio_vertical_pairs() {
        let g = Domain::upper_half_plane();
        let pairs = vec![
            (vec![0.0, 1.0], vec![0.0, 3.0]),
            (vec![2.0, 0.5], vec![2.0, 7.0]),
            (vec![1.0, 1.0], vec![1.0, 1.0]),
        ];
        let s = PairSample::explicit(&g, pairs).unwrap();
        let fit = a_uniformity_ratio(&g, &s, &KBackend::Exact, 0).unwrap();
        let FitKind::ARatio { sup, witnesses, .. } = fit.kind else { panic!() };
        assert!((sup.unwrap() - 1.0).abs() < 1e-12);
        assert!(witnesses.is_empty());
        assert_eq!(fit.skipped, 1);
    }

    #[test]
    fn a_ratio_punctured_witness() {
        let g = Domain::punctured_plane();
        let s = PairSample::explicit(&g, vec![(vec![1.0, 0.0], vec![-1.0, 0.0])]).unwrap();
        let fit = a_uniformity_ratio(&g, &s, &KBackend::Exact, 0).unwrap();
        let FitKind::ARatio { sup, witnesses, .. } = fit.kind else { panic!() };
        assert_eq!(sup, None);
        assert_eq!(witnesses.len(), 1);
        assert!((witnesses[0].k - PI).abs() < 1e-12);
    }

    #[test]
    fn four_point_is_the_max_over_orderings() {
        let g = Domain::upper_half_plane();
        let pts = [vec![0.0, 1.0], vec![3.0, 2.0], vec![-1.0, 0.3], vec![0.5, 5.0]];
        let d = |a: usize, b: usize| qh_distance_exact(&g, &pts[a], &pts[b]).unwrap().value;
        let gromov = |x: usize, y: usize, z: usize, w: usize| {
            let gp = |a: usize, b: usize| (d(a, w) + d(b, w) - d(a, b)) / 2.0;
            gp(x, y).min(gp(y, z)) - gp(x, z)
        };
        let mut best = f64::NEG_INFINITY;
        for x in 0..4 {
            for y in 0..4 {
                for z in 0..4 {
                    for w in 0..4 {
                        if [x, y, z, w].iter().collect::<std::collections::BTreeSet<_>>().len() == 4 {
                            best = best.max(gromov(x, y, z, w));
                        }
                    }
                }
            }
        }
        assert!((four_point(&d, 0, 1, 2, 3) - best).abs() < 1e-12);
        // a repeated point makes the two largest sums equal
        assert!(four_point(&d, 0, 0, 1, 2).abs() < 1e-12);
    }

    #[test]
    fn gromov_half_plane_exact_is_bounded() {
        let g = Domain::upper_half_plane();
        let q = QuadSample::uniform(&g, &hp_window(), 5, 2000, 0.0).unwrap();
        let fit = gromov_delta_4pt(&g, &q, &KBackend::Exact, &PoolOptions::default()).unwrap();
        let FitKind::GromovDelta { delta, .. } = fit.kind else { panic!() };
        assert!(delta > 0.0 && delta < 2f64.ln() + 1e-9, "{delta}");
    }

    #[test]
    fn pairwise_grid_matches_exact_loosely() {
        let g = Domain::punctured_plane();
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.2], vec![0.3, 1.5]];
        let w = Window::centered(2, 3.0);
        let grid = pairwise_k(&g, &pts, &KBackend::Grid { h: 0.02 }, Some(&w), &PoolOptions::default()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let exact = qh_distance_exact(&g, &pts[i], &pts[j]).unwrap().value;
                let v = grid[i][j].unwrap();
                assert!((v - exact).abs() <= 0.02 * exact.max(1e-9), "{i}{j}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn isotropy_half_plane_tends_to_one() {
        let g = Domain::upper_half_plane();
        let fit = quasi_isotropy(&g, &[0.0, 1.0], &[0.4, 0.1, 0.01], 32, 0).unwrap();
        let FitKind::Isotropy { profile, l_hat, trend } = fit.kind else { panic!() };
        assert_eq!(trend, Trend::Decreasing);
        assert!(profile.iter().all(|p| p.ratio >= 1.0));
        assert!(l_hat < 1.02, "{l_hat}");
        assert!(quasi_isotropy(&g, &[0.0, 1.0], &[0.6], 32, 0).is_err());
        assert!(quasi_isotropy(&g, &[0.0, 1.0], &[0.1], 4, 0).is_err());
    }

    #[test]
    fn isotropy_punctured_is_finite() {
        let g = Domain::punctured_plane();
        let fit = quasi_isotropy(&g, &[1.0, 0.0], &[0.01], 32, 0).unwrap();
        let FitKind::Isotropy { l_hat, .. } = fit.kind else { panic!() };
        assert!(l_hat.is_finite() && l_hat > 1.0);
    }

    #[test]
    fn natural_single_point_and_nesting() {
        let g = Domain::upper_half_plane();
        let opts = PoolOptions::default();
        let single = natural_check(&g, &[vec![0.0, 1.0]], 4, &KBackend::Exact, &opts).unwrap();
        assert_eq!((single.r, single.k), (0.0, 0.0));
        let a = natural_check(&g, &[vec![0.0, 1.0], vec![1.0, 1.0]], 4, &KBackend::Exact, &opts).unwrap();
        let b = natural_check(&g, &[vec![0.0, 1.0], vec![2.0, 1.0]], 8, &KBackend::Exact, &opts).unwrap();
        assert!(a.r <= b.r && a.k <= b.k);
        assert!(natural_check(&g, &[vec![0.0, 1.0], vec![0.0, -1.0]], 4, &KBackend::Exact, &opts).is_err());
    }
}
