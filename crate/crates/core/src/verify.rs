//! Inequality suites run against the fixture domains.
//!
//! Each check reports the number of evaluated items, the number of violations and the
//! smallest slack observed (negative when violated).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{a_uniformity_ratio, per_pair, FitKind};
use crate::geometry::{cross_ratio, dist, Domain, ExtendedPoint};
use crate::maps::{apply_finite, apply_map, estimate_qm_theta, estimate_rough_bilipschitz, DistortionKind, MapSpec};
use crate::metrics::{apollonian, h_metric, j_metric, r_of_segment, r_ratio, seittenranta_sup_over};
use crate::qh::{qh_distance, qh_distance_exact, KBackend, QhOptions, Window};
use crate::sampling::{PairSample, QuadSample};
use crate::estimators::Metric;

/// Relative tolerance for comparisons between closed-form values, which can differ by
/// rounding even when the inequality is an identity.
pub const ROUNDING_TOL: f64 = 1e-12;

pub const SUITES: [&str; 4] = ["sandwich", "lemma32", "segment", "mobius_invariance"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub suite: String,
    pub fixture: String,
    pub check: String,
    pub evaluated: usize,
    pub violations: usize,
    /// Smallest slack `rhs - lhs` over the evaluated items.
    pub margin: f64,
    pub detail: String,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Pairs per fixture for the global checks.
    pub count: usize,
    /// Pairs per fixture for the local and segment checks.
    pub local_count: usize,
    /// Quadruples for the cross-ratio checks.
    pub quad_count: usize,
    /// Boundary levels for the refinement checks.
    pub levels: Vec<u32>,
    /// Grid resolution for `k` on domains without a closed form.
    pub grid_h: f64,
    /// Pairs closer than this to the boundary are left out of grid `k` checks.
    pub grid_margin: f64,
    /// Relative grid resolution for the local checks.
    pub local_fraction: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 1,
            count: 1000,
            local_count: 500,
            quad_count: 10_000,
            levels: vec![4, 5, 6, 7, 8],
            grid_h: 0.01,
            grid_margin: 0.05,
            local_fraction: 0.1,
        }
    }
}

/// Fixture domains with their sampling windows.
pub fn fixtures() -> Vec<(&'static str, Domain, Window)> {
    vec![
        ("half_plane", Domain::upper_half_plane(), Window::new(vec![-10.0, 0.0], vec![10.0, 10.0]).unwrap()),
        ("unit_disk", Domain::unit_disk(), Window::centered(2, 1.0)),
        ("punctured_plane", Domain::punctured_plane(), Window::centered(2, 3.0)),
    ]
}

fn has_exact_k(g: &Domain) -> bool {
    qh_distance_exact(g, &[0.0, 1.0], &[0.0, 2.0]).is_ok()
}

/// Accumulates slack values into a check row.
struct Tally {
    evaluated: usize,
    violations: usize,
    margin: f64,
}

impl Tally {
    fn new() -> Self {
        Tally { evaluated: 0, violations: 0, margin: f64::INFINITY }
    }

    /// Records `lhs <= rhs` with a tolerance relative to the magnitudes involved.
    fn le(&mut self, lhs: f64, rhs: f64, tol: f64) {
        self.evaluated += 1;
        let slack = rhs - lhs;
        self.margin = self.margin.min(slack);
        if slack < -tol * lhs.abs().max(rhs.abs()).max(1.0) {
            self.violations += 1;
        }
    }

    fn row(&self, suite: &str, fixture: &str, check: &str, detail: impl Into<String>) -> CheckRow {
        CheckRow {
            suite: suite.to_string(),
            fixture: fixture.to_string(),
            check: check.to_string(),
            evaluated: self.evaluated,
            violations: self.violations,
            margin: if self.evaluated == 0 { 0.0 } else { self.margin },
            detail: detail.into(),
        }
    }
}

struct PairValues {
    j: f64,
    alpha: f64,
    k: Option<(f64, f64)>,
    min_d: f64,
}

fn one_sided_bounds(
    suite: &str,
    name: &str,
    g: &Domain,
    s: &PairSample,
    cfg: &VerifyConfig,
) -> Result<Vec<CheckRow>> {
    let exact_k = has_exact_k(g);
    let values = per_pair(s, |x, y| {
        let min_d = g.dist_to_boundary(x)?.min(g.dist_to_boundary(y)?);
        let k = if exact_k {
            let v = qh_distance_exact(g, x, y)?.value;
            Some((v, 0.0))
        } else if min_d >= cfg.grid_margin {
            let e = qh_distance(g, x, y, cfg.grid_h, &QhOptions::default())?;
            Some((e.value, e.gap()))
        } else {
            None
        };
        Ok(PairValues { j: j_metric(g, x, y)?.value, alpha: apollonian(g, x, y, 0)?.value, k, min_d })
    })?;
    let (mut half, mut log3, mut jk) = (Tally::new(), Tally::new(), Tally::new());
    let mut skipped = 0;
    for v in &values {
        half.le(v.alpha / 2.0, v.j, ROUNDING_TOL);
        log3.le(v.j, v.alpha + 3f64.ln(), ROUNDING_TOL);
        match v.k {
            Some((k, gap)) => jk.le(v.j, k + gap, ROUNDING_TOL),
            None => skipped += 1,
        }
        debug_assert!(v.min_d > 0.0);
    }
    let kdesc = if exact_k {
        "k exact".to_string()
    } else {
        format!("k grid h={} with one refinement; {skipped} pairs with d_G < {} left out", cfg.grid_h, cfg.grid_margin)
    };
    Ok(vec![
        half.row(suite, name, "alpha/2 <= j", "alpha exact"),
        log3.row(suite, name, "j <= alpha + log 3", "alpha exact"),
        jk.row(suite, name, "j <= k + gap", kdesc),
    ])
}

fn sandwich_suite(cfg: &VerifyConfig) -> Result<Vec<CheckRow>> {
    let suite = "sandwich";
    let mut rows = Vec::new();
    for (name, g, w) in fixtures() {
        let s = PairSample::uniform(&g, &w, cfg.seed, cfg.count, 0.0)?;
        for c in [2.0, 5.0, 10.0] {
            let vals = per_pair(&s, |x, y| Ok((j_metric(&g, x, y)?.value, h_metric(&g, x, y, c)?.value)))?;
            let (mut lo, mut hi) = (Tally::new(), Tally::new());
            for (j, h) in vals {
                lo.le(c / (2.0 * (1.0 + c)) * j, h, ROUNDING_TOL);
                hi.le(h, c * j, ROUNDING_TOL);
            }
            rows.push(lo.row(suite, name, &format!("c/(2(1+c)) j <= h_c, c={c}"), "exact"));
            rows.push(hi.row(suite, name, &format!("h_c <= c j, c={c}"), "exact"));
        }
        rows.extend(one_sided_bounds(suite, name, &g, &s, cfg)?);
        rows.extend(seittenranta_checks(name, &g, &s, cfg)?);
    }
    Ok(rows)
}

/// Both Seittenranta sandwiches. The punctured plane's two-point boundary makes the sampled
/// value exact at every level; elsewhere the sampled value is a lower bound, so the upper
/// sides are checked at every level and the lower sides must improve under refinement.
fn seittenranta_checks(name: &str, g: &Domain, s: &PairSample, cfg: &VerifyConfig) -> Result<Vec<CheckRow>> {
    let suite = "sandwich";
    let base = per_pair(s, |x, y| Ok((j_metric(g, x, y)?.value, apollonian(g, x, y, 0)?.value)))?;
    let exact = matches!(g.kind(), crate::geometry::DomainKind::Punctured { .. });
    let levels: Vec<u32> = if exact { vec![0] } else { cfg.levels.clone() };
    let mut upper1 = Tally::new();
    let mut upper2 = Tally::new();
    let mut lower_by_level: Vec<(u32, Tally, Tally)> = Vec::new();
    for &level in &levels {
        let sample = g.sample_boundary(level)?;
        let deltas: Vec<f64> = s
            .pairs
            .par_iter()
            .map(|(x, y)| seittenranta_sup_over(&sample, x, y).ln_1p())
            .collect();
        let (mut l1, mut l2) = (Tally::new(), Tally::new());
        for (&(j, alpha), &delta) in base.iter().zip(&deltas) {
            upper1.le(delta, 2.0 * j, ROUNDING_TOL);
            upper2.le(delta, (alpha.exp() + 2.0).ln(), ROUNDING_TOL);
            l1.le(j, delta, ROUNDING_TOL);
            l2.le(alpha, delta, ROUNDING_TOL);
        }
        lower_by_level.push((level, l1, l2));
    }
    let mut rows = vec![
        upper1.row(suite, name, "delta <= 2j", format!("levels {levels:?}")),
        upper2.row(suite, name, "delta <= log(e^alpha + 2)", format!("levels {levels:?}")),
    ];
    for (idx, check) in [(0, "j <= delta"), (1, "alpha <= delta")] {
        let tallies: Vec<&Tally> = lower_by_level
            .iter()
            .map(|(_, a, b)| if idx == 0 { a } else { b })
            .collect();
        if exact {
            rows.push(tallies[0].row(suite, name, check, "delta exact"));
            continue;
        }
        // violation margin per level: how far the worst pair falls short
        let shortfall: Vec<f64> = tallies.iter().map(|t| (-t.margin).max(0.0)).collect();
        let monotone = shortfall.windows(2).all(|w| w[1] <= w[0]);
        let last = tallies.last().unwrap();
        rows.push(CheckRow {
            suite: suite.to_string(),
            fixture: name.to_string(),
            check: format!("{check} (shortfall non-increasing over levels)"),
            evaluated: last.evaluated,
            violations: usize::from(!monotone),
            margin: last.margin,
            detail: format!(
                "levels {:?}, shortfall {:?}, pairs short at final level {}",
                levels,
                shortfall,
                last.violations
            ),
        });
    }
    Ok(rows)
}

fn local_bounds_suite(cfg: &VerifyConfig) -> Result<Vec<CheckRow>> {
    let suite = "lemma32";
    let mut rows = Vec::new();
    for (name, g, w) in fixtures() {
        let s = PairSample::uniform(&g, &w, cfg.seed, cfg.count, 0.0)?;
        rows.extend(one_sided_bounds(suite, name, &g, &s, cfg)?);
        rows.extend(local_bounds(suite, name, &g, &w, cfg)?);
    }
    rows.extend(punctured_counterexample(suite)?);
    Ok(rows)
}

/// Bounds for `|x - y| <= d_G(x)/2`: `|x-y|/(2 d_G(x)) <= k <= 2|x-y|/d_G(x)`, checked with
/// grid `k` widened by its refinement gap.
pub fn local_bounds(suite: &str, name: &str, g: &Domain, w: &Window, cfg: &VerifyConfig) -> Result<Vec<CheckRow>> {
    let s = PairSample::local(g, w, cfg.seed, cfg.local_count, 0.0, 0.5)?;
    let backend = KBackend::RelativeGrid { fraction: cfg.local_fraction };
    let vals = per_pair(&s, |x, y| {
        let dx = g.dist_to_boundary(x)?;
        let k = backend.estimate(g, x, y)?;
        Ok((dist(x, y) / dx, k.value, k.gap()))
    })?;
    let (mut lo, mut hi) = (Tally::new(), Tally::new());
    for (t, k, gap) in vals {
        lo.le(t / 2.0, k + gap, ROUNDING_TOL);
        hi.le(k - gap, 2.0 * t, ROUNDING_TOL);
    }
    let detail = format!("{} local pairs, k {}", s.len(), backend);
    Ok(vec![
        lo.row(suite, name, "|x-y|/(2 d(x)) <= k + gap", detail.clone()),
        hi.row(suite, name, "k - gap <= 2|x-y|/d(x)", detail),
    ])
}

/// The antipodal pair of the punctured plane: `α = 0` while `k ≈ π`.
pub fn punctured_counterexample(suite: &str) -> Result<Vec<CheckRow>> {
    let g = Domain::punctured_plane();
    let (x, y) = ([1.0, 0.0], [-1.0, 0.0]);
    let alpha = apollonian(&g, &x, &y, 0)?.value;
    let k = qh_distance(&g, &x, &y, 0.02, &QhOptions::default())?;
    let s = PairSample::explicit(&g, vec![(x.to_vec(), y.to_vec())])?;
    let fit = a_uniformity_ratio(&g, &s, &KBackend::Grid { h: 0.02 }, 0)?;
    let FitKind::ARatio { witnesses, .. } = &fit.kind else { unreachable!() };
    let rel = (k.value - PI).abs() / PI;
    let row = |check: &str, ok: bool, margin: f64, detail: String| CheckRow {
        suite: suite.to_string(),
        fixture: "punctured_plane".to_string(),
        check: check.to_string(),
        evaluated: 1,
        violations: usize::from(!ok),
        margin,
        detail,
    };
    Ok(vec![
        row("alpha((1,0),(-1,0)) = 0", alpha == 0.0, -alpha, format!("alpha = {alpha}")),
        row("|k - pi| <= 2% pi at h=0.02", rel <= 0.02, 0.02 - rel, format!("k = {}, gap = {}", k.value, k.gap())),
        row(
            "a_uniformity_ratio reports an unbounded witness",
            witnesses.len() == 1,
            0.0,
            format!("witnesses = {}", witnesses.len()),
        ),
    ])
}

fn segment_suite(cfg: &VerifyConfig) -> Result<Vec<CheckRow>> {
    let suite = "segment";
    let mut rows = Vec::new();
    for (name, g, w) in fixtures() {
        // |x-y| <= d(x)/5 gives r_G(x,y) <= 1/4
        let s = PairSample::local(&g, &w, cfg.seed, cfg.local_count, 0.0, 0.2)?;
        let vals = per_pair(&s, |x, y| {
            let r = r_ratio(&g, x, y)?.value;
            Ok((r, r_of_segment(&g, x, y)?))
        })?;
        let (mut a, mut b, mut c) = (Tally::new(), Tally::new(), Tally::new());
        for (r, seg) in &vals {
            if *r > 0.25 || seg.diameter == 0.0 {
                continue;
            }
            let ratio = seg.diameter / seg.boundary_distance;
            a.le(seg.estimate.value, ratio, ROUNDING_TOL);
            b.le(ratio, r / (1.0 - r), ROUNDING_TOL);
            c.le(seg.sandwich.0, seg.estimate.value, ROUNDING_TOL);
        }
        rows.push(a.row(suite, name, "r_G(A) <= diam A / dist(A, boundary)", "segment sampled at 200 and 399 points"));
        rows.push(b.row(suite, name, "diam A / dist(A, boundary) <= r/(1-r)", "pairs with r <= 1/4"));
        rows.push(c.row(suite, name, "diam A / (2 dist(A, boundary)) <= r_G(A)", "segment sampled at 200 and 399 points"));
    }
    Ok(rows)
}

fn mobius_suite(cfg: &VerifyConfig) -> Result<Vec<CheckRow>> {
    let suite = "mobius_invariance";
    let inv = MapSpec::inversion(&[0.0, 0.0], 1.0)?;
    let g = Domain::punctured_plane();
    let w = Window::centered(2, 3.0);
    let quads = QuadSample::closure(&g, &w, cfg.seed, cfg.quad_count, 0.1, 0)?;
    let mut dev = Tally::new();
    let mut skipped = 0;
    for q in &quads.quads {
        let Ok(t) = cross_ratio(&q[0], &q[1], &q[2], &q[3]) else {
            skipped += 1;
            continue;
        };
        let fq: Vec<ExtendedPoint> = q.iter().map(|p| apply_map(&inv, p)).collect::<Result<_>>()?;
        let t2 = cross_ratio(&fq[0], &fq[1], &fq[2], &fq[3])?;
        let rel = if t == 0.0 { t2 } else { (t2 - t).abs() / t };
        dev.le(rel, 1e-9, 0.0);
    }
    let max_dev = 1e-9 - dev.margin;
    let mut rows = vec![dev.row(
        suite,
        "punctured_plane",
        "cross ratio preserved by inversion within 1e-9",
        format!("max relative deviation {max_dev:e}; {skipped} degenerate quadruples skipped"),
    )];

    let s = PairSample::uniform(&g, &w, cfg.seed, cfg.count, 0.0)?;
    let vals = per_pair(&s, |x, y| {
        let a = apollonian(&g, x, y, 0)?.value;
        let b = apollonian(&g, &apply_finite(&inv, x)?, &apply_finite(&inv, y)?, 0)?.value;
        Ok((a - b).abs())
    })?;
    let mut adev = Tally::new();
    for d in vals {
        adev.le(d, 1e-9, 0.0);
    }
    rows.push(adev.row(
        suite,
        "punctured_plane",
        "alpha preserved by inversion within 1e-9",
        format!("max deviation {:e}", 1e-9 - adev.margin),
    ));

    let fit = estimate_rough_bilipschitz(&inv, &g, &Metric::Alpha { level: 0 }, &s)?;
    let DistortionKind::RoughBilipschitz { m, c, .. } = fit.kind else { unreachable!() };
    let err = (m - 1.0).abs().max(c.abs());
    rows.push(CheckRow {
        suite: suite.to_string(),
        fixture: "punctured_plane".to_string(),
        check: "rough Apollonian (M, C) = (1, 0) within 1e-6".to_string(),
        evaluated: s.len(),
        violations: usize::from(err > 1e-6),
        margin: 1e-6 - err,
        detail: format!("M = {m}, C = {c}"),
    });

    let theta = estimate_qm_theta(&inv, &quads, 16)?;
    let DistortionKind::QmTheta { bins, .. } = &theta.kind else { unreachable!() };
    let mut tdev = Tally::new();
    for b in bins.iter().filter(|b| b.count > 0) {
        tdev.le((b.value - b.support).abs() / b.support, 1e-9, 0.0);
    }
    rows.push(tdev.row(suite, "punctured_plane", "theta envelope of inversion equals t within 1e-9", "16 bins"));
    Ok(rows)
}

/// Runs one named suite.
pub fn run_suite(name: &str, cfg: &VerifyConfig) -> Result<Vec<CheckRow>> {
    match name {
        "sandwich" => sandwich_suite(cfg),
        "lemma32" => local_bounds_suite(cfg),
        "segment" => segment_suite(cfg),
        "mobius_invariance" => mobius_suite(cfg),
        other => Err(Error::parse(
            "suite",
            format!("unknown suite `{other}` (expected one of {})", SUITES.join(", ")),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyConfig {
        VerifyConfig {
            count: 40,
            local_count: 30,
            quad_count: 300,
            levels: vec![2, 3, 4],
            ..VerifyConfig::default()
        }
    }

    #[test]
    fn suites_pass_on_small_samples() {
        for suite in SUITES {
            let rows = run_suite(suite, &small()).unwrap();
            assert!(!rows.is_empty());
            for r in &rows {
                assert!(r.passed(), "{r:?}");
                assert!(r.evaluated > 0, "{r:?}");
            }
        }
    }

    #[test]
    fn unknown_suite_is_a_usage_error() {
        let e = run_suite("everything", &small()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
