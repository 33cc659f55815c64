//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    a_uniformity_ratio, fit_uniformity, gromov_delta_4pt, natural_check, phi_envelope, quasi_isotropy,
    ConstantFit, EnvelopeBin, FitKind, Metric, PoolOptions,
};
use crate::format::{parse_domain, parse_map, parse_queries, Syntax};
use crate::metrics::{Bound, MetricEstimate};
use crate::geometry::{Domain, DomainKind};
use crate::maps::{estimate_qm_theta, estimate_rough_bilipschitz, linear_dilatation, DistortionFit, DistortionKind};
use crate::qh::{qh_geodesic, KBackend, QhGrid, QhOptions, Stencil, Window};
use crate::report::{num, point, sha256_hex, CsvTable, RunManifest};
use crate::sampling::{PairSample, QuadSample};
use crate::verify::{run_suite, VerifyConfig};

#[derive(Debug, Parser)]
#[command(name = "apollon", version, about = "Hyperbolic-type metrics and structural constants of Euclidean domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a metric on point pairs.
    Metric(MetricArgs),
    /// Run a structural-constant estimator.
    Estimate(EstimateArgs),
    /// Run an inequality suite on the fixture domains.
    Verify(VerifyArgs),
    /// Compute a grid quasihyperbolic geodesic.
    Geodesic(GeodesicArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Clone)]
pub struct SampleArgs {
    /// Seed of the pair or quadruple sample.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of sampled pairs or quadruples.
    #[arg(long)]
    pub count: Option<usize>,
    /// Sampling window `lo1,lo2,...:hi1,hi2,...`; defaults to the bounding box of bounded domains.
    #[arg(long)]
    pub window: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct BackendArgs {
    /// Absolute grid resolution for quasihyperbolic distances.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Grid resolution as a fraction of min(d_G(x), d_G(y)).
    #[arg(long, conflicts_with = "resolution")]
    pub relative_resolution: Option<f64>,
    /// Boundary sampling level for sampled Apollonian and Seittenranta values.
    #[arg(long)]
    pub level: Option<u32>,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Domain specification (TOML or JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// One of alpha, j, k, delta, h, r.
    #[arg(long, required_unless_present = "batch")]
    pub metric: Option<String>,
    /// Explicit pair `x1,x2;y1,y2`; may be repeated. Without pairs, `--count` pairs are sampled.
    #[arg(long = "pair")]
    pub pairs: Vec<String>,
    /// Query file listing pairs with their own metric and parameters.
    #[arg(long, conflicts_with_all = ["pairs", "metric"])]
    pub batch: Option<PathBuf>,
    /// Constant of the h metric.
    #[arg(long, default_value_t = 2.0)]
    pub c: f64,
    #[command(flatten)]
    pub sample: SampleArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// CSV output path; a `<out>.manifest.json` sidecar is written next to it. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Domain specification (TOML or JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// One of uniformity, phi, a_ratio, gromov, isotropy, rough_bilip, qm_theta, dilatation, natural.
    #[arg(long)]
    pub estimator: String,
    /// Map specification for rough_bilip, qm_theta and dilatation.
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[command(flatten)]
    pub sample: SampleArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Bins of the phi and theta envelopes.
    #[arg(long, default_value_t = 16)]
    pub bins: usize,
    /// Base point for isotropy and dilatation.
    #[arg(long)]
    pub point: Option<String>,
    /// Decreasing radii `r1,r2,...` for isotropy and dilatation.
    #[arg(long)]
    pub radii: Option<String>,
    /// Number of directions for isotropy and dilatation.
    #[arg(long)]
    pub directions: Option<usize>,
    /// Polyline `p1;p2;...` for natural.
    #[arg(long)]
    pub polyline: Option<String>,
    /// Radius range `rmin:rmax` for qm_theta: interior points are spread log-uniformly in radius
    /// around --point instead of uniformly over the window.
    #[arg(long)]
    pub log_radial: Option<String>,
    /// Points per polyline edge for natural.
    #[arg(long, default_value_t = 4)]
    pub subdivisions: usize,
    /// Metric for rough_bilip (alpha, j, k, delta, h).
    #[arg(long, default_value = "alpha")]
    pub metric: String,
    /// Draw pairs or quadruples from this many distinct points and evaluate grid distances on
    /// shared grids. Grid-backed gromov runs default to 40.
    #[arg(long)]
    pub pool: Option<usize>,
    /// Stencil radius of quasihyperbolic grids.
    #[arg(long)]
    pub stencil: Option<u32>,
    /// Window of shared grids; defaults to the sampling window inflated by half its extent.
    #[arg(long)]
    pub grid_window: Option<String>,
    /// CSV output path; a `<out>.manifest.json` sidecar is written next to it. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// One of sandwich, lemma32, segment, mobius_invariance.
    pub suite: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Pairs per fixture.
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    /// CSV output path; a `<out>.manifest.json` sidecar is written next to it. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GeodesicArgs {
    /// Domain specification (TOML or JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Endpoints `x1,x2;y1,y2`.
    #[arg(long)]
    pub pair: String,
    #[arg(long)]
    pub resolution: f64,
    /// Grid window `lo:hi`; defaults to the hull of the endpoints inflated by
    /// max(d_G(x), d_G(y), |x-y|).
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub stencil: Option<u32>,
    /// CSV output path; a `<out>.manifest.json` sidecar is written next to it. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest sidecar written by an earlier run.
    pub manifest: PathBuf,
    /// CSV output path; a `<out>.manifest.json` sidecar is written next to it. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Output of one command: the CSV text, its manifest, warnings for stderr and whether every
/// check passed.
#[derive(Debug)]
pub struct Outcome {
    pub csv: String,
    pub manifest: RunManifest,
    pub warnings: Vec<String>,
    pub success: bool,
    pub out: Option<PathBuf>,
}

fn parse_vec(text: &str, field: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(field, format!("`{c}` is not a number")))
        })
        .collect()
}

fn parse_points(text: &str, field: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';').map(|p| parse_vec(p, field)).collect()
}

fn parse_pair(text: &str, field: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let pts = parse_points(text, field)?;
    match <[Vec<f64>; 2]>::try_from(pts) {
        Ok([x, y]) => Ok((x, y)),
        Err(_) => Err(Error::parse(field, "expected two points `x1,x2;y1,y2`")),
    }
}

fn parse_window(text: &str) -> Result<Window> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| Error::parse("--window", "expected `lo1,lo2:hi1,hi2`"))?;
    Window::new(parse_vec(lo, "--window")?, parse_vec(hi, "--window")?)
        .map_err(|e| Error::parse("--window", e.to_string()))
}

fn read_input(path: &Path, role: &str, manifest: &mut RunManifest) -> Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::parse(format!("--{role}"), format!("cannot read {}: {e}", path.display())))?;
    manifest.spec_hashes.insert(role.to_string(), sha256_hex(&bytes));
    String::from_utf8(bytes).map_err(|_| Error::parse(format!("--{role}"), "file is not UTF-8"))
}

fn load_domain(path: &Path, manifest: &mut RunManifest) -> Result<Domain> {
    let text = read_input(path, "spec", manifest)?;
    parse_domain(&text, Syntax::from_path(path))
}

fn sample_window(g: &Domain, args: &SampleArgs) -> Result<Window> {
    match &args.window {
        Some(w) => parse_window(w),
        None => match g.bounding_box() {
            Some((lo, hi)) => Window::new(lo, hi),
            None => Err(Error::parse("--window", "required for unbounded domains")),
        },
    }
}

fn backend(g: &Domain, args: &BackendArgs) -> KBackend {
    match (args.resolution, args.relative_resolution) {
        (Some(h), _) => KBackend::Grid { h },
        (None, Some(fraction)) => KBackend::RelativeGrid { fraction },
        (None, None) if matches!(g.kind(), DomainKind::HalfSpace { .. } | DomainKind::Punctured { .. }) => {
            KBackend::Exact
        }
        _ => KBackend::RelativeGrid { fraction: 0.1 },
    }
}

fn metric_from_name(name: &str, g: &Domain, b: &BackendArgs, c: f64, field: &str) -> Result<Metric> {
    let level = b.level.unwrap_or(6);
    Ok(match name {
        "alpha" => Metric::Alpha { level },
        "j" => Metric::J,
        "r" => Metric::R,
        "delta" => Metric::Delta { level },
        "h" => Metric::H { c },
        "k" => Metric::K { backend: backend(g, b) },
        other => {
            return Err(Error::parse(
                field,
                format!("unknown metric `{other}` (expected alpha, j, k, delta, h or r)"),
            ))
        }
    })
}

fn stencil(radius: Option<u32>) -> Result<Option<Stencil>> {
    match radius {
        Some(0) => Err(Error::parse("--stencil", "radius must be at least 1")),
        r => Ok(r.map(|radius| Stencil { radius })),
    }
}

fn record_sample(manifest: &mut RunManifest, args: &SampleArgs, count: usize, window: &Window) {
    manifest.seed = Some(args.seed);
    manifest.count = Some(count);
    manifest.detail("window", window);
}

fn cmd_metric(a: &MetricArgs, mut manifest: RunManifest) -> Result<Outcome> {
    let g = load_domain(&a.spec, &mut manifest)?;
    manifest.level = a.backend.level;
    manifest.resolution = a.backend.resolution;
    let mut queries: Vec<(Metric, Vec<f64>, Vec<f64>)> = Vec::new();
    if let Some(path) = &a.batch {
        let text = read_input(path, "batch", &mut manifest)?;
        for (i, q) in parse_queries(&text, Syntax::from_path(path))?.into_iter().enumerate() {
            let b = BackendArgs { resolution: q.resolution, relative_resolution: q.relative_resolution, level: q.level };
            let m = metric_from_name(&q.metric, &g, &b, q.c.unwrap_or(2.0), &format!("queries[{i}].metric"))?;
            queries.push((m, q.x, q.y));
        }
    } else {
        let name = a.metric.as_deref().unwrap_or_default();
        let metric = metric_from_name(name, &g, &a.backend, a.c, "--metric")?;
        manifest.detail("metric", &metric);
        let pairs = if a.pairs.is_empty() {
            let count = a.sample.count.unwrap_or(1);
            let window = sample_window(&g, &a.sample)?;
            record_sample(&mut manifest, &a.sample, count, &window);
            PairSample::uniform(&g, &window, a.sample.seed, count, 0.0)?
        } else {
            let pairs = a.pairs.iter().map(|p| parse_pair(p, "--pair")).collect::<Result<Vec<_>>>()?;
            PairSample::explicit(&g, pairs)?
        };
        queries.extend(pairs.pairs.into_iter().map(|(x, y)| (metric.clone(), x, y)));
    }
    let values: Vec<MetricEstimate> = queries
        .par_iter()
        .enumerate()
        .map(|(i, (m, x, y))| m.evaluate(&g, x, y).map_err(|e| e.at(format!("pair {i} ({x:?}, {y:?})"))))
        .collect::<Result<_>>()?;
    let mut t = CsvTable::new(&["metric", "x", "y", "value", "method", "bound", "level", "gap", "pseudometric"]);
    for ((m, x, y), e) in queries.iter().zip(values) {
        t.push(vec![
            m.name().to_string(),
            point(x),
            point(y),
            num(e.value),
            e.method.to_string(),
            match e.bound {
                Bound::TwoSided { .. } => "two_sided".to_string(),
                b => b.to_string(),
            },
            e.level().map(|l| l.to_string()).unwrap_or_default(),
            num(e.gap()),
            e.pseudometric.to_string(),
        ]);
    }
    Ok(Outcome { csv: t.render(&manifest), manifest, warnings: Vec::new(), success: true, out: a.out.clone() })
}

fn envelope_table(bins: &[EnvelopeBin]) -> CsvTable {
    let mut t = CsvTable::new(&["bin", "lo", "hi", "count", "raw_max", "value", "support", "gap"]);
    for (i, b) in bins.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            num(b.lo),
            num(b.hi),
            b.count.to_string(),
            b.raw_max.map(num).unwrap_or_default(),
            num(b.value),
            num(b.support),
            num(b.gap),
        ]);
    }
    t
}

fn fit_table(fit: &ConstantFit) -> CsvTable {
    let mut t = match &fit.kind {
        FitKind::Uniformity { c, d, tight_pair, max_gap } => {
            let mut t = CsvTable::new(&["c", "d", "tight_pair", "max_gap"]);
            t.push(vec![num(*c), num(*d), tight_pair.map(|i| i.to_string()).unwrap_or_default(), num(*max_gap)]);
            t
        }
        FitKind::PhiEnvelope { bins } => envelope_table(bins),
        FitKind::ARatio { sup, argmax, witnesses } => {
            let mut t = CsvTable::new(&["row", "index", "alpha", "k", "ratio"]);
            t.push(vec![
                "sup".into(),
                argmax.map(|i| i.to_string()).unwrap_or_default(),
                String::new(),
                String::new(),
                sup.map(num).unwrap_or_default(),
            ]);
            for w in witnesses {
                t.push(vec!["witness".into(), w.index.to_string(), num(w.alpha), num(w.k), "inf".into()]);
            }
            t
        }
        FitKind::GromovDelta { delta, argmax } => {
            let mut t = CsvTable::new(&["delta", "argmax"]);
            t.push(vec![num(*delta), argmax.map(|i| i.to_string()).unwrap_or_default()]);
            t
        }
        FitKind::Isotropy { profile, l_hat, trend } => {
            let mut t = CsvTable::new(&["radius", "ratio"]);
            for p in profile {
                t.push(vec![num(p.radius), num(p.ratio)]);
            }
            t.note(format!("l_hat: {}", num(*l_hat)));
            t.note(format!("trend: {trend:?}"));
            t
        }
    };
    t.note(format!("certificate: {:?}", fit.certificate));
    t.note(format!("evaluated: {}, skipped: {}", fit.evaluated, fit.skipped));
    for (key, value) in &fit.manifest.methods {
        t.note(format!("{key}: {value}"));
    }
    t
}

fn distortion_table(fit: &DistortionFit) -> CsvTable {
    let mut t = match &fit.kind {
        DistortionKind::RoughBilipschitz { metric, m, c, tight_pair } => {
            let mut t = CsvTable::new(&["metric", "M", "C", "tight_pair"]);
            t.push(vec![metric.clone(), num(*m), num(*c), tight_pair.map(|i| i.to_string()).unwrap_or_default()]);
            t
        }
        DistortionKind::QmTheta { bins, lambda, c0, c0_least_squares } => {
            let mut t = envelope_table(bins);
            t.note(format!("lambda: {}", num(*lambda)));
            t.note(format!("c0: {}", num(*c0)));
            t.note(format!("c0_least_squares: {}", num(*c0_least_squares)));
            t
        }
        DistortionKind::Dilatation { profile, h_hat, trend } => {
            let mut t = CsvTable::new(&["radius", "ratio"]);
            for p in profile {
                t.push(vec![num(p.radius), num(p.ratio)]);
            }
            t.note(format!("h_hat: {}", num(*h_hat)));
            t.note(format!("trend: {trend:?}"));
            t
        }
    };
    t.note(format!("certificate: {:?}", fit.certificate));
    t.note(format!("evaluated: {}, skipped: {}", fit.evaluated, fit.skipped));
    for (key, value) in &fit.manifest.methods {
        t.note(format!("{key}: {value}"));
    }
    t
}

fn cmd_estimate(a: &EstimateArgs, mut manifest: RunManifest) -> Result<Outcome> {
    let g = load_domain(&a.spec, &mut manifest)?;
    let k = backend(&g, &a.backend);
    manifest.resolution = a.backend.resolution;
    manifest.level = a.backend.level;
    manifest.detail("estimator", &a.estimator);
    manifest.detail("k", &k);
    let grid_window = match &a.grid_window {
        Some(w) => Some(parse_window(w).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse("--grid-window", message),
            e => e,
        })?),
        None => None,
    };
    let pool_opts = PoolOptions { window: grid_window, stencil: stencil(a.stencil)? };
    let map = match &a.map {
        Some(p) => {
            let text = read_input(p, "map", &mut manifest)?;
            Some(parse_map(&text, Syntax::from_path(p))?)
        }
        None => None,
    };
    let need_map = || map.clone().ok_or_else(|| Error::parse("--map", "required by this estimator"));
    let shared = a.pool.map(|_| &pool_opts);
    let pairs = |manifest: &mut RunManifest| -> Result<PairSample> {
        let count = a.sample.count.unwrap_or(1000);
        let window = sample_window(&g, &a.sample)?;
        record_sample(manifest, &a.sample, count, &window);
        match a.pool {
            Some(pool) => {
                manifest.detail("pool", pool);
                PairSample::pooled(&g, &window, a.sample.seed, count, pool, 0.0)
            }
            None => PairSample::uniform(&g, &window, a.sample.seed, count, 0.0),
        }
    };
    let point_arg = || -> Result<Vec<f64>> {
        parse_vec(a.point.as_deref().ok_or_else(|| Error::parse("--point", "required by this estimator"))?, "--point")
    };
    let radii_arg = || -> Result<Vec<f64>> {
        parse_vec(a.radii.as_deref().ok_or_else(|| Error::parse("--radii", "required by this estimator"))?, "--radii")
    };
    let table = match a.estimator.as_str() {
        "uniformity" => fit_table(&fit_uniformity(&g, &pairs(&mut manifest)?, &k, shared)?),
        "phi" => {
            manifest.bins = Some(a.bins);
            fit_table(&phi_envelope(&g, &pairs(&mut manifest)?, &k, a.bins, shared)?)
        }
        "a_ratio" => {
            let level = a.backend.level.unwrap_or(6);
            fit_table(&a_uniformity_ratio(&g, &pairs(&mut manifest)?, &k, level)?)
        }
        "gromov" => {
            let count = a.sample.count.unwrap_or(10_000);
            let window = sample_window(&g, &a.sample)?;
            record_sample(&mut manifest, &a.sample, count, &window);
            let quads = match k {
                KBackend::Exact => QuadSample::uniform(&g, &window, a.sample.seed, count, 0.0)?,
                _ => {
                    let pool = a.pool.unwrap_or(40);
                    manifest.detail("pool", pool);
                    QuadSample::pooled(&g, &window, a.sample.seed, count, pool, 0.0)?
                }
            };
            fit_table(&gromov_delta_4pt(&g, &quads, &k, &pool_opts)?)
        }
        "isotropy" => {
            let m = a.directions.unwrap_or(32);
            fit_table(&quasi_isotropy(&g, &point_arg()?, &radii_arg()?, m, a.backend.level.unwrap_or(6))?)
        }
        "natural" => {
            let poly = parse_points(
                a.polyline.as_deref().ok_or_else(|| Error::parse("--polyline", "required by natural"))?,
                "--polyline",
            )?;
            let r = natural_check(&g, &poly, a.subdivisions, &k, &pool_opts)?;
            let mut t = CsvTable::new(&["r", "k", "points", "disconnected"]);
            t.push(vec![num(r.r), num(r.k), r.points.to_string(), r.disconnected.to_string()]);
            t.note(format!("k: {k}"));
            t
        }
        "rough_bilip" => {
            let f = need_map()?;
            let metric = metric_from_name(&a.metric, &g, &a.backend, 2.0, "--metric")?;
            manifest.detail("metric", &metric);
            distortion_table(&estimate_rough_bilipschitz(&f, &g, &metric, &pairs(&mut manifest)?)?)
        }
        "qm_theta" => {
            let f = need_map()?;
            let count = a.sample.count.unwrap_or(10_000);
            manifest.bins = Some(a.bins);
            let level = a.backend.level.unwrap_or(0);
            let quads = match &a.log_radial {
                Some(range) => {
                    let (lo, hi) = range
                        .split_once(':')
                        .ok_or_else(|| Error::parse("--log-radial", "expected rmin:rmax"))?;
                    let r = |v: &str| {
                        v.trim().parse::<f64>().map_err(|e| Error::parse("--log-radial", format!("`{v}`: {e}")))
                    };
                    let quads = QuadSample::log_radial(&g, &point_arg()?, r(lo)?, r(hi)?, a.sample.seed, count, 0.25, level)?;
                    if let Some(w) = &quads.descriptor.window {
                        record_sample(&mut manifest, &a.sample, count, w);
                    }
                    quads
                }
                None => {
                    let window = sample_window(&g, &a.sample)?;
                    record_sample(&mut manifest, &a.sample, count, &window);
                    QuadSample::closure(&g, &window, a.sample.seed, count, 0.25, level)?
                }
            };
            distortion_table(&estimate_qm_theta(&f, &quads, a.bins)?)
        }
        "dilatation" => {
            let f = need_map()?;
            let m = a.directions.unwrap_or(16);
            distortion_table(&linear_dilatation(&f, &g, &point_arg()?, &radii_arg()?, m)?)
        }
        other => {
            return Err(Error::parse(
                "--estimator",
                format!(
                    "unknown estimator `{other}` (expected uniformity, phi, a_ratio, gromov, isotropy, \
                     rough_bilip, qm_theta, dilatation or natural)"
                ),
            ))
        }
    };
    Ok(Outcome { csv: table.render(&manifest), manifest, warnings: Vec::new(), success: true, out: a.out.clone() })
}

fn cmd_verify(a: &VerifyArgs, mut manifest: RunManifest) -> Result<Outcome> {
    let cfg = VerifyConfig { seed: a.seed, count: a.count, ..VerifyConfig::default() };
    manifest.seed = Some(a.seed);
    manifest.count = Some(a.count);
    manifest.detail("config", &cfg);
    let rows = run_suite(&a.suite, &cfg)?;
    let mut t = CsvTable::new(&["suite", "fixture", "check", "evaluated", "violations", "margin", "status", "detail"]);
    let mut success = true;
    for r in &rows {
        success &= r.passed();
        t.push(vec![
            r.suite.clone(),
            r.fixture.clone(),
            r.check.clone(),
            r.evaluated.to_string(),
            r.violations.to_string(),
            num(r.margin),
            if r.passed() { "pass" } else { "fail" }.to_string(),
            r.detail.clone(),
        ]);
    }
    Ok(Outcome { csv: t.render(&manifest), manifest, warnings: Vec::new(), success, out: a.out.clone() })
}

fn cmd_geodesic(a: &GeodesicArgs, mut manifest: RunManifest) -> Result<Outcome> {
    let g = load_domain(&a.spec, &mut manifest)?;
    let (x, y) = parse_pair(&a.pair, "--pair")?;
    for p in [&x, &y] {
        if p.len() != g.dim() {
            return Err(Error::parse("--pair", format!("point {p:?} does not have dimension {}", g.dim())));
        }
    }
    let window = match &a.window {
        Some(w) => parse_window(w)?,
        None => Window::auto(&g, &x, &y).map_err(|e| e.at("--pair"))?,
    };
    let opts = QhOptions { window: Some(window.clone()), stencil: stencil(a.stencil)? };
    let path = qh_geodesic(&g, &x, &y, a.resolution, &opts).map_err(|e| e.at(format!("pair ({x:?}, {y:?})")))?;
    let st = stencil(a.stencil)?.unwrap_or(Stencil::default_for(g.dim()));
    let stats = QhGrid::build(&g, &window, a.resolution, st)?.stats();
    manifest.resolution = Some(a.resolution);
    manifest.detail("grid", &stats);
    let mut cols: Vec<String> = vec!["step".into()];
    cols.extend((0..g.dim()).map(|i| format!("x{i}")));
    cols.push("cumulative".into());
    let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let mut t = CsvTable::new(&col_refs);
    for (i, (p, c)) in path.points.iter().zip(&path.cumulative).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(p.iter().map(|v| num(*v)));
        row.push(num(*c));
        t.push(row);
    }
    t.note(format!("total: {}", num(path.total)));
    t.note(format!("snaps: {} {}", num(path.snaps.0), num(path.snaps.1)));
    t.note(format!("nodes: {}, h: {}", stats.node_count, num(stats.h)));
    let mut warnings = Vec::new();
    if path.touches_window {
        warnings.push("warning: the geodesic touches the window boundary; enlarge --window".to_string());
    }
    Ok(Outcome { csv: t.render(&manifest), manifest, warnings, success: true, out: a.out.clone() })
}

fn cmd_replay(a: &ReplayArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.manifest)
        .map_err(|e| Error::parse("manifest", format!("cannot read {}: {e}", a.manifest.display())))?;
    let recorded: RunManifest =
        serde_json::from_str(&text).map_err(|e| Error::parse("manifest", e.to_string()))?;
    let mut argv = vec!["apollon".to_string(), recorded.command.clone()];
    argv.extend(recorded.arguments.iter().cloned());
    if let Some(out) = &a.out {
        argv.push("--out".into());
        argv.push(out.display().to_string());
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| Error::parse("manifest.arguments", e.to_string()))?;
    let outcome = execute(cli.command, recorded.arguments.clone())?;
    if outcome.manifest.spec_hashes != recorded.spec_hashes {
        return Err(Error::rejected("input files changed since the manifest was written"));
    }
    Ok(outcome)
}

/// Strips `--out` and its value, so the manifest does not depend on where output goes.
pub fn recorded_arguments(args: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out" {
            skip = true;
            continue;
        }
        if a.starts_with("--out=") {
            continue;
        }
        out.push(a.clone());
    }
    out
}

/// Runs a parsed command. `arguments` are the raw arguments after the subcommand.
pub fn execute(command: Command, arguments: Vec<String>) -> Result<Outcome> {
    let recorded = recorded_arguments(&arguments);
    match &command {
        Command::Metric(a) => cmd_metric(a, RunManifest::new("metric", recorded)),
        Command::Estimate(a) => cmd_estimate(a, RunManifest::new("estimate", recorded)),
        Command::Verify(a) => cmd_verify(a, RunManifest::new("verify", recorded)),
        Command::Geodesic(a) => cmd_geodesic(a, RunManifest::new("geodesic", recorded)),
        Command::Replay(a) => cmd_replay(a),
    }
}

/// Writes the outcome: CSV to `--out` (with a `.manifest.json` sidecar) or to stdout.
pub fn emit(outcome: &Outcome) -> std::io::Result<()> {
    for w in &outcome.warnings {
        eprintln!("{w}");
    }
    match &outcome.out {
        Some(path) => {
            std::fs::write(path, &outcome.csv)?;
            let mut sidecar = path.as_os_str().to_owned();
            sidecar.push(".manifest.json");
            std::fs::write(PathBuf::from(sidecar), outcome.manifest.to_json())
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(outcome.csv.as_bytes())
        }
    }
}

/// Caps the global thread pool from `APOLLON_THREADS`.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("APOLLON_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::parse("APOLLON_THREADS", format!("`{v}` is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::parse("APOLLON_THREADS", e.to_string()))?;
    }
    Ok(())
}
