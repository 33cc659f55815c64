//! Seeded point-pair and quadruple samples.
//!
//! Every sample is drawn sequentially from a ChaCha8 stream, so a sample of `2n` items starts
//! with the sample of `n` items for the same seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{add, dist, scale, Domain, ExtendedPoint};
use crate::qh::Window;

/// Rejection attempts allowed per accepted point before the window is declared unusable.
const MAX_ATTEMPTS: usize = 100_000;

/// How the points of a sample were drawn.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum SamplingLaw {
    /// Independent uniform points of `window ∩ G` with `d_G >= margin`.
    Uniform { margin: f64 },
    /// `x` uniform as above, `y = x + t d_G(x) u` with `t` uniform in `[0, max_ratio]` and `u`
    /// a uniform direction.
    Local { margin: f64, max_ratio: f64 },
    /// Each point is interior (as `Uniform`) or, with probability `boundary_share`, a uniform
    /// pick from the boundary sample of the given level (which may contain ∞).
    Closure { margin: f64, boundary_share: f64, level: u32 },
    /// `pool` uniform interior points (as `Uniform`); each pair or quadruple picks distinct pool
    /// members uniformly.
    Pooled { margin: f64, pool: usize },
    /// Each point is a boundary sample point with probability `boundary_share`, otherwise
    /// `center + r u` with `log r` uniform in `[log r_min, log r_max]` and `u` a uniform direction,
    /// rejected outside `G`. Spreads points over many scales around `center`.
    LogRadial { center: Vec<f64>, r_min: f64, r_max: f64, boundary_share: f64, level: u32 },
    /// Points supplied by the caller.
    Explicit,
}

/// Reproducibility descriptor of a sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleDescriptor {
    pub seed: u64,
    pub count: usize,
    pub window: Option<Window>,
    #[serde(flatten)]
    pub law: SamplingLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub descriptor: SampleDescriptor,
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadSample {
    pub descriptor: SampleDescriptor,
    pub quads: Vec<[ExtendedPoint; 4]>,
}

struct Sampler<'a> {
    g: &'a Domain,
    window: &'a Window,
    margin: f64,
    rng: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    fn new(g: &'a Domain, window: &'a Window, seed: u64, margin: f64) -> Result<Self> {
        if window.lo.len() != g.dim() {
            return Err(Error::rejected("sampling window dimension does not match the domain"));
        }
        if !(margin >= 0.0) {
            return Err(Error::rejected("sampling margin must be nonnegative"));
        }
        Ok(Sampler { g, window, margin, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    fn uniform_in_window(&mut self) -> Vec<f64> {
        self.window
            .lo
            .iter()
            .zip(&self.window.hi)
            .map(|(l, h)| self.rng.random_range(*l..*h))
            .collect()
    }

    fn interior(&mut self) -> Result<Vec<f64>> {
        for _ in 0..MAX_ATTEMPTS {
            let p = self.uniform_in_window();
            if let Ok(d) = self.g.dist_to_boundary(&p) {
                if d >= self.margin {
                    return Ok(p);
                }
            }
        }
        Err(Error::rejected(format!(
            "no interior point with margin {} found in the window after {MAX_ATTEMPTS} draws",
            self.margin
        )))
    }

    fn direction(&mut self) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..self.g.dim()).map(|_| self.rng.random_range(-1.0..1.0)).collect();
            let n2: f64 = v.iter().map(|c| c * c).sum();
            if n2 > 1e-6 && n2 <= 1.0 {
                return scale(&v, 1.0 / n2.sqrt());
            }
        }
    }
}

impl PairSample {
    /// `count` pairs of independent uniform points of `window ∩ G` at distance at least
    /// `margin` from the boundary.
    pub fn uniform(g: &Domain, window: &Window, seed: u64, count: usize, margin: f64) -> Result<Self> {
        let mut s = Sampler::new(g, window, seed, margin)?;
        let mut pairs = Vec::with_capacity(count);
        for _ in 0..count {
            let x = s.interior()?;
            let y = s.interior()?;
            pairs.push((x, y));
        }
        Ok(PairSample {
            descriptor: SampleDescriptor {
                seed,
                count,
                window: Some(window.clone()),
                law: SamplingLaw::Uniform { margin },
            },
            pairs,
        })
    }

    /// Pairs with `|x - y| <= max_ratio * d_G(x)`; `y` is redrawn until it lies in `G`.
    pub fn local(
        g: &Domain,
        window: &Window,
        seed: u64,
        count: usize,
        margin: f64,
        max_ratio: f64,
    ) -> Result<Self> {
        if !(max_ratio > 0.0) {
            return Err(Error::rejected("max_ratio must be positive"));
        }
        let mut s = Sampler::new(g, window, seed, margin)?;
        let mut pairs = Vec::with_capacity(count);
        while pairs.len() < count {
            let x = s.interior()?;
            let dx = g.dist_to_boundary(&x)?;
            let t: f64 = s.rng.random_range(0.0..=max_ratio);
            let u = s.direction();
            let y = add(&x, &scale(&u, t * dx));
            if g.contains(&y) && dist(&x, &y) <= max_ratio * dx {
                pairs.push((x, y));
            }
        }
        Ok(PairSample {
            descriptor: SampleDescriptor {
                seed,
                count,
                window: Some(window.clone()),
                law: SamplingLaw::Local { margin, max_ratio },
            },
            pairs,
        })
    }

    /// Pairs of distinct members of a pool of `pool` uniform interior points, for grid
    /// backends that run one search per distinct point.
    pub fn pooled(
        g: &Domain,
        window: &Window,
        seed: u64,
        count: usize,
        pool: usize,
        margin: f64,
    ) -> Result<Self> {
        if pool < 2 {
            return Err(Error::rejected("a pair pool needs at least 2 points"));
        }
        let mut s = Sampler::new(g, window, seed, margin)?;
        let points: Vec<Vec<f64>> = (0..pool).map(|_| s.interior()).collect::<Result<_>>()?;
        let pairs = (0..count)
            .map(|_| {
                let picks = rand::seq::index::sample(&mut s.rng, pool, 2);
                (points[picks.index(0)].clone(), points[picks.index(1)].clone())
            })
            .collect();
        Ok(PairSample {
            descriptor: SampleDescriptor {
                seed,
                count,
                window: Some(window.clone()),
                law: SamplingLaw::Pooled { margin, pool },
            },
            pairs,
        })
    }

    /// Caller-supplied pairs; every point must lie in `G`.
    pub fn explicit(g: &Domain, pairs: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        for (i, (x, y)) in pairs.iter().enumerate() {
            for p in [x, y] {
                if p.len() != g.dim() || !g.contains(p) {
                    return Err(Error::rejected(format!("pair {i}: point {p:?} is not in the domain")));
                }
            }
        }
        Ok(PairSample {
            descriptor: SampleDescriptor {
                seed: 0,
                count: pairs.len(),
                window: None,
                law: SamplingLaw::Explicit,
            },
            pairs,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The first `n` pairs.
    pub fn prefix(&self, n: usize) -> PairSample {
        let n = n.min(self.pairs.len());
        let mut descriptor = self.descriptor.clone();
        descriptor.count = n;
        PairSample { descriptor, pairs: self.pairs[..n].to_vec() }
    }
}

impl QuadSample {
    /// Quadruples of independent uniform interior points.
    pub fn uniform(g: &Domain, window: &Window, seed: u64, count: usize, margin: f64) -> Result<Self> {
        let mut s = Sampler::new(g, window, seed, margin)?;
        let mut quads = Vec::with_capacity(count);
        for _ in 0..count {
            quads.push([
                ExtendedPoint::Finite(s.interior()?),
                ExtendedPoint::Finite(s.interior()?),
                ExtendedPoint::Finite(s.interior()?),
                ExtendedPoint::Finite(s.interior()?),
            ]);
        }
        Ok(QuadSample {
            descriptor: SampleDescriptor {
                seed,
                count,
                window: Some(window.clone()),
                law: SamplingLaw::Uniform { margin },
            },
            quads,
        })
    }

    /// Quadruples in the closure of `G`: each point is a boundary sample point of the given
    /// level with probability `boundary_share`, otherwise a uniform interior point.
    pub fn closure(
        g: &Domain,
        window: &Window,
        seed: u64,
        count: usize,
        boundary_share: f64,
        level: u32,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&boundary_share) {
            return Err(Error::rejected("boundary_share must lie in [0, 1]"));
        }
        let boundary = g.sample_boundary(level)?.points();
        let mut s = Sampler::new(g, window, seed, 0.0)?;
        let mut quads = Vec::with_capacity(count);
        for _ in 0..count {
            let mut pick = || -> Result<ExtendedPoint> {
                if s.rng.random_bool(boundary_share) {
                    let i = s.rng.random_range(0..boundary.len());
                    Ok(boundary[i].clone())
                } else {
                    Ok(ExtendedPoint::Finite(s.interior()?))
                }
            };
            quads.push([pick()?, pick()?, pick()?, pick()?]);
        }
        Ok(QuadSample {
            descriptor: SampleDescriptor {
                seed,
                count,
                window: Some(window.clone()),
                law: SamplingLaw::Closure { margin: 0.0, boundary_share, level },
            },
            quads,
        })
    }

    /// Quadruples in the closure of `G` whose interior points are spread log-uniformly in
    /// radius around `center` (see [`SamplingLaw::LogRadial`]).
    #[allow(clippy::too_many_arguments)]
    pub fn log_radial(
        g: &Domain,
        center: &[f64],
        r_min: f64,
        r_max: f64,
        seed: u64,
        count: usize,
        boundary_share: f64,
        level: u32,
    ) -> Result<Self> {
        if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
            return Err(Error::rejected("log-radial sampling needs 0 < r_min < r_max < inf"));
        }
        if !(0.0..=1.0).contains(&boundary_share) {
            return Err(Error::rejected("boundary_share must lie in [0, 1]"));
        }
        let window = Window::around(&[center], r_max);
        let boundary = g.sample_boundary(level)?.points();
        let mut s = Sampler::new(g, &window, seed, 0.0)?;
        let (lo, hi) = (r_min.ln(), r_max.ln());
        let interior = |s: &mut Sampler| -> Result<Vec<f64>> {
            for _ in 0..MAX_ATTEMPTS {
                let r = s.rng.random_range(lo..hi).exp();
                let p = add(center, &scale(&s.direction(), r));
                if g.contains(&p) {
                    return Ok(p);
                }
            }
            Err(Error::rejected(format!("no interior point found after {MAX_ATTEMPTS} log-radial draws")))
        };
        let mut quads = Vec::with_capacity(count);
        for _ in 0..count {
            let mut pick = || -> Result<ExtendedPoint> {
                if s.rng.random_bool(boundary_share) {
                    let i = s.rng.random_range(0..boundary.len());
                    Ok(boundary[i].clone())
                } else {
                    Ok(ExtendedPoint::Finite(interior(&mut s)?))
                }
            };
            quads.push([pick()?, pick()?, pick()?, pick()?]);
        }
        Ok(QuadSample {
            descriptor: SampleDescriptor {
                seed,
                count,
                window: Some(window),
                law: SamplingLaw::LogRadial { center: center.to_vec(), r_min, r_max, boundary_share, level },
            },
            quads,
        })
    }

    /// Quadruples of distinct members of a pool of `pool` uniform interior points. Keeps the
    /// number of distinct points small when every distance costs a grid search.
    pub fn pooled(
        g: &Domain,
        window: &Window,
        seed: u64,
        count: usize,
        pool: usize,
        margin: f64,
    ) -> Result<Self> {
        if pool < 4 {
            return Err(Error::rejected("a quadruple pool needs at least 4 points"));
        }
        let mut s = Sampler::new(g, window, seed, margin)?;
        let points: Vec<Vec<f64>> = (0..pool).map(|_| s.interior()).collect::<Result<_>>()?;
        let mut quads = Vec::with_capacity(count);
        for _ in 0..count {
            let picks = rand::seq::index::sample(&mut s.rng, pool, 4);
            let q: Vec<ExtendedPoint> =
                picks.iter().map(|i| ExtendedPoint::Finite(points[i].clone())).collect();
            quads.push(q.try_into().expect("four picks"));
        }
        Ok(QuadSample {
            descriptor: SampleDescriptor {
                seed,
                count,
                window: Some(window.clone()),
                law: SamplingLaw::Pooled { margin, pool },
            },
            quads,
        })
    }

    pub fn len(&self) -> usize {
        self.quads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quads.is_empty()
    }

    pub fn prefix(&self, n: usize) -> QuadSample {
        let n = n.min(self.quads.len());
        let mut descriptor = self.descriptor.clone();
        descriptor.count = n;
        QuadSample { descriptor, quads: self.quads[..n].to_vec() }
    }
}
