//! Deblending oracles.
//!
//! Given a blended point `x = (1-α) x0 + α x1` these compute the posterior
//! expectations `(x̄0, x̄1)` or draw exact posterior pairs `(x0, x1)`.
//!
//! For Gaussian mixtures the posterior is again a mixture, one term per
//! component pair `(i, j)`. For a pair with means `μ, ν` and per-axis
//! variances `s², l²` the blended point is Gaussian with
//!
//! ```text
//! m = (1-α) μ + α ν        v = (1-α)² s² + α² l²
//! ```
//!
//! so the pair responsibility is `∝ w_i v_j N(x; m, v)` and, per axis,
//!
//! ```text
//! E[x0 | x] = μ + (1-α) s² / v · (x - m)     Var[x0 | x] = s² α² l² / v
//! E[x1 | x] = ν +     α l² / v · (x - m)     Var[x1 | x] = l² (1-α)² s² / v
//! ```
//!
//! Both conditional means blend back to `x` exactly, pair by pair.

use std::sync::Mutex;

use rand::Rng as _;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::densities::{log_sum_exp, Density, DensityError, GaussianMixture};
use crate::point::Point;
use crate::rng::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Pairs this many nats below the best pair are dropped.
pub const PRUNE_NATS: f64 = 40.0;

/// Default cap on `|gmm0| * |gmm1|` for [`AnalyticDeblender`].
pub const DEFAULT_PAIR_BUDGET: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("blend parameter {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Monte-Carlo estimate failed: all {samples} importance weights are zero at x = {x}, alpha = {alpha}")]
    EstimationFailure { x: Point, alpha: f64, samples: usize },
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error("deblender produced non-finite output at alpha = {alpha}")]
    NonFinite { alpha: f64 },
}

/// A blended point together with its blend parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendState {
    pub x: Point,
    pub alpha: f64,
}

impl BlendState {
    pub fn new(x: Point, alpha: f64) -> Result<Self, OracleError> {
        check_alpha(alpha)?;
        Ok(BlendState { x, alpha })
    }
}

/// Posterior expectations and their difference.
#[derive(Debug, Clone, PartialEq)]
pub struct DeblendStats {
    pub xbar0: Point,
    pub xbar1: Point,
    pub diff: Point,
}

impl DeblendStats {
    pub fn from_means(xbar0: Point, xbar1: Point) -> Self {
        let diff = xbar1.sub(&xbar0);
        DeblendStats { xbar0, xbar1, diff }
    }

    /// Recovers both expectations from the difference alone through the
    /// consistency identity `(1-α) x̄0 + α x̄1 = x`.
    pub fn from_diff(x: &Point, alpha: f64, diff: Point) -> Self {
        let xbar0 = x.add_scaled(&diff, -alpha);
        let xbar1 = x.add_scaled(&diff, 1.0 - alpha);
        DeblendStats { xbar0, xbar1, diff }
    }

    pub fn is_finite(&self) -> bool {
        self.xbar0.is_finite() && self.xbar1.is_finite() && self.diff.is_finite()
    }
}

/// Anything that maps `(x, α)` to posterior expectations: closed-form
/// conditioning, a Monte-Carlo estimate or a trained network.
pub trait Deblender: Sync {
    fn dim(&self) -> usize;

    fn deblend(&self, x: &Point, alpha: f64) -> Result<DeblendStats, OracleError>;

    /// Batched form; implementations with a faster batched path override it.
    fn deblend_many(&self, xs: &[Point], alpha: f64) -> Vec<Result<DeblendStats, OracleError>> {
        xs.iter().map(|x| self.deblend(x, alpha)).collect()
    }
}

fn check_alpha(alpha: f64) -> Result<(), OracleError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(OracleError::InvalidAlpha(alpha));
    }
    Ok(())
}

fn check_dims(gmm0: &GaussianMixture, gmm1: &GaussianMixture, x: &Point) -> Result<(), OracleError> {
    for got in [gmm1.dim(), x.dim()] {
        if got != gmm0.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: gmm0.dim(),
                got,
            });
        }
    }
    Ok(())
}

/// Per-query scaled component terms: `(1-α)² s²` and `(1-α) μ` for the
/// source, `α² l²` and `α ν` for the target.
struct Scaled {
    var: Vec<f64>,
    mean: Vec<f64>,
    log_weight: f64,
}

fn scale_components(gmm: &GaussianMixture, factor: f64) -> Vec<Scaled> {
    gmm.components()
        .iter()
        .map(|c| Scaled {
            var: c.stddev.iter().map(|s| factor * factor * s * s).collect(),
            mean: c.mean.coords().iter().map(|m| factor * m).collect(),
            log_weight: c.weight.ln(),
        })
        .collect()
}

/// Posterior over component pairs for one query, after pruning.
struct PairPosterior<'a> {
    gmm0: &'a GaussianMixture,
    gmm1: &'a GaussianMixture,
    x: &'a Point,
    alpha: f64,
    /// `(i, j, normalized responsibility)`
    pairs: Vec<(usize, usize, f64)>,
}

impl<'a> PairPosterior<'a> {
    fn new(
        gmm0: &'a GaussianMixture,
        gmm1: &'a GaussianMixture,
        x: &'a Point,
        alpha: f64,
    ) -> Result<Self, OracleError> {
        check_alpha(alpha)?;
        check_dims(gmm0, gmm1, x)?;
        let src = scale_components(gmm0, 1.0 - alpha);
        let dst = scale_components(gmm1, alpha);
        let d = x.dim();
        let xc = x.coords();
        let mut logs = Vec::with_capacity(src.len() * dst.len());
        for a in &src {
            for b in &dst {
                let mut ll = a.log_weight + b.log_weight;
                for axis in 0..d {
                    let v = a.var[axis] + b.var[axis];
                    let r = xc[axis] - a.mean[axis] - b.mean[axis];
                    ll -= 0.5 * (r * r / v + LN_2PI + v.ln());
                }
                logs.push(ll);
            }
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let n1 = dst.len();
        let kept: Vec<(usize, usize, f64)> = logs
            .iter()
            .enumerate()
            .filter(|(_, l)| **l >= max - PRUNE_NATS)
            .map(|(k, l)| (k / n1, k % n1, *l))
            .collect();
        let kept_logs: Vec<f64> = kept.iter().map(|p| p.2).collect();
        let norm = log_sum_exp(&kept_logs);
        let pairs = kept
            .into_iter()
            .map(|(i, j, l)| (i, j, (l - norm).exp()))
            .collect();
        Ok(PairPosterior {
            gmm0,
            gmm1,
            x,
            alpha,
            pairs,
        })
    }

    /// Conditional moments of one pair along one axis:
    /// `(E[x0], Var[x0], E[x1], Var[x1])`.
    fn moments(&self, i: usize, j: usize, axis: usize) -> (f64, f64, f64, f64) {
        let c0 = &self.gmm0.components()[i];
        let c1 = &self.gmm1.components()[j];
        let a = self.alpha;
        let (mu, s2) = (c0.mean[axis], c0.stddev[axis] * c0.stddev[axis]);
        let (nu, l2) = (c1.mean[axis], c1.stddev[axis] * c1.stddev[axis]);
        let a0 = (1.0 - a) * (1.0 - a) * s2;
        let a1 = a * a * l2;
        let v = a0 + a1;
        let r = self.x[axis] - (1.0 - a) * mu - a * nu;
        (
            mu + (1.0 - a) * s2 / v * r,
            s2 * a1 / v,
            nu + a * l2 / v * r,
            l2 * a0 / v,
        )
    }

    fn expectations(&self) -> DeblendStats {
        let d = self.x.dim();
        let mut xbar0 = vec![0.0; d];
        let mut xbar1 = vec![0.0; d];
        for &(i, j, r) in &self.pairs {
            for axis in 0..d {
                let (e0, _, e1, _) = self.moments(i, j, axis);
                xbar0[axis] += r * e0;
                xbar1[axis] += r * e1;
            }
        }
        DeblendStats::from_means(Point::new(xbar0), Point::new(xbar1))
    }

    fn pick_pair(&self, rng: &mut Rng) -> (usize, usize) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(i, j, r) in &self.pairs {
            acc += r;
            if u < acc {
                return (i, j);
            }
        }
        let last = self.pairs[self.pairs.len() - 1];
        (last.0, last.1)
    }

    /// Median of the posterior marginal of `x0` (`side == 0`) or `x1`
    /// along one axis, by bisection on the mixture CDF.
    fn marginal_median(&self, axis: usize, side: usize) -> f64 {
        let terms: Vec<(f64, f64, f64)> = self
            .pairs
            .iter()
            .map(|&(i, j, r)| {
                let (e0, v0, e1, v1) = self.moments(i, j, axis);
                if side == 0 {
                    (r, e0, v0.sqrt())
                } else {
                    (r, e1, v1.sqrt())
                }
            })
            .collect();
        let cdf = |t: f64| -> f64 {
            terms
                .iter()
                .map(|(r, m, s)| r * 0.5 * libm::erfc(-(t - m) / (s * std::f64::consts::SQRT_2)))
                .sum()
        };
        let mut lo = terms
            .iter()
            .map(|(_, m, s)| m - 40.0 * s)
            .fold(f64::INFINITY, f64::min);
        let mut hi = terms
            .iter()
            .map(|(_, m, s)| m + 40.0 * s)
            .fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Exact posterior expectations for Gaussian-mixture endpoints.
pub fn analytic_posterior_stats(
    gmm0: &GaussianMixture,
    gmm1: &GaussianMixture,
    x: &Point,
    alpha: f64,
) -> Result<DeblendStats, OracleError> {
    Ok(PairPosterior::new(gmm0, gmm1, x, alpha)?.expectations())
}

/// Exact draw of a posterior pair `(x0, x1)`.
///
/// The component pair is chosen by responsibility. Then the endpoint with
/// the larger blend weight is derived from the other one through the blend
/// equation, so the division is always by a factor of at least 1/2.
pub fn posterior_sample(
    gmm0: &GaussianMixture,
    gmm1: &GaussianMixture,
    x: &Point,
    alpha: f64,
    rng: &mut Rng,
) -> Result<(Point, Point), OracleError> {
    check_alpha(alpha)?;
    check_dims(gmm0, gmm1, x)?;
    if alpha == 0.0 {
        return Ok((x.clone(), gmm1.sample_one(rng)));
    }
    if alpha == 1.0 {
        return Ok((gmm0.sample_one(rng), x.clone()));
    }
    let post = PairPosterior::new(gmm0, gmm1, x, alpha)?;
    let (i, j) = post.pick_pair(rng);
    let d = x.dim();
    let mut x0 = vec![0.0; d];
    let mut x1 = vec![0.0; d];
    for axis in 0..d {
        let (e0, v0, e1, v1) = post.moments(i, j, axis);
        let z: f64 = rng.sample(StandardNormal);
        if alpha > 0.5 {
            x0[axis] = e0 + v0.sqrt() * z;
            x1[axis] = (x[axis] - (1.0 - alpha) * x0[axis]) / alpha;
        } else {
            x1[axis] = e1 + v1.sqrt() * z;
            x0[axis] = (x[axis] - alpha * x1[axis]) / (1.0 - alpha);
        }
    }
    Ok((Point::new(x0), Point::new(x1)))
}

/// Coordinate-wise posterior median of `x1 - x0`.
///
/// Along each axis `x1 - x0` is a monotone affine function of either
/// endpoint, so its median is the image of that endpoint's marginal median.
pub fn posterior_median_diff(
    gmm0: &GaussianMixture,
    gmm1: &GaussianMixture,
    x: &Point,
    alpha: f64,
) -> Result<Point, OracleError> {
    let post = PairPosterior::new(gmm0, gmm1, x, alpha)?;
    let d = x.dim();
    let diff = (0..d)
        .map(|axis| {
            if alpha <= 0.5 {
                // x1 - x0 = (x1 - x) / (1 - α)
                (post.marginal_median(axis, 1) - x[axis]) / (1.0 - alpha)
            } else {
                // x1 - x0 = (x - x0) / α
                (x[axis] - post.marginal_median(axis, 0)) / alpha
            }
        })
        .collect();
    Ok(Point::new(diff))
}

/// Self-normalized importance estimate of the posterior expectations.
///
/// For `α <= 1/2` draws `x1 ~ p1`, solves the blend equation for `x0` and
/// weights by `p0(x0)`; for `α > 1/2` the roles swap. Weights are handled in
/// log space.
pub fn mc_posterior_stats(
    p0: &Density,
    p1: &Density,
    x: &Point,
    alpha: f64,
    n: usize,
    rng: &mut Rng,
) -> Result<DeblendStats, OracleError> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(OracleError::NoSamples);
    }
    for got in [p1.dim(), x.dim()] {
        if got != p0.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: p0.dim(),
                got,
            });
        }
    }
    let d = x.dim();
    let mut draws = Vec::with_capacity(n);
    let mut log_w = Vec::with_capacity(n);
    for _ in 0..n {
        let (x0, x1, lw) = if alpha <= 0.5 {
            let x1 = p1.sample_one(rng);
            let x0 = x.lincomb(1.0 / (1.0 - alpha), &x1, -alpha / (1.0 - alpha));
            let lw = p0.log_pdf(&x0)?;
            (x0, x1, lw)
        } else {
            let x0 = p0.sample_one(rng);
            let x1 = x.lincomb(1.0 / alpha, &x0, -(1.0 - alpha) / alpha);
            let lw = p1.log_pdf(&x1)?;
            (x0, x1, lw)
        };
        draws.push((x0, x1));
        log_w.push(lw);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(OracleError::EstimationFailure {
            x: x.clone(),
            alpha,
            samples: n,
        });
    }
    let mut total = 0.0;
    let mut xbar0 = vec![0.0; d];
    let mut xbar1 = vec![0.0; d];
    for ((x0, x1), lw) in draws.iter().zip(&log_w) {
        let w = (lw - max).exp();
        total += w;
        for axis in 0..d {
            xbar0[axis] += w * x0[axis];
            xbar1[axis] += w * x1[axis];
        }
    }
    for axis in 0..d {
        xbar0[axis] /= total;
        xbar1[axis] /= total;
    }
    Ok(DeblendStats::from_means(Point::new(xbar0), Point::new(xbar1)))
}

/// Record of components dropped to respect the pair budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subsampling {
    pub original: (usize, usize),
    pub kept: (usize, usize),
}

/// Closed-form deblender over two Gaussian mixtures.
#[derive(Debug, Clone)]
pub struct AnalyticDeblender {
    gmm0: GaussianMixture,
    gmm1: GaussianMixture,
    subsampling: Option<Subsampling>,
}

impl AnalyticDeblender {
    /// Uses every component pair, however many there are.
    pub fn exact(gmm0: GaussianMixture, gmm1: GaussianMixture) -> Result<Self, OracleError> {
        if gmm0.dim() != gmm1.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: gmm0.dim(),
                got: gmm1.dim(),
            });
        }
        Ok(AnalyticDeblender {
            gmm0,
            gmm1,
            subsampling: None,
        })
    }

    /// Keeps `|gmm0| * |gmm1|` within `max_pairs` by uniformly thinning the
    /// larger mixture(s); the thinning is recorded in [`Self::subsampling`].
    pub fn with_budget(
        gmm0: GaussianMixture,
        gmm1: GaussianMixture,
        max_pairs: usize,
    ) -> Result<Self, OracleError> {
        let (n0, n1) = (gmm0.len(), gmm1.len());
        if n0.saturating_mul(n1) <= max_pairs.max(1) {
            return Self::exact(gmm0, gmm1);
        }
        let (mut k0, mut k1) = (n0, n1);
        while k0.saturating_mul(k1) > max_pairs.max(1) {
            if k0 >= k1 {
                k0 = k0.div_ceil(2);
            } else {
                k1 = k1.div_ceil(2);
            }
            if k0 == 1 && k1 == 1 {
                break;
            }
        }
        let g0 = gmm0.strided_subset(n0.div_ceil(k0), 0);
        let g1 = gmm1.strided_subset(n1.div_ceil(k1), 0);
        let kept = (g0.len(), g1.len());
        let mut out = Self::exact(g0, g1)?;
        out.subsampling = Some(Subsampling {
            original: (n0, n1),
            kept,
        });
        Ok(out)
    }

    /// Default construction with [`DEFAULT_PAIR_BUDGET`].
    pub fn new(gmm0: GaussianMixture, gmm1: GaussianMixture) -> Result<Self, OracleError> {
        Self::with_budget(gmm0, gmm1, DEFAULT_PAIR_BUDGET)
    }

    pub fn subsampling(&self) -> Option<Subsampling> {
        self.subsampling
    }

    pub fn source(&self) -> &GaussianMixture {
        &self.gmm0
    }

    pub fn target(&self) -> &GaussianMixture {
        &self.gmm1
    }
}

impl Deblender for AnalyticDeblender {
    fn dim(&self) -> usize {
        self.gmm0.dim()
    }

    fn deblend(&self, x: &Point, alpha: f64) -> Result<DeblendStats, OracleError> {
        analytic_posterior_stats(&self.gmm0, &self.gmm1, x, alpha)
    }
}

/// Deblender whose "difference" is the posterior median of `x1 - x0`
/// instead of its mean. It is what an l1-trained network converges to.
#[derive(Debug, Clone)]
pub struct MedianDeblender {
    gmm0: GaussianMixture,
    gmm1: GaussianMixture,
}

impl MedianDeblender {
    pub fn new(gmm0: GaussianMixture, gmm1: GaussianMixture) -> Result<Self, OracleError> {
        if gmm0.dim() != gmm1.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: gmm0.dim(),
                got: gmm1.dim(),
            });
        }
        Ok(MedianDeblender { gmm0, gmm1 })
    }
}

impl Deblender for MedianDeblender {
    fn dim(&self) -> usize {
        self.gmm0.dim()
    }

    fn deblend(&self, x: &Point, alpha: f64) -> Result<DeblendStats, OracleError> {
        let diff = posterior_median_diff(&self.gmm0, &self.gmm1, x, alpha)?;
        Ok(DeblendStats::from_diff(x, alpha, diff))
    }
}

/// Monte-Carlo deblender. Owns its generator behind a lock, so results
/// depend on call order; drive it from one thread for reproducibility.
#[derive(Debug)]
pub struct MonteCarloDeblender {
    p0: Density,
    p1: Density,
    samples: usize,
    rng: Mutex<Rng>,
}

impl MonteCarloDeblender {
    pub fn new(p0: Density, p1: Density, samples: usize, rng: Rng) -> Result<Self, OracleError> {
        if samples == 0 {
            return Err(OracleError::NoSamples);
        }
        if p0.dim() != p1.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: p0.dim(),
                got: p1.dim(),
            });
        }
        Ok(MonteCarloDeblender {
            p0,
            p1,
            samples,
            rng: Mutex::new(rng),
        })
    }
}

impl Deblender for MonteCarloDeblender {
    fn dim(&self) -> usize {
        self.p0.dim()
    }

    fn deblend(&self, x: &Point, alpha: f64) -> Result<DeblendStats, OracleError> {
        let mut rng = self.rng.lock().expect("rng lock poisoned");
        mc_posterior_stats(&self.p0, &self.p1, x, alpha, self.samples, &mut rng)
    }
}
