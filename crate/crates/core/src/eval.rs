//! Distribution metrics, reference generators and convergence studies.

use std::f64::consts::PI;

use rand::Rng as _;
use rayon::prelude::*;
use thiserror::Error;

use crate::densities::{Density, GaussianMixture};
use crate::oracle::{AnalyticDeblender, OracleError};
use crate::point::Point;
use crate::rng::{Rng, SeedStreams};
use crate::samplers::{
    sample_stochastic, transport, Integrator, SamplerError, Schedule, VariantKind,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("empty sample set")]
    Empty,
    #[error("blend parameter {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// `count` draws of `(1-α) x0 + α x1` with independent `x0 ~ p0`, `x1 ~ p1`.
pub fn blended_reference(
    p0: &Density,
    p1: &Density,
    alpha: f64,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<Point>, EvalError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(EvalError::InvalidAlpha(alpha));
    }
    if p0.dim() != p1.dim() {
        return Err(EvalError::DimensionMismatch {
            expected: p0.dim(),
            got: p1.dim(),
        });
    }
    Ok((0..count)
        .map(|_| {
            let x0 = p0.sample_one(rng);
            let x1 = p1.sample_one(rng);
            x0.lincomb(1.0 - alpha, &x1, alpha)
        })
        .collect())
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Empirical 1-Wasserstein distance between two 1D sample sets.
///
/// Integrates the gap between the two empirical quantile functions; with
/// equal sizes this is the mean absolute difference of the sorted samples.
pub fn wasserstein1_1d(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::Empty);
    }
    let (sa, sb) = (sorted(a), sorted(b));
    if sa.len() == sb.len() {
        let total: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum();
        return Ok(total / sa.len() as f64);
    }
    let (n, m) = (sa.len(), sb.len());
    let (mut i, mut j) = (0, 0);
    let mut q = 0.0;
    let mut total = 0.0;
    while i < n && j < m {
        let qa = (i + 1) as f64 / n as f64;
        let qb = (j + 1) as f64 / m as f64;
        let next = qa.min(qb);
        total += (next - q) * (sa[i] - sb[j]).abs();
        q = next;
        // Compare in integer arithmetic so coincident breakpoints advance
        // both sides together.
        let (ka, kb) = ((i + 1) * m, (j + 1) * n);
        if ka <= kb {
            i += 1;
        }
        if kb <= ka {
            j += 1;
        }
    }
    Ok(total)
}

/// First coordinate of each point.
pub fn first_axis(points: &[Point]) -> Vec<f64> {
    points.iter().map(|p| p[0]).collect()
}

/// W1 between two sets of 1D points.
pub fn wasserstein1_points(a: &[Point], b: &[Point]) -> Result<f64, EvalError> {
    for p in a.iter().chain(b) {
        if p.dim() != 1 {
            return Err(EvalError::DimensionMismatch { expected: 1, got: p.dim() });
        }
    }
    wasserstein1_1d(&first_axis(a), &first_axis(b))
}

/// Average 1D W1 over `projections` uniformly random directions in the
/// plane.
pub fn sliced_wasserstein(
    a: &[Point],
    b: &[Point],
    projections: usize,
    rng: &mut Rng,
) -> Result<f64, EvalError> {
    if projections == 0 {
        return Err(EvalError::InvalidArgument("projections must be at least 1".into()));
    }
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(p) = a.iter().chain(b).find(|p| p.dim() != 2) {
        return Err(EvalError::DimensionMismatch { expected: 2, got: p.dim() });
    }
    let mut total = 0.0;
    for _ in 0..projections {
        let theta = 2.0 * PI * rng.random::<f64>();
        let (c, s) = (theta.cos(), theta.sin());
        let pa: Vec<f64> = a.iter().map(|p| c * p[0] + s * p[1]).collect();
        let pb: Vec<f64> = b.iter().map(|p| c * p[0] + s * p[1]).collect();
        total += wasserstein1_1d(&pa, &pb)?;
    }
    Ok(total / projections as f64)
}

/// Fixed-range histogram. Samples outside `[lo, hi)` are not counted.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram1d {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram1d {
    pub fn new(lo: f64, hi: f64, bin_count: usize) -> Result<Self, EvalError> {
        if !(hi > lo) || bin_count == 0 {
            return Err(EvalError::InvalidArgument(format!(
                "histogram needs hi > lo and at least one bin (lo={lo}, hi={hi}, bins={bin_count})"
            )));
        }
        Ok(Histogram1d {
            lo,
            hi,
            counts: vec![0; bin_count],
        })
    }

    pub fn from_samples(lo: f64, hi: f64, bin_count: usize, samples: &[f64]) -> Result<Self, EvalError> {
        let mut h = Self::new(lo, hi, bin_count)?;
        for s in samples {
            h.add(*s);
        }
        Ok(h)
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn add(&mut self, v: f64) {
        if v >= self.lo && v < self.hi {
            let k = ((v - self.lo) / self.bin_width()) as usize;
            let last = self.counts.len() - 1;
            self.counts[k.min(last)] += 1;
        }
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.bin_width()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// CSV with columns `bin_center,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{c}\n", self.bin_center(k)));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord {
    pub steps: usize,
    pub mean_endpoint_deviation: f64,
}

/// Mean distance between stochastic and deterministic endpoints, per `T`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceReport {
    pub records: Vec<ConvergenceRecord>,
}

impl ConvergenceReport {
    pub fn deviation(&self, steps: usize) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.steps == steps)
            .map(|r| r.mean_endpoint_deviation)
    }

    /// CSV with columns `steps,mean_endpoint_deviation`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("steps,mean_endpoint_deviation\n");
        for r in &self.records {
            out.push_str(&format!("{},{}\n", r.steps, r.mean_endpoint_deviation));
        }
        out
    }
}

/// For each `T`, runs the stochastic chain `chains_per_start` times from
/// every start and the deterministic chain (exact expectations, Euler, same
/// uniform schedule) once, and averages the endpoint distances.
///
/// Chains draw from `streams.substream("converge-T{T}", start * chains +
/// chain)`, so the report does not depend on the thread count.
pub fn convergence_study(
    gmm0: &GaussianMixture,
    gmm1: &GaussianMixture,
    starts: &[Point],
    ts: &[usize],
    chains_per_start: usize,
    streams: &SeedStreams,
) -> Result<ConvergenceReport, EvalError> {
    if ts.is_empty() || starts.is_empty() || chains_per_start == 0 {
        return Err(EvalError::InvalidArgument(
            "convergence study needs steps, starts and at least one chain".into(),
        ));
    }
    if ts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidArgument("step counts must be strictly increasing".into()));
    }
    let deblender = AnalyticDeblender::exact(gmm0.clone(), gmm1.clone())?;
    let mut records = Vec::with_capacity(ts.len());
    for &steps in ts {
        let schedule = Schedule::uniform(steps)?;
        let label = format!("converge-T{steps}");
        let per_start: Vec<Result<f64, EvalError>> = starts
            .par_iter()
            .enumerate()
            .map(|(s, x0)| {
                let det = transport(&deblender, x0, schedule, VariantKind::A, Integrator::Euler)?;
                let mut total = 0.0;
                for c in 0..chains_per_start {
                    let mut rng = streams.substream(&label, (s * chains_per_start + c) as u64);
                    let tr = sample_stochastic(gmm0, gmm1, x0, schedule, &mut rng)?;
                    total += tr.endpoint().expect("non-empty").distance(&det);
                }
                Ok(total / chains_per_start as f64)
            })
            .collect();
        let mut sum = 0.0;
        for d in per_start {
            sum += d?;
        }
        records.push(ConvergenceRecord {
            steps,
            mean_endpoint_deviation: sum / starts.len() as f64,
        });
    }
    Ok(ConvergenceReport { records })
}

/// Checkerboard cell parity of a point in the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckerLabel {
    pub label: u8,
    /// The point lay outside `[0, 1]²` and was clamped onto it.
    pub clamped: bool,
}

/// `(⌊u·cells⌋ + ⌊v·cells⌋) mod 2` for each point.
pub fn checkerboard_labels(sources: &[Point], cells_per_axis: usize) -> Result<Vec<CheckerLabel>, EvalError> {
    if cells_per_axis == 0 {
        return Err(EvalError::InvalidArgument("cells_per_axis must be at least 1".into()));
    }
    let cells = cells_per_axis as f64;
    sources
        .iter()
        .map(|p| {
            if p.dim() != 2 {
                return Err(EvalError::DimensionMismatch { expected: 2, got: p.dim() });
            }
            let clamped = !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]);
            let cell = |v: f64| ((v.clamp(0.0, 1.0) * cells).floor() as usize).min(cells_per_axis - 1);
            Ok(CheckerLabel {
                label: ((cell(p[0]) + cell(p[1])) % 2) as u8,
                clamped,
            })
        })
        .collect()
}
