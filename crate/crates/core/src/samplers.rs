//! Iterative samplers: the stochastic chain over exact posterior draws, the
//! deterministic chain over posterior expectations, the four equivalent
//! update rules and the midpoint (RK2) integrator.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::densities::GaussianMixture;
use crate::oracle::{posterior_sample, DeblendStats, Deblender, OracleError};
use crate::point::Point;
use crate::rng::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("schedule needs at least one step")]
    EmptySchedule,
    #[error("variant {variant} is undefined at alpha_t = {alpha}")]
    VariantDomain { variant: VariantKind, alpha: f64 },
    #[error("the rk2 integrator is only defined for variant d (got {0})")]
    Rk2RequiresVariantD(VariantKind),
    #[error("the stochastic sampler is defined for uniform schedules only")]
    StochasticNeedsUniform,
    #[error("dimension mismatch: deblender has dimension {expected}, point has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("deblender failed at step {step}: {source}")]
    Oracle {
        step: usize,
        #[source]
        source: OracleError,
    },
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
}

/// Blend-parameter schedule over `T` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `α_t = t / T`
    Uniform { steps: usize },
    /// `α_t = 1 - cos(t/T · π/2)`
    Cosine { steps: usize },
}

impl Schedule {
    pub fn uniform(steps: usize) -> Result<Self, SamplerError> {
        if steps == 0 {
            return Err(SamplerError::EmptySchedule);
        }
        Ok(Schedule::Uniform { steps })
    }

    pub fn cosine(steps: usize) -> Result<Self, SamplerError> {
        if steps == 0 {
            return Err(SamplerError::EmptySchedule);
        }
        Ok(Schedule::Cosine { steps })
    }

    pub fn steps(&self) -> usize {
        match *self {
            Schedule::Uniform { steps } | Schedule::Cosine { steps } => steps,
        }
    }

    /// `α` at a possibly fractional step index; exact 0 and 1 at the ends.
    pub fn alpha_at(&self, t: f64) -> f64 {
        let n = self.steps() as f64;
        if t <= 0.0 {
            return 0.0;
        }
        if t >= n {
            return 1.0;
        }
        match self {
            Schedule::Uniform { .. } => t / n,
            Schedule::Cosine { .. } => 1.0 - (t / n * FRAC_PI_2).cos(),
        }
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha_at(t as f64)
    }

    /// All `T + 1` values.
    pub fn alphas(&self) -> Vec<f64> {
        (0..=self.steps()).map(|t| self.alpha(t)).collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Schedule::Uniform { .. } => "uniform",
            Schedule::Cosine { .. } => "cosine",
        }
    }
}

/// Update rule for one deterministic step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariantKind {
    /// Re-blend both expectations.
    A,
    /// Extrapolate from `x̄0`; divides by `α_t`.
    B,
    /// Extrapolate from `x̄1`; divides by `1 - α_t`.
    C,
    /// Euler step along `x̄1 - x̄0`.
    D,
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VariantKind::A => "a",
            VariantKind::B => "b",
            VariantKind::C => "c",
            VariantKind::D => "d",
        };
        f.write_str(s)
    }
}

impl FromStr for VariantKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(VariantKind::A),
            "b" => Ok(VariantKind::B),
            "c" => Ok(VariantKind::C),
            "d" => Ok(VariantKind::D),
            other => Err(format!("unknown variant '{other}' (expected a, b, c or d)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    /// Midpoint rule: half step, then a full step with the midpoint field.
    Rk2,
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::Euler => "euler",
            Integrator::Rk2 => "rk2",
        })
    }
}

impl FromStr for Integrator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Integrator::Euler),
            "rk2" => Ok(Integrator::Rk2),
            other => Err(format!("unknown integrator '{other}' (expected euler or rk2)")),
        }
    }
}

/// Ordered `(α_t, x_{α_t})` states of one sampler run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub states: Vec<(f64, Point)>,
}

impl Trajectory {
    pub fn endpoint(&self) -> Option<&Point> {
        self.states.last().map(|s| &s.1)
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.0).collect()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// CSV with columns `step,alpha,x0..x(d-1)`.
    pub fn to_csv(&self) -> String {
        let d = self.states.first().map_or(0, |s| s.1.dim());
        let mut out = String::from("step,alpha");
        for axis in 0..d {
            out.push_str(&format!(",x{axis}"));
        }
        out.push('\n');
        for (step, (alpha, x)) in self.states.iter().enumerate() {
            out.push_str(&format!("{step},{alpha}"));
            for c in x.coords() {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

/// One update from `α_t` to `α_{t+1}` under the given rule.
pub fn step_variant(
    kind: VariantKind,
    x: &Point,
    alpha_t: f64,
    alpha_next: f64,
    stats: &DeblendStats,
) -> Result<Point, SamplerError> {
    let out = match kind {
        VariantKind::A => stats.xbar0.lincomb(1.0 - alpha_next, &stats.xbar1, alpha_next),
        VariantKind::B => {
            if alpha_t <= 0.0 {
                return Err(SamplerError::VariantDomain { variant: kind, alpha: alpha_t });
            }
            let ratio = alpha_next / alpha_t;
            stats.xbar0.lincomb(1.0 - ratio, x, ratio)
        }
        VariantKind::C => {
            if alpha_t >= 1.0 {
                return Err(SamplerError::VariantDomain { variant: kind, alpha: alpha_t });
            }
            let ratio = (1.0 - alpha_next) / (1.0 - alpha_t);
            stats.xbar1.lincomb(1.0 - ratio, x, ratio)
        }
        VariantKind::D => x.add_scaled(&stats.diff, alpha_next - alpha_t),
    };
    Ok(out)
}

fn check_config(variant: VariantKind, integrator: Integrator) -> Result<(), SamplerError> {
    if integrator == Integrator::Rk2 && variant != VariantKind::D {
        return Err(SamplerError::Rk2RequiresVariantD(variant));
    }
    Ok(())
}

/// Failure of one point inside a batch run.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub index: usize,
    pub error: SamplerError,
}

/// Result of pushing a batch of points through the deterministic sampler.
#[derive(Debug, Clone)]
pub struct BatchRun {
    /// Final states; `None` for points that failed.
    pub endpoints: Vec<Option<Point>>,
    /// `(step index, states)` for every requested snapshot step.
    pub snapshots: Vec<(usize, Vec<Option<Point>>)>,
    pub failures: Vec<PointFailure>,
}

/// Deterministic transport of many points in lockstep. All points see the
/// same step sequence, so each one follows exactly the path
/// [`sample_deterministic`] would give it; batching only lets the
/// deblender evaluate a whole step at once.
///
/// `snapshot_steps` lists step indices (0..=T) whose states are recorded.
pub fn transport_batch(
    deblender: &dyn Deblender,
    starts: &[Point],
    schedule: Schedule,
    variant: VariantKind,
    integrator: Integrator,
    snapshot_steps: &[usize],
) -> Result<BatchRun, SamplerError> {
    check_config(variant, integrator)?;
    if let Some(p) = starts.iter().find(|p| p.dim() != deblender.dim()) {
        return Err(SamplerError::DimensionMismatch {
            expected: deblender.dim(),
            got: p.dim(),
        });
    }
    let mut states: Vec<Option<Point>> = starts.iter().cloned().map(Some).collect();
    let mut failures = Vec::new();
    let mut snapshots = Vec::new();
    if snapshot_steps.contains(&0) {
        snapshots.push((0, states.clone()));
    }
    let steps = schedule.steps();
    for t in 0..steps {
        let a_t = schedule.alpha(t);
        let a_next = schedule.alpha(t + 1);
        let active: Vec<usize> = (0..states.len()).filter(|&i| states[i].is_some()).collect();
        if active.is_empty() {
            break;
        }
        let xs: Vec<Point> = active
            .iter()
            .map(|&i| states[i].clone().expect("active"))
            .collect();
        let results = step_batch(deblender, &xs, t, a_t, a_next, schedule, variant, integrator);
        for (&i, res) in active.iter().zip(results) {
            match res {
                Ok(x) => states[i] = Some(x),
                Err(error) => {
                    states[i] = None;
                    failures.push(PointFailure { index: i, error });
                }
            }
        }
        if snapshot_steps.contains(&(t + 1)) {
            snapshots.push((t + 1, states.clone()));
        }
    }
    failures.sort_by_key(|f| f.index);
    Ok(BatchRun {
        endpoints: states,
        snapshots,
        failures,
    })
}

#[allow(clippy::too_many_arguments)]
fn step_batch(
    deblender: &dyn Deblender,
    xs: &[Point],
    t: usize,
    a_t: f64,
    a_next: f64,
    schedule: Schedule,
    variant: VariantKind,
    integrator: Integrator,
) -> Vec<Result<Point, SamplerError>> {
    let oracle_err = |source| SamplerError::Oracle { step: t, source };
    let finite = |x: Point| {
        if x.is_finite() {
            Ok(x)
        } else {
            Err(SamplerError::NonFinite { step: t + 1 })
        }
    };
    let first = deblender.deblend_many(xs, a_t);
    match integrator {
        Integrator::Euler => {
            // Variant b divides by α_t, so its first step from α = 0 is a
            // variant-d step; every later step is a genuine b update.
            let rule = if variant == VariantKind::B && a_t == 0.0 {
                VariantKind::D
            } else {
                variant
            };
            xs.iter()
                .zip(first)
                .map(|(x, stats)| {
                    let stats = stats.map_err(oracle_err)?;
                    finite(step_variant(rule, x, a_t, a_next, &stats)?)
                })
                .collect()
        }
        Integrator::Rk2 => {
            let a_mid = schedule.alpha_at(t as f64 + 0.5);
            let mut out: Vec<Option<Result<Point, SamplerError>>> = vec![None; xs.len()];
            let mut mids = Vec::with_capacity(xs.len());
            let mut mid_owner = Vec::with_capacity(xs.len());
            for (k, (x, stats)) in xs.iter().zip(first).enumerate() {
                match stats {
                    Ok(s) => {
                        mids.push(x.add_scaled(&s.diff, a_mid - a_t));
                        mid_owner.push(k);
                    }
                    Err(e) => out[k] = Some(Err(oracle_err(e))),
                }
            }
            let second = deblender.deblend_many(&mids, a_mid);
            for (k, stats) in mid_owner.into_iter().zip(second) {
                out[k] = Some(
                    stats
                        .map_err(oracle_err)
                        .and_then(|s| finite(xs[k].add_scaled(&s.diff, a_next - a_t))),
                );
            }
            out.into_iter().map(|r| r.expect("every point handled")).collect()
        }
    }
}

/// Deterministic sampler from `x0` at `α = 0` to `α = 1`, recording every
/// state.
pub fn sample_deterministic(
    deblender: &dyn Deblender,
    x0: &Point,
    schedule: Schedule,
    variant: VariantKind,
    integrator: Integrator,
) -> Result<Trajectory, SamplerError> {
    let all: Vec<usize> = (0..=schedule.steps()).collect();
    let mut run = transport_batch(
        deblender,
        std::slice::from_ref(x0),
        schedule,
        variant,
        integrator,
        &all,
    )?;
    if let Some(f) = run.failures.pop() {
        return Err(f.error);
    }
    let alphas = schedule.alphas();
    Ok(Trajectory {
        states: run
            .snapshots
            .into_iter()
            .map(|(t, mut s)| (alphas[t], s.pop().flatten().expect("no failure")))
            .collect(),
    })
}

/// Endpoint of the deterministic sampler without recording the path.
pub fn transport(
    deblender: &dyn Deblender,
    x0: &Point,
    schedule: Schedule,
    variant: VariantKind,
    integrator: Integrator,
) -> Result<Point, SamplerError> {
    let mut run = transport_batch(
        deblender,
        std::slice::from_ref(x0),
        schedule,
        variant,
        integrator,
        &[],
    )?;
    if let Some(f) = run.failures.pop() {
        return Err(f.error);
    }
    Ok(run.endpoints.pop().flatten().expect("no failure"))
}

/// Stochastic sampler: at every step draw an exact posterior pair at `α_t`
/// and re-blend it at `α_{t+1}`.
pub fn sample_stochastic(
    gmm0: &GaussianMixture,
    gmm1: &GaussianMixture,
    x0: &Point,
    schedule: Schedule,
    rng: &mut Rng,
) -> Result<Trajectory, SamplerError> {
    if !matches!(schedule, Schedule::Uniform { .. }) {
        return Err(SamplerError::StochasticNeedsUniform);
    }
    let mut x = x0.clone();
    let mut states = Vec::with_capacity(schedule.steps() + 1);
    states.push((0.0, x.clone()));
    for t in 0..schedule.steps() {
        let a_t = schedule.alpha(t);
        let a_next = schedule.alpha(t + 1);
        let (p0, p1) = posterior_sample(gmm0, gmm1, &x, a_t, rng)
            .map_err(|source| SamplerError::Oracle { step: t, source })?;
        x = p0.lincomb(1.0 - a_next, &p1, a_next);
        states.push((a_next, x.clone()));
    }
    Ok(Trajectory { states })
}

/// Errors from [`warp`], one entry per failed point.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{} of the warped points failed (first: point {} - {})", failures.len(), failures[0].index, failures[0].error)]
pub struct WarpError {
    pub failures: Vec<PointFailure>,
}

/// Pushes every point through the deterministic sampler, preserving order.
pub fn warp(
    points: &[Point],
    deblender: &dyn Deblender,
    schedule: Schedule,
    variant: VariantKind,
    integrator: Integrator,
) -> Result<Vec<Point>, WarpError> {
    let run = transport_batch(deblender, points, schedule, variant, integrator, &[]).map_err(
        |error| WarpError {
            failures: vec![PointFailure { index: 0, error }],
        },
    )?;
    if !run.failures.is_empty() {
        return Err(WarpError {
            failures: run.failures,
        });
    }
    Ok(run.endpoints.into_iter().map(|p| p.expect("no failure")).collect())
}

/// [`warp`] split into chunks that run on the rayon pool. Chunking is fixed
/// by `chunk`, so the output does not depend on the thread count.
pub fn warp_parallel(
    points: &[Point],
    deblender: &dyn Deblender,
    schedule: Schedule,
    variant: VariantKind,
    integrator: Integrator,
    chunk: usize,
) -> Result<Vec<Point>, WarpError> {
    let chunk = chunk.max(1);
    let parts: Vec<Result<Vec<Point>, WarpError>> = points
        .par_chunks(chunk)
        .enumerate()
        .map(|(c, pts)| {
            warp(pts, deblender, schedule, variant, integrator).map_err(|mut e| {
                for f in &mut e.failures {
                    f.index += c * chunk;
                }
                e
            })
        })
        .collect();
    let mut out = Vec::with_capacity(points.len());
    let mut failures = Vec::new();
    for part in parts {
        match part {
            Ok(p) => out.extend(p),
            Err(e) => failures.extend(e.failures),
        }
    }
    if failures.is_empty() {
        Ok(out)
    } else {
        Err(WarpError { failures })
    }
}
