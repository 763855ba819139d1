//! Source and target densities: diagonal Gaussian mixtures, uniform regions
//! and kernelized point clouds.

use std::borrow::Cow;
use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::point::Point;
use crate::rng::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Smallest kernel bandwidth a point cloud may default to. A zero-width
/// kernel would make the cloud a sum of Diracs with no finite posterior
/// variance.
pub const MIN_BANDWIDTH: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("dimension mismatch: density has dimension {expected}, point has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid density parameter: {0}")]
    InvalidParameter(String),
}

fn invalid(msg: impl Into<String>) -> DensityError {
    DensityError::InvalidParameter(msg.into())
}

fn check_dim(expected: usize, x: &Point) -> Result<(), DensityError> {
    if x.dim() != expected {
        return Err(DensityError::DimensionMismatch {
            expected,
            got: x.dim(),
        });
    }
    Ok(())
}

/// `ln sum exp(v)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log density of a diagonal Gaussian.
pub(crate) fn diag_normal_log_pdf(x: &[f64], mean: &[f64], stddev: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(stddev)
        .map(|((xi, mi), si)| {
            let z = (xi - mi) / si;
            -0.5 * (z * z + LN_2PI) - si.ln()
        })
        .sum()
}

fn standard_normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// One weighted, axis-aligned Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Point,
    pub stddev: Vec<f64>,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: Point, stddev: Vec<f64>) -> Result<Self, DensityError> {
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(invalid(format!("component weight {weight} not in (0, 1]")));
        }
        if !mean.is_finite() || mean.dim() == 0 {
            return Err(invalid("component mean must be a finite, non-empty point"));
        }
        if stddev.len() != mean.dim() {
            return Err(invalid(format!(
                "component has {} stddev entries for a {}-dimensional mean",
                stddev.len(),
                mean.dim()
            )));
        }
        if stddev.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid("component stddev entries must be positive and finite"));
        }
        Ok(GaussianComponent { weight, mean, stddev })
    }

    /// Same stddev on every axis.
    pub fn isotropic(weight: f64, mean: Point, stddev: f64) -> Result<Self, DensityError> {
        let d = mean.dim();
        Self::new(weight, mean, vec![stddev; d])
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }
}

/// Finite mixture of diagonal Gaussians with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
    dim: usize,
    cumulative: Vec<f64>,
}

impl GaussianMixture {
    /// Validates that the components share a dimension and that the weights
    /// sum to one within 1e-12.
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self, DensityError> {
        let Some(first) = components.first() else {
            return Err(invalid("a mixture needs at least one component"));
        };
        let dim = first.dim();
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(invalid(format!(
                "mixture mixes dimensions {dim} and {}",
                c.dim()
            )));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("mixture weights sum to {total}, expected 1")));
        }
        let mut acc = 0.0;
        let cumulative = components
            .iter()
            .map(|c| {
                acc += c.weight;
                acc
            })
            .collect();
        Ok(GaussianMixture {
            components,
            dim,
            cumulative,
        })
    }

    /// Builds a mixture from unnormalized positive weights.
    pub fn normalized(
        parts: impl IntoIterator<Item = (f64, Point, Vec<f64>)>,
    ) -> Result<Self, DensityError> {
        let parts: Vec<_> = parts.into_iter().collect();
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(invalid("mixture weights must be positive"));
        }
        let components = parts
            .into_iter()
            .map(|(w, m, s)| GaussianComponent::new(w / total, m, s))
            .collect::<Result<Vec<_>, _>>()?;
        // Re-normalize once more so the sum is within rounding of 1.
        let total: f64 = components.iter().map(|c| c.weight).sum();
        let components = components
            .into_iter()
            .map(|mut c| {
                c.weight /= total;
                c
            })
            .collect();
        Self::new(components)
    }

    /// Single Gaussian with the same stddev on every axis.
    pub fn isotropic_normal(mean: Point, stddev: f64) -> Result<Self, DensityError> {
        Self::new(vec![GaussianComponent::isotropic(1.0, mean, stddev)?])
    }

    /// 1D equal-weight mixture with a shared stddev, e.g. the bi-Normal
    /// `{-0.5, 0.5}` with stddev 0.1.
    pub fn equal_weight_1d(means: &[f64], stddev: f64) -> Result<Self, DensityError> {
        Self::normalized(
            means
                .iter()
                .map(|m| (1.0, Point::scalar(*m), vec![stddev])),
        )
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> Point {
        let mut m = vec![0.0; self.dim];
        for c in &self.components {
            for (acc, v) in m.iter_mut().zip(c.mean.coords()) {
                *acc += c.weight * v;
            }
        }
        Point::new(m)
    }

    pub fn log_pdf(&self, x: &Point) -> Result<f64, DensityError> {
        check_dim(self.dim, x)?;
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.weight.ln() + diag_normal_log_pdf(x.coords(), c.mean.coords(), &c.stddev))
            .collect();
        Ok(log_sum_exp(&terms))
    }

    /// Index of the component selected by a uniform draw `u` in [0, 1).
    pub(crate) fn component_for(&self, u: f64) -> usize {
        let target = u * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .partition_point(|c| *c <= target)
            .min(self.components.len() - 1)
    }

    pub fn sample_one(&self, rng: &mut Rng) -> Point {
        let c = &self.components[self.component_for(rng.random::<f64>())];
        Point::new(
            c.mean
                .coords()
                .iter()
                .zip(&c.stddev)
                .map(|(m, s)| m + s * standard_normal(rng))
                .collect(),
        )
    }

    /// Keeps every `stride`-th component (starting at `offset`) and
    /// renormalizes the weights. Used to fit pair-count budgets.
    pub fn strided_subset(&self, stride: usize, offset: usize) -> GaussianMixture {
        let stride = stride.max(1);
        let kept: Vec<_> = self
            .components
            .iter()
            .skip(offset % stride)
            .step_by(stride)
            .map(|c| (c.weight, c.mean.clone(), c.stddev.clone()))
            .collect();
        GaussianMixture::normalized(kept).expect("a subset of a valid mixture is valid")
    }
}

/// Uniform density over a region.
#[derive(Debug, Clone, PartialEq)]
pub enum UniformRegion {
    /// Axis-aligned box in any dimension (an interval in 1D).
    Rect { min: Point, max: Point },
    /// Disk in the plane.
    Disk { center: Point, radius: f64 },
}

impl UniformRegion {
    pub fn rect(min: Point, max: Point) -> Result<Self, DensityError> {
        if min.dim() != max.dim() || min.dim() == 0 {
            return Err(invalid("rectangle corners must share a non-zero dimension"));
        }
        if !(min.is_finite() && max.is_finite()) {
            return Err(invalid("rectangle corners must be finite"));
        }
        if min.coords().iter().zip(max.coords()).any(|(a, b)| a >= b) {
            return Err(invalid("rectangle max corner must strictly dominate min corner"));
        }
        Ok(UniformRegion::Rect { min, max })
    }

    pub fn unit_square() -> Self {
        UniformRegion::Rect {
            min: Point::from([0.0, 0.0]),
            max: Point::from([1.0, 1.0]),
        }
    }

    pub fn disk(center: Point, radius: f64) -> Result<Self, DensityError> {
        if center.dim() != 2 || !center.is_finite() {
            return Err(invalid("disk center must be a finite 2D point"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("disk radius {radius} must be positive")));
        }
        Ok(UniformRegion::Disk { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            UniformRegion::Rect { min, .. } => min.dim(),
            UniformRegion::Disk { .. } => 2,
        }
    }

    /// Lebesgue measure of the region.
    pub fn volume(&self) -> f64 {
        match self {
            UniformRegion::Rect { min, max } => min
                .coords()
                .iter()
                .zip(max.coords())
                .map(|(a, b)| b - a)
                .product(),
            UniformRegion::Disk { radius, .. } => PI * radius * radius,
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        match self {
            UniformRegion::Rect { min, max } => x
                .coords()
                .iter()
                .zip(min.coords().iter().zip(max.coords()))
                .all(|(v, (a, b))| *v >= *a && *v <= *b),
            UniformRegion::Disk { center, radius } => x.distance(center) <= *radius,
        }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            UniformRegion::Rect { min, max } => (min.clone(), max.clone()),
            UniformRegion::Disk { center, radius } => (
                Point::new(center.coords().iter().map(|c| c - radius).collect()),
                Point::new(center.coords().iter().map(|c| c + radius).collect()),
            ),
        }
    }

    pub fn sample_one(&self, rng: &mut Rng) -> Point {
        match self {
            UniformRegion::Rect { min, max } => Point::new(
                min.coords()
                    .iter()
                    .zip(max.coords())
                    .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                    .collect(),
            ),
            UniformRegion::Disk { center, radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let theta = 2.0 * PI * rng.random::<f64>();
                Point::from([center[0] + r * theta.cos(), center[1] + r * theta.sin()])
            }
        }
    }

    /// Kernelized approximation: one Gaussian kernel on each cell center of a
    /// `cells_per_axis`-per-axis grid over the bounding box that lies inside
    /// the region. The bandwidth defaults to half the cell size.
    pub fn to_point_cloud(
        &self,
        cells_per_axis: usize,
        bandwidth: Option<f64>,
    ) -> Result<PointCloudDensity, DensityError> {
        if cells_per_axis == 0 {
            return Err(invalid("kernel grid needs at least one cell per axis"));
        }
        let (lo, hi) = self.bounding_box();
        let d = self.dim();
        let n = cells_per_axis;
        let total = n.checked_pow(d as u32).ok_or_else(|| invalid("kernel grid too large"))?;
        let mut points = Vec::new();
        for flat in 0..total {
            let mut rem = flat;
            let coords: Vec<f64> = (0..d)
                .map(|axis| {
                    let k = rem % n;
                    rem /= n;
                    lo[axis] + (k as f64 + 0.5) / n as f64 * (hi[axis] - lo[axis])
                })
                .collect();
            let p = Point::new(coords);
            if self.contains(&p) {
                points.push(p);
            }
        }
        let cell = (0..d)
            .map(|axis| (hi[axis] - lo[axis]) / n as f64)
            .fold(f64::INFINITY, f64::min);
        PointCloudDensity::new(points, bandwidth.unwrap_or(0.5 * cell))
    }
}

/// Equal-weight isotropic Gaussian kernels centred on a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudDensity {
    points: Vec<Point>,
    bandwidth: f64,
}

impl PointCloudDensity {
    pub fn new(points: Vec<Point>, bandwidth: f64) -> Result<Self, DensityError> {
        let Some(first) = points.first() else {
            return Err(invalid("a point cloud needs at least one point"));
        };
        let d = first.dim();
        if d == 0 || points.iter().any(|p| p.dim() != d || !p.is_finite()) {
            return Err(invalid("point cloud points must be finite and share a dimension"));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid(format!("bandwidth {bandwidth} must be positive")));
        }
        Ok(PointCloudDensity { points, bandwidth })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn to_gaussian_mixture(&self) -> GaussianMixture {
        let w = 1.0 / self.points.len() as f64;
        let d = self.dim();
        let components = self
            .points
            .iter()
            .map(|p| GaussianComponent {
                weight: w,
                mean: p.clone(),
                stddev: vec![self.bandwidth; d],
            })
            .collect::<Vec<_>>();
        // n * (1/n) can miss 1 by a few ulps; that is well inside the 1e-12
        // tolerance for any cloud we can hold in memory.
        GaussianMixture::new(components).expect("point cloud mixture is valid")
    }

    pub fn log_pdf(&self, x: &Point) -> Result<f64, DensityError> {
        check_dim(self.dim(), x)?;
        let w = (1.0 / self.points.len() as f64).ln();
        let stddev = vec![self.bandwidth; self.dim()];
        let terms: Vec<f64> = self
            .points
            .iter()
            .map(|p| w + diag_normal_log_pdf(x.coords(), p.coords(), &stddev))
            .collect();
        Ok(log_sum_exp(&terms))
    }

    pub fn sample_one(&self, rng: &mut Rng) -> Point {
        let p = &self.points[rng.random_range(0..self.points.len())];
        Point::new(
            p.coords()
                .iter()
                .map(|c| c + self.bandwidth * standard_normal(rng))
                .collect(),
        )
    }
}

/// A source or target density.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Mixture(GaussianMixture),
    Uniform(UniformRegion),
    PointCloud(PointCloudDensity),
}

impl From<GaussianMixture> for Density {
    fn from(g: GaussianMixture) -> Self {
        Density::Mixture(g)
    }
}

impl From<UniformRegion> for Density {
    fn from(u: UniformRegion) -> Self {
        Density::Uniform(u)
    }
}

impl From<PointCloudDensity> for Density {
    fn from(p: PointCloudDensity) -> Self {
        Density::PointCloud(p)
    }
}

impl Density {
    pub fn dim(&self) -> usize {
        match self {
            Density::Mixture(g) => g.dim(),
            Density::Uniform(u) => u.dim(),
            Density::PointCloud(p) => p.dim(),
        }
    }

    pub fn sample_one(&self, rng: &mut Rng) -> Point {
        match self {
            Density::Mixture(g) => g.sample_one(rng),
            Density::Uniform(u) => u.sample_one(rng),
            Density::PointCloud(p) => p.sample_one(rng),
        }
    }

    /// `count` i.i.d. draws; the sequence is a pure function of the
    /// generator state.
    pub fn sample(&self, count: usize, rng: &mut Rng) -> Vec<Point> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }

    pub fn log_pdf(&self, x: &Point) -> Result<f64, DensityError> {
        match self {
            Density::Mixture(g) => g.log_pdf(x),
            Density::PointCloud(p) => p.log_pdf(x),
            Density::Uniform(u) => {
                check_dim(u.dim(), x)?;
                Ok(if u.contains(x) {
                    -u.volume().ln()
                } else {
                    f64::NEG_INFINITY
                })
            }
        }
    }

    pub fn pdf(&self, x: &Point) -> Result<f64, DensityError> {
        self.log_pdf(x).map(f64::exp)
    }

    /// The mixture itself, a point cloud's kernel mixture, or `None` for a
    /// uniform region.
    pub fn as_gaussian_mixture(&self) -> Option<Cow<'_, GaussianMixture>> {
        match self {
            Density::Mixture(g) => Some(Cow::Borrowed(g)),
            Density::PointCloud(p) => Some(Cow::Owned(p.to_gaussian_mixture())),
            Density::Uniform(_) => None,
        }
    }

    /// A box holding essentially all of the mass (6 stddevs past every
    /// Gaussian).
    pub fn bounding_box(&self) -> (Point, Point) {
        let gaussian_box = |g: &GaussianMixture| {
            let d = g.dim();
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for c in g.components() {
                for axis in 0..d {
                    lo[axis] = lo[axis].min(c.mean[axis] - 6.0 * c.stddev[axis]);
                    hi[axis] = hi[axis].max(c.mean[axis] + 6.0 * c.stddev[axis]);
                }
            }
            (Point::new(lo), Point::new(hi))
        };
        match self {
            Density::Mixture(g) => gaussian_box(g),
            Density::PointCloud(p) => gaussian_box(&p.to_gaussian_mixture()),
            Density::Uniform(u) => u.bounding_box(),
        }
    }
}

/// Stratified parameter grid `t_k = lo + (k + 1/2)/n * (hi - lo)`.
fn stratified(count: usize, lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..count).map(move |k| lo + (k as f64 + 0.5) / count as f64 * (hi - lo))
}

fn jittered_cloud(
    base: impl Iterator<Item = (f64, f64)>,
    noise: f64,
    rng: &mut Rng,
) -> Result<PointCloudDensity, DensityError> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(invalid(format!("noise {noise} must be non-negative")));
    }
    let points: Vec<Point> = base
        .map(|(x, y)| {
            if noise > 0.0 {
                Point::from([x + noise * standard_normal(rng), y + noise * standard_normal(rng)])
            } else {
                Point::from([x, y])
            }
        })
        .collect();
    PointCloudDensity::new(points, noise.max(MIN_BANDWIDTH))
}

/// S-shaped curve in the unit box: `t` in [-3π/2, 3π/2] maps to
/// `(sin t, sign(t)(cos t - 1)/2)`, plus isotropic jitter of scale `noise`.
/// The kernel bandwidth is `max(noise, MIN_BANDWIDTH)`.
pub fn make_scurve(count: usize, noise: f64, rng: &mut Rng) -> Result<PointCloudDensity, DensityError> {
    if count == 0 {
        return Err(invalid("point count must be at least 1"));
    }
    let base = stratified(count, -1.5 * PI, 1.5 * PI)
        .map(|t| (t.sin(), 0.5 * sign(t) * (t.cos() - 1.0)));
    jittered_cloud(base, noise, rng)
}

/// Swiss roll: `t` in [1.5π, 4.5π] maps to `(t cos t, t sin t) / 4.5π`.
pub fn make_swiss_roll(
    count: usize,
    noise: f64,
    rng: &mut Rng,
) -> Result<PointCloudDensity, DensityError> {
    if count == 0 {
        return Err(invalid("point count must be at least 1"));
    }
    let scale = 4.5 * PI;
    let base = stratified(count, 1.5 * PI, 4.5 * PI)
        .map(move |t| (t * t.cos() / scale, t * t.sin() / scale));
    jittered_cloud(base, noise, rng)
}

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStreams;

    fn rng() -> Rng {
        SeedStreams::new(11).stream("densities")
    }

    fn std_normal() -> Density {
        GaussianMixture::isotropic_normal(Point::scalar(0.0), 1.0)
            .unwrap()
            .into()
    }

    /// Midpoint-rule integral of the pdf over a `cells^d` grid on `[lo, hi]`.
    fn quadrature(density: &Density, lo: &Point, hi: &Point, cells: usize) -> f64 {
        let d = density.dim();
        let h: Vec<f64> = (0..d).map(|a| (hi[a] - lo[a]) / cells as f64).collect();
        let cell_volume: f64 = h.iter().product();
        let mut total = 0.0;
        for flat in 0..cells.pow(d as u32) {
            let mut rem = flat;
            let x: Vec<f64> = (0..d)
                .map(|a| {
                    let k = rem % cells;
                    rem /= cells;
                    lo[a] + (k as f64 + 0.5) * h[a]
                })
                .collect();
            total += density.pdf(&Point::new(x)).unwrap();
        }
        total * cell_volume
    }

    #[test]
    fn normal_pdf_at_zero() {
        let p = std_normal().pdf(&Point::scalar(0.0)).unwrap();
        assert!((p - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn disk_pdf_inside_and_outside() {
        let disk: Density = UniformRegion::disk(Point::from([0.0, 0.0]), 1.0).unwrap().into();
        let inside = disk.pdf(&Point::from([0.3, -0.2])).unwrap();
        assert!((inside - 1.0 / PI).abs() < 1e-15);
        assert_eq!(disk.pdf(&Point::from([1.0, 0.5])).unwrap(), 0.0);
    }

    #[test]
    fn two_component_mixture_pdf() {
        let g: Density = GaussianMixture::equal_weight_1d(&[-1.0, 1.0], 1.0).unwrap().into();
        let p = g.pdf(&Point::scalar(0.0)).unwrap();
        let expected = (-0.5f64).exp() / (2.0 * PI).sqrt();
        assert!((p - expected).abs() < 1e-15);
        assert!((p - 0.241_971).abs() < 1e-6);
        // The mass of the same density is one by quadrature.
        let mass = quadrature(&g, &Point::scalar(-9.0), &Point::scalar(9.0), 4096);
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pdf_rejects_wrong_dimension() {
        let err = std_normal().pdf(&Point::from([0.0, 0.0])).unwrap_err();
        assert_eq!(err, DensityError::DimensionMismatch { expected: 1, got: 2 });
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(GaussianComponent::new(0.0, Point::scalar(0.0), vec![1.0]).is_err());
        assert!(GaussianComponent::new(1.0, Point::scalar(0.0), vec![0.0]).is_err());
        let half = GaussianComponent::new(0.5, Point::scalar(0.0), vec![1.0]).unwrap();
        assert!(GaussianMixture::new(vec![half]).is_err());
        assert!(UniformRegion::rect(Point::from([0.0, 1.0]), Point::from([1.0, 1.0])).is_err());
        assert!(UniformRegion::disk(Point::from([0.0, 0.0]), 0.0).is_err());
        assert!(PointCloudDensity::new(vec![], 0.1).is_err());
    }

    #[test]
    fn normal_sample_mean() {
        let xs = std_normal().sample(100_000, &mut rng());
        let mean = xs.iter().map(|p| p[0]).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 3.0 / (100_000f64).sqrt());
    }

    #[test]
    fn disk_samples_stay_inside() {
        let disk: Density = UniformRegion::disk(Point::from([0.0, 0.0]), 1.0).unwrap().into();
        assert!(disk.sample(100_000, &mut rng()).iter().all(|p| p.norm() <= 1.0));
    }

    #[test]
    fn bi_normal_sample_mean() {
        let g: Density = GaussianMixture::equal_weight_1d(&[-0.5, 0.5], 0.1).unwrap().into();
        let xs = g.sample(100_000, &mut rng());
        let mean = xs.iter().map(|p| p[0]).sum::<f64>() / xs.len() as f64;
        // stddev of the mixture is sqrt(0.25 + 0.01)
        assert!(mean.abs() < 3.0 * 0.51 / (100_000f64).sqrt());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let densities: Vec<Density> = vec![
            std_normal(),
            UniformRegion::unit_square().into(),
            make_scurve(50, 0.05, &mut rng()).unwrap().into(),
        ];
        for d in densities {
            assert_eq!(d.sample(64, &mut rng()), d.sample(64, &mut rng()));
        }
    }

    #[test]
    fn gaussian_mixture_view() {
        let g = GaussianMixture::equal_weight_1d(&[0.0, 2.0], 0.5).unwrap();
        let density: Density = g.clone().into();
        assert_eq!(*density.as_gaussian_mixture().unwrap(), g);

        let cloud = PointCloudDensity::new(vec![Point::from([0.0, 0.0]), Point::from([1.0, 0.0])], 0.2)
            .unwrap();
        let view = Density::from(cloud).as_gaussian_mixture().unwrap().into_owned();
        assert_eq!(view.len(), 2);
        for c in view.components() {
            assert_eq!(c.weight, 0.5);
            assert_eq!(c.stddev, vec![0.2, 0.2]);
        }

        assert!(Density::from(UniformRegion::unit_square()).as_gaussian_mixture().is_none());
    }

    #[test]
    fn point_cloud_pdf_matches_mixture_view() {
        let cloud = make_swiss_roll(300, 0.03, &mut rng()).unwrap();
        let view: Density = cloud.to_gaussian_mixture().into();
        let cloud: Density = cloud.into();
        let mut r = rng();
        for _ in 0..200 {
            let x = Point::from([r.random_range(-1.2..1.2), r.random_range(-1.2..1.2)]);
            let a = cloud.pdf(&x).unwrap();
            let b = view.pdf(&x).unwrap();
            assert!((a - b).abs() <= 1e-12, "{a} vs {b} at {x}");
        }
    }

    #[test]
    fn quadrature_normalization() {
        let cases: Vec<Density> = vec![
            std_normal(),
            GaussianMixture::equal_weight_1d(&[-0.5, 0.5], 0.1).unwrap().into(),
            UniformRegion::rect(Point::scalar(0.0), Point::scalar(1.0)).unwrap().into(),
            UniformRegion::unit_square().into(),
            UniformRegion::disk(Point::from([0.0, 0.0]), 1.0).unwrap().into(),
            make_scurve(200, 0.05, &mut rng()).unwrap().into(),
            GaussianMixture::isotropic_normal(Point::from([0.5, -0.5]), 0.3)
                .unwrap()
                .into(),
        ];
        for density in cases {
            let (lo, hi) = density.bounding_box();
            // pad so cell centres never sit on a region boundary
            let pad: Vec<f64> = (0..density.dim()).map(|a| 0.01 * (hi[a] - lo[a])).collect();
            let lo = Point::new(lo.coords().iter().zip(&pad).map(|(v, p)| v - p).collect());
            let hi = Point::new(hi.coords().iter().zip(&pad).map(|(v, p)| v + p).collect());
            let mass = quadrature(&density, &lo, &hi, 512);
            assert!((mass - 1.0).abs() < 1e-3, "{density:?}: mass {mass}");
        }
    }

    #[test]
    fn scurve_single_point_is_grid_midpoint() {
        let c = make_scurve(1, 0.0, &mut rng()).unwrap();
        assert_eq!(c.points(), &[Point::from([0.0, 0.0])]);
        assert_eq!(c.bandwidth(), MIN_BANDWIDTH);
    }

    #[test]
    fn swiss_roll_stays_in_unit_box() {
        let c = make_swiss_roll(1000, 0.0, &mut rng()).unwrap();
        assert_eq!(c.points().len(), 1000);
        assert!(c
            .points()
            .iter()
            .all(|p| p[0].abs() <= 1.0 && p[1].abs() <= 1.0));
    }

    #[test]
    fn scurve_bandwidth_follows_noise() {
        let c = make_scurve(1000, 0.05, &mut rng()).unwrap();
        assert_eq!(c.points().len(), 1000);
        assert_eq!(c.bandwidth(), 0.05);
    }

    #[test]
    fn kernelized_regions() {
        let square = UniformRegion::unit_square().to_point_cloud(8, None).unwrap();
        assert_eq!(square.points().len(), 64);
        assert_eq!(square.bandwidth(), 1.0 / 16.0);
        let disk = UniformRegion::disk(Point::from([0.0, 0.0]), 1.0)
            .unwrap()
            .to_point_cloud(8, None)
            .unwrap();
        assert!(disk.points().iter().all(|p| p.norm() <= 1.0));
        assert!(disk.points().len() < 64);
    }

    #[test]
    fn strided_subset_renormalizes() {
        let g = GaussianMixture::equal_weight_1d(&[0.0, 1.0, 2.0, 3.0, 4.0], 0.1).unwrap();
        let sub = g.strided_subset(2, 0);
        assert_eq!(sub.len(), 3);
        let total: f64 = sub.components().iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }
}
