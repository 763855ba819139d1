//! Iterative blending and deblending between two densities.
//!
//! A blended sample `x = (1-α) x0 + α x1` is moved towards the target by
//! repeatedly estimating where it came from (the posterior means of `x0` and
//! `x1` given `x`) and re-blending at a slightly larger `α`.

pub mod ddim;
pub mod densities;
pub mod eval;
pub mod nn;
pub mod oracle;
pub mod point;
pub mod pointio;
pub mod presets;
pub mod rng;
pub mod samplers;

pub use densities::{Density, GaussianComponent, GaussianMixture, PointCloudDensity, UniformRegion};
pub use oracle::{AnalyticDeblender, DeblendStats, Deblender, MedianDeblender, MonteCarloDeblender};
pub use point::Point;
pub use rng::{Rng, SeedStreams};
pub use samplers::{Integrator, Schedule, VariantKind};
