//! Named source/target pairs used by the experiments, the acceptance suite
//! and the command-line tool.

use crate::densities::{make_scurve, make_swiss_roll, Density, DensityError, GaussianMixture, UniformRegion};
use crate::point::Point;
use crate::rng::SeedStreams;

/// Points per curve in the 2D point-cloud densities.
pub const CURVE_POINTS: usize = 2000;
/// Jitter and kernel bandwidth of the 2D point-cloud densities.
pub const CURVE_NOISE: f64 = 0.05;
/// Root seed of the curve construction.
pub const CURVE_SEED: u64 = 7;

/// `N(0, 1)` to the two-mode mixture with means ±0.5 and stddev 0.1.
pub fn normal_to_bimodal() -> (GaussianMixture, GaussianMixture) {
    (
        GaussianMixture::isotropic_normal(Point::scalar(0.0), 1.0).expect("valid"),
        GaussianMixture::equal_weight_1d(&[-0.5, 0.5], 0.1).expect("valid"),
    )
}

/// Two modes at ±0.9 (stddev 0.3) to three modes at -1, 0, 1 (stddev 0.1).
pub fn bimodal_to_trimodal() -> (GaussianMixture, GaussianMixture) {
    (
        GaussianMixture::equal_weight_1d(&[-0.9, 0.9], 0.3).expect("valid"),
        GaussianMixture::equal_weight_1d(&[-1.0, 0.0, 1.0], 0.1).expect("valid"),
    )
}

/// `N(0, 1)` to the 0.8/0.2 mixture of `N(-1, 0.3²)` and `N(2, 0.3²)`,
/// whose posteriors are skewed enough to separate mean from median.
pub fn normal_to_skewed() -> (GaussianMixture, GaussianMixture) {
    (
        GaussianMixture::isotropic_normal(Point::scalar(0.0), 1.0).expect("valid"),
        GaussianMixture::normalized([(0.8, Point::scalar(-1.0), vec![0.3]), (0.2, Point::scalar(2.0), vec![0.3])])
            .expect("valid"),
    )
}

/// Unit square to the disk of radius 0.5 centred in it, both kernelized on a
/// `cells`-per-axis grid so they have closed-form posteriors.
pub fn square_to_disk(cells: usize) -> Result<(GaussianMixture, GaussianMixture), DensityError> {
    let square = UniformRegion::unit_square().to_point_cloud(cells, None)?;
    let disk = UniformRegion::disk(Point::from([0.5, 0.5]), 0.5)?.to_point_cloud(cells, None)?;
    Ok((square.to_gaussian_mixture(), disk.to_gaussian_mixture()))
}

pub fn scurve() -> Density {
    let mut rng = SeedStreams::new(CURVE_SEED).stream("scurve");
    Density::PointCloud(make_scurve(CURVE_POINTS, CURVE_NOISE, &mut rng).expect("valid"))
}

pub fn swiss_roll() -> Density {
    let mut rng = SeedStreams::new(CURVE_SEED).stream("swiss-roll");
    Density::PointCloud(make_swiss_roll(CURVE_POINTS, CURVE_NOISE, &mut rng).expect("valid"))
}

pub fn standard_normal_2d() -> Density {
    Density::Mixture(GaussianMixture::isotropic_normal(Point::zeros(2), 1.0).expect("valid"))
}
