//! Run configuration: a TOML file of `key = value` pairs in sections.
//!
//! ```toml
//! seed = 42
//! out = "runs/normal-to-bimodal"
//!
//! [p0]
//! kind = "normal"
//! mean = [0.0]
//! stddev = 1.0
//!
//! [p1]
//! kind = "gmm"
//! means = [[-0.5], [0.5]]
//! stddevs = [0.1, 0.1]
//!
//! [sample]
//! steps = 128
//! ```
//!
//! Every section and key is optional except the densities a command needs.
//! The resolved configuration, defaults included, is written next to each
//! run's outputs as `manifest.toml` and can be fed back through `--config`.

use std::path::{Path, PathBuf};

use iadb::densities::{make_scurve, make_swiss_roll, Density, GaussianMixture, UniformRegion};
use iadb::nn::{Activation, AdamConfig, LossKind, TrainConfig};
use iadb::presets;
use iadb::samplers::{Integrator, Schedule, VariantKind};
use iadb::{pointio, Point};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<DensitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<DensitySpec>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub converge: ConvergeSection,
    #[serde(default)]
    pub ddim: DdimSection,
    #[serde(default)]
    pub figure: FigureSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: default_out(),
            p0: None,
            p1: None,
            train: TrainSection::default(),
            sample: SampleSection::default(),
            converge: ConvergeSection::default(),
            ddim: DdimSection::default(),
            figure: FigureSection::default(),
        }
    }
}

/// A density description. Uniform regions with `kernel_grid > 0` are
/// replaced by kernels on a grid of cell centers, which gives them
/// closed-form posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DensitySpec {
    Normal {
        mean: Vec<f64>,
        #[serde(default = "one")]
        stddev: f64,
    },
    Gmm {
        means: Vec<Vec<f64>>,
        /// One isotropic stddev per component.
        stddevs: Vec<f64>,
        /// Relative weights; equal when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    Rect {
        min: Vec<f64>,
        max: Vec<f64>,
        #[serde(default)]
        kernel_grid: usize,
    },
    Disk {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        kernel_grid: usize,
    },
    Scurve {
        #[serde(default = "curve_points")]
        count: usize,
        #[serde(default = "curve_noise")]
        noise: f64,
        #[serde(default = "curve_seed")]
        seed: u64,
    },
    Swissroll {
        #[serde(default = "curve_points")]
        count: usize,
        #[serde(default = "curve_noise")]
        noise: f64,
        #[serde(default = "curve_seed")]
        seed: u64,
    },
    Points {
        file: PathBuf,
        bandwidth: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn curve_points() -> usize {
    presets::CURVE_POINTS
}
fn curve_noise() -> f64 {
    presets::CURVE_NOISE
}
fn curve_seed() -> u64 {
    presets::CURVE_SEED
}

impl DensitySpec {
    /// Builds the density. Relative `points` files resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<Density, CliError> {
        let bad = |e: iadb::densities::DensityError| CliError::Config(e.to_string());
        Ok(match self {
            DensitySpec::Normal { mean, stddev } => {
                Density::Mixture(GaussianMixture::isotropic_normal(Point::new(mean.clone()), *stddev).map_err(bad)?)
            }
            DensitySpec::Gmm { means, stddevs, weights } => {
                if stddevs.len() != means.len() {
                    return Err(CliError::Config(format!(
                        "gmm has {} means but {} stddevs",
                        means.len(),
                        stddevs.len()
                    )));
                }
                let weights = weights.clone().unwrap_or_else(|| vec![1.0; means.len()]);
                if weights.len() != means.len() {
                    return Err(CliError::Config(format!(
                        "gmm has {} means but {} weights",
                        means.len(),
                        weights.len()
                    )));
                }
                let parts = means
                    .iter()
                    .zip(stddevs)
                    .zip(&weights)
                    .map(|((m, s), w)| (*w, Point::new(m.clone()), vec![*s; m.len()]));
                Density::Mixture(GaussianMixture::normalized(parts).map_err(bad)?)
            }
            DensitySpec::Rect { min, max, kernel_grid } => {
                let region = UniformRegion::rect(Point::new(min.clone()), Point::new(max.clone())).map_err(bad)?;
                kernelize(region, *kernel_grid).map_err(bad)?
            }
            DensitySpec::Disk {
                center,
                radius,
                kernel_grid,
            } => {
                let region = UniformRegion::disk(Point::new(center.clone()), *radius).map_err(bad)?;
                kernelize(region, *kernel_grid).map_err(bad)?
            }
            DensitySpec::Scurve { count, noise, seed } => {
                let mut rng = iadb::SeedStreams::new(*seed).stream("scurve");
                Density::PointCloud(make_scurve(*count, *noise, &mut rng).map_err(bad)?)
            }
            DensitySpec::Swissroll { count, noise, seed } => {
                let mut rng = iadb::SeedStreams::new(*seed).stream("swiss-roll");
                Density::PointCloud(make_swiss_roll(*count, *noise, &mut rng).map_err(bad)?)
            }
            DensitySpec::Points { file, bandwidth } => {
                let path = base.join(file);
                let points = pointio::read_points(&path)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                Density::PointCloud(iadb::PointCloudDensity::new(points, *bandwidth).map_err(bad)?)
            }
        })
    }
}

fn kernelize(region: UniformRegion, cells: usize) -> Result<Density, iadb::densities::DensityError> {
    if cells == 0 {
        Ok(Density::Uniform(region))
    } else {
        Ok(Density::PointCloud(region.to_point_cloud(cells, None)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub hidden_layers: usize,
    pub width: usize,
    pub activation: String,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub loss: String,
    /// Weight file, relative to the output directory.
    pub weights: PathBuf,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            hidden_layers: 5,
            width: 64,
            activation: Activation::Relu.to_string(),
            learning_rate: t.adam.learning_rate,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            epsilon: t.adam.epsilon,
            iterations: t.iterations,
            batch_size: t.batch_size,
            loss: t.loss.to_string(),
            weights: PathBuf::from("weights.mlp"),
        }
    }
}

impl TrainSection {
    pub fn activation(&self) -> Result<Activation, CliError> {
        self.activation.parse().map_err(CliError::Config)
    }

    pub fn loss(&self) -> Result<LossKind, CliError> {
        self.loss.parse().map_err(CliError::Config)
    }

    pub fn to_train_config(&self, seed: u64) -> Result<TrainConfig, CliError> {
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(CliError::Config("[train] iterations and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.epsilon > 0.0) {
            return Err(CliError::Config("[train] learning_rate and epsilon must be positive".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(CliError::Config(format!("[train] {name} must lie in (0, 1)")));
            }
        }
        Ok(TrainConfig {
            iterations: self.iterations,
            batch_size: self.batch_size,
            loss: self.loss()?,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub schedule: String,
    pub steps: usize,
    pub variant: String,
    pub integrator: String,
    /// `analytic`, `median`, `mc` or `net`.
    pub deblender: String,
    pub mc_samples: usize,
    pub count: usize,
    /// Also write one trajectory CSV per start.
    pub trajectories: bool,
    /// Network weights for the `net` deblender, relative to the output
    /// directory; defaults to `[train] weights`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
}

impl Default for SampleSection {
    fn default() -> Self {
        SampleSection {
            schedule: "uniform".into(),
            steps: 128,
            variant: "d".into(),
            integrator: "euler".into(),
            deblender: "analytic".into(),
            mc_samples: 4096,
            count: 1000,
            trajectories: false,
            weights: None,
        }
    }
}

impl SampleSection {
    pub fn schedule(&self) -> Result<Schedule, CliError> {
        let s = match self.schedule.to_ascii_lowercase().as_str() {
            "uniform" => Schedule::uniform(self.steps),
            "cosine" => Schedule::cosine(self.steps),
            other => return Err(CliError::Config(format!("unknown schedule '{other}' (uniform or cosine)"))),
        };
        s.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn variant(&self) -> Result<VariantKind, CliError> {
        self.variant.parse().map_err(|e: String| CliError::Config(e))
    }

    pub fn integrator(&self) -> Result<Integrator, CliError> {
        self.integrator.parse().map_err(|e: String| CliError::Config(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeSection {
    pub starts: usize,
    pub steps: Vec<usize>,
    pub chains: usize,
}

impl Default for ConvergeSection {
    fn default() -> Self {
        ConvergeSection {
            starts: 256,
            steps: vec![4, 16, 64, 256],
            chains: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdimSection {
    /// ᾱ values in diffusion-time order (strictly decreasing). When empty,
    /// a geometric schedule from `first` to `last` with `steps` steps.
    pub alphas_bar: Vec<f64>,
    pub first: f64,
    pub last: f64,
    pub steps: usize,
    pub starts: usize,
}

impl Default for DdimSection {
    fn default() -> Self {
        DdimSection {
            alphas_bar: Vec::new(),
            first: 0.9999,
            last: 0.005,
            steps: 50,
            starts: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigureSection {
    /// Step counts for the stochastic mapping panels.
    pub mapping_steps: Vec<usize>,
    /// Step counts for the path-bundle panels.
    pub path_steps: Vec<usize>,
    pub paths: usize,
    pub start: f64,
    pub alphas: Vec<f64>,
    pub bins: usize,
    /// Checkerboard cells per axis used to color mapping panels.
    pub cells: usize,
    /// Points warped by `fig5`; a jittered grid of `count` points when
    /// absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<PathBuf>,
    /// Number of samples per histogram or scatter panel.
    pub count: usize,
    /// Weight files of the l2- and l1-trained networks, relative to the
    /// output directory.
    pub l2_weights: PathBuf,
    pub l1_weights: PathBuf,
}

impl Default for FigureSection {
    fn default() -> Self {
        FigureSection {
            mapping_steps: vec![32, 512, 65_536],
            path_steps: vec![2, 10, 1000],
            paths: 16,
            start: 0.3,
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            bins: 64,
            cells: 8,
            points: None,
            count: 20_000,
            l2_weights: PathBuf::from("weights_l2.mlp"),
            l1_weights: PathBuf::from("weights_l1.mlp"),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_manifest(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn p0_spec(&self) -> Result<&DensitySpec, CliError> {
        self.p0.as_ref().ok_or_else(|| CliError::Config("missing [p0] section".into()))
    }

    pub fn p1_spec(&self) -> Result<&DensitySpec, CliError> {
        self.p1.as_ref().ok_or_else(|| CliError::Config("missing [p1] section".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 3

[p0]
kind = "normal"
mean = [0.0]

[p1]
kind = "gmm"
means = [[-0.5], [0.5]]
stddevs = [0.1, 0.1]

[sample]
steps = 64
variant = "b"
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.sample.steps, 64);
        assert_eq!(c.sample.integrator, "euler");
        assert_eq!(c.train.iterations, 10_000);
        assert_eq!(c.p0, Some(DensitySpec::Normal { mean: vec![0.0], stddev: 1.0 }));
    }

    #[test]
    fn manifest_round_trips() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        let m = c.to_manifest();
        assert!(m.contains("learning_rate"));
        assert_eq!(RunConfig::parse(&m).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("[sample]\nstepz = 3\n").unwrap_err();
        assert!(err.to_string().contains("stepz"), "{err}");
    }

    #[test]
    fn missing_section_is_named() {
        let c = RunConfig::parse("[p0]\nkind = \"normal\"\nmean = [0.0]\n").unwrap();
        assert!(c.p1_spec().unwrap_err().to_string().contains("[p1]"));
    }

    #[test]
    fn builds_every_kind() {
        let base = Path::new(".");
        let specs = [
            "kind = \"rect\"\nmin = [0.0, 0.0]\nmax = [1.0, 1.0]\nkernel_grid = 4",
            "kind = \"disk\"\ncenter = [0.0, 0.0]\nradius = 1.0",
            "kind = \"scurve\"\ncount = 50",
            "kind = \"swissroll\"",
            "kind = \"gmm\"\nmeans = [[0.0], [1.0]]\nstddevs = [1.0, 0.5]\nweights = [1.0, 3.0]",
        ];
        for s in specs {
            let spec: DensitySpec = toml::from_str(s).unwrap();
            assert!(spec.build(base).is_ok(), "{s}");
        }
        let bad: DensitySpec = toml::from_str("kind = \"gmm\"\nmeans = [[0.0]]\nstddevs = [1.0, 2.0]").unwrap();
        assert!(matches!(bad.build(base), Err(CliError::Config(_))));
    }
}
