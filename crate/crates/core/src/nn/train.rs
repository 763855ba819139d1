use ndarray::Array2;
use rand::Rng as _;

use super::adam::{AdamConfig, AdamState};
use super::mlp::{LossKind, Mlp};
use super::NnError;
use crate::densities::Density;
use crate::rng::SeedStreams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub loss: LossKind,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 10_000,
            batch_size: 256,
            loss: LossKind::L2,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: Mlp,
    /// Batch loss before each parameter update.
    pub losses: Vec<f64>,
}

impl TrainOutcome {
    /// CSV with columns `iteration,loss`.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("iteration,loss\n");
        for (k, l) in self.losses.iter().enumerate() {
            out.push_str(&format!("{k},{l}\n"));
        }
        out
    }
}

/// Fits `net` to predict `x1 - x0` from `((1-α) x0 + α x1, α)` with fresh
/// `x0 ~ p0`, `x1 ~ p1`, `α ~ U[0, 1]` each iteration. The same seed and
/// configuration reproduce the weights bit for bit.
pub fn train(mut net: Mlp, p0: &Density, p1: &Density, config: &TrainConfig) -> Result<TrainOutcome, NnError> {
    let d = net.dim();
    for got in [p0.dim(), p1.dim()] {
        if got != d {
            return Err(NnError::DimensionMismatch { expected: d, got });
        }
    }
    if config.batch_size == 0 {
        return Err(NnError::EmptyBatch);
    }
    if config.iterations == 0 {
        return Err(NnError::InvalidConfig("iterations must be at least 1".into()));
    }
    let streams = SeedStreams::new(config.seed);
    let mut rng0 = streams.stream("train-x0");
    let mut rng1 = streams.stream("train-x1");
    let mut rng_alpha = streams.stream("train-alpha");
    let mut adam = AdamState::new(&net, config.adam);
    let mut losses = Vec::with_capacity(config.iterations);
    let b = config.batch_size;
    let mut inputs = Array2::zeros((b, d + 1));
    let mut targets = Array2::zeros((b, d));
    for iteration in 0..config.iterations {
        for r in 0..b {
            let x0 = p0.sample_one(&mut rng0);
            let x1 = p1.sample_one(&mut rng1);
            let alpha: f64 = rng_alpha.random();
            for axis in 0..d {
                inputs[[r, axis]] = (1.0 - alpha) * x0[axis] + alpha * x1[axis];
                targets[[r, axis]] = x1[axis] - x0[axis];
            }
            inputs[[r, d]] = alpha;
        }
        let (loss, grads) = net.loss_and_grads_arrays(inputs.view(), targets.view(), config.loss);
        if !loss.is_finite() {
            return Err(NnError::NonFiniteLoss {
                iteration,
                layer_norms: net.layer_norms(),
            });
        }
        losses.push(loss);
        adam.apply(&mut net, &grads);
    }
    Ok(TrainOutcome { net, losses })
}
