//! Small fully connected network that learns the deblending direction.
//!
//! Trained with squared error it approximates the posterior mean of
//! `x1 - x0`; with absolute error, the per-coordinate posterior median.

mod adam;
mod io;
mod mlp;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use io::{from_bytes, load_weights, save_weights, to_bytes, WeightsError, FORMAT_VERSION, MAGIC};
pub use mlp::{Activation, Gradients, Layer, LossKind, Mlp, TrainingTriple};
pub use train::{train, TrainConfig, TrainOutcome};

use thiserror::Error;

use crate::oracle::{DeblendStats, Deblender, OracleError};
use crate::point::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("empty training batch")]
    EmptyBatch,
    #[error("loss became non-finite at iteration {iteration} (layer norms {layer_norms:?})")]
    NonFiniteLoss { iteration: usize, layer_norms: Vec<f64> },
}

/// A trained network used as a deblending oracle.
#[derive(Debug, Clone)]
pub struct NeuralDeblender {
    net: Mlp,
}

impl NeuralDeblender {
    pub fn new(net: Mlp) -> Self {
        NeuralDeblender { net }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }
}

impl Deblender for NeuralDeblender {
    fn dim(&self) -> usize {
        self.net.dim()
    }

    fn deblend(&self, x: &Point, alpha: f64) -> Result<DeblendStats, OracleError> {
        self.deblend_many(std::slice::from_ref(x), alpha).pop().expect("one result")
    }

    fn deblend_many(&self, xs: &[Point], alpha: f64) -> Vec<Result<DeblendStats, OracleError>> {
        if !(0.0..=1.0).contains(&alpha) {
            return xs.iter().map(|_| Err(OracleError::InvalidAlpha(alpha))).collect();
        }
        let inputs = match self.net.batch_inputs(xs, alpha) {
            Ok(m) => m,
            Err(_) => {
                return xs
                    .iter()
                    .map(|x| {
                        if x.dim() == self.net.dim() {
                            self.deblend_many(std::slice::from_ref(x), alpha).pop().expect("one result")
                        } else {
                            Err(OracleError::DimensionMismatch {
                                expected: self.net.dim(),
                                got: x.dim(),
                            })
                        }
                    })
                    .collect()
            }
        };
        let out = self.net.forward_batch(inputs.view());
        xs.iter()
            .zip(out.rows())
            .map(|(x, row)| {
                let diff = Point::new(row.to_vec());
                if !diff.is_finite() {
                    return Err(OracleError::NonFinite { alpha });
                }
                Ok(DeblendStats::from_diff(x, alpha, diff))
            })
            .collect()
    }
}
