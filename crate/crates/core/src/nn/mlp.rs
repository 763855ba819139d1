use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;

use super::NnError;
use crate::point::Point;
use crate::rng::Rng;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Gelu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Gelu => z * normal_cdf(z),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => normal_cdf(z) + z * FRAC_1_SQRT_2PI * (-0.5 * z * z).exp(),
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Gelu => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Gelu),
            _ => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
        })
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            other => Err(format!("unknown activation '{other}' (expected relu or gelu)")),
        }
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Dense layer computing `W h + b`, with `W` of shape `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer {
            weights: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Multilayer perceptron mapping `(x, α)` in R^{d+1} to R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    activation: Activation,
}

/// Parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

/// Training pair together with its blend parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTriple {
    pub x0: Point,
    pub x1: Point,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Mean over the batch of the squared Euclidean error.
    L2,
    /// Mean over the batch of the absolute error summed over coordinates.
    L1,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::L2 => "l2",
            LossKind::L1 => "l1",
        })
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(LossKind::L2),
            "l1" => Ok(LossKind::L1),
            other => Err(format!("unknown loss '{other}' (expected l2 or l1)")),
        }
    }
}

fn check_sizes(sizes: &[usize]) -> Result<(), NnError> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(NnError::InvalidArchitecture(format!(
            "need at least input and output sizes, all positive (got {sizes:?})"
        )));
    }
    if sizes[0] != sizes[sizes.len() - 1] + 1 {
        return Err(NnError::InvalidArchitecture(format!(
            "input size must be output size + 1 for the alpha input (got {sizes:?})"
        )));
    }
    Ok(())
}

impl Mlp {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new(sizes: &[usize], activation: Activation, rng: &mut Rng) -> Result<Self, NnError> {
        check_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut layer = Layer::zeros(fan_in, fan_out);
                for v in layer.weights.iter_mut() {
                    *v = rng.random_range(-limit..limit);
                }
                layer
            })
            .collect();
        Ok(Mlp { layers, activation })
    }

    /// `hidden` layers of `width` units for `dim`-dimensional points.
    pub fn with_hidden(
        dim: usize,
        hidden: usize,
        width: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self, NnError> {
        let mut sizes = vec![dim + 1];
        sizes.extend(std::iter::repeat_n(width, hidden));
        sizes.push(dim);
        Self::new(&sizes, activation, rng)
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self, NnError> {
        check_sizes(sizes)?;
        let layers = sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Ok(Mlp { layers, activation })
    }

    /// Builds a network from explicit layers, checking shapes.
    pub fn from_layers(layers: Vec<Layer>, activation: Activation) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::InvalidArchitecture("no layers".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.fan_out() {
                return Err(NnError::InvalidArchitecture(format!("layer {k}: bias/weight mismatch")));
            }
            if k > 0 && layers[k - 1].fan_out() != l.fan_in() {
                return Err(NnError::InvalidArchitecture(format!(
                    "layer {k} expects {} inputs, previous layer gives {}",
                    l.fan_in(),
                    layers[k - 1].fan_out()
                )));
            }
        }
        let net = Mlp { layers, activation };
        check_sizes(&net.layer_sizes())?;
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].fan_in()];
        sizes.extend(self.layers.iter().map(Layer::fan_out));
        sizes
    }

    /// Dimension of the points the network deblends.
    pub fn dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Frobenius norm of each layer's weights and bias together.
    pub fn layer_norms(&self) -> Vec<f64> {
        self.layers
            .iter()
            .map(|l| {
                l.weights
                    .iter()
                    .chain(l.bias.iter())
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    fn input_row(&self, x: &Point, alpha: f64) -> Result<Vec<f64>, NnError> {
        if x.dim() != self.dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        let mut row = x.coords().to_vec();
        row.push(alpha);
        Ok(row)
    }

    pub fn forward(&self, x: &Point, alpha: f64) -> Result<Point, NnError> {
        let row = self.input_row(x, alpha)?;
        let input = Array2::from_shape_vec((1, row.len()), row).expect("shape");
        let out = self.forward_batch(input.view());
        Ok(Point::new(out.row(0).to_vec()))
    }

    /// Batch forward pass; `inputs` has one `(x, α)` row per sample.
    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Array2<f64> {
        let mut h = inputs.to_owned();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.weights.t());
            z += &layer.bias;
            if k < last {
                let act = self.activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            h = z;
        }
        h
    }

    /// Inputs `(x, α)` for a batch of points sharing one `α`.
    pub fn batch_inputs(&self, xs: &[Point], alpha: f64) -> Result<Array2<f64>, NnError> {
        let d = self.dim();
        let mut data = Vec::with_capacity(xs.len() * (d + 1));
        for x in xs {
            data.extend(self.input_row(x, alpha)?);
        }
        Ok(Array2::from_shape_vec((xs.len(), d + 1), data).expect("shape"))
    }

    /// Mean batch loss of predicting `x1 - x0` from `((1-α) x0 + α x1, α)`,
    /// and its exact gradient by reverse-mode differentiation.
    pub fn loss_and_grads(
        &self,
        batch: &[TrainingTriple],
        loss: LossKind,
    ) -> Result<(f64, Gradients), NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        let d = self.dim();
        let n = batch.len();
        let mut inputs = Array2::zeros((n, d + 1));
        let mut targets = Array2::zeros((n, d));
        for (r, t) in batch.iter().enumerate() {
            for p in [&t.x0, &t.x1] {
                if p.dim() != d {
                    return Err(NnError::DimensionMismatch { expected: d, got: p.dim() });
                }
            }
            for axis in 0..d {
                inputs[[r, axis]] = (1.0 - t.alpha) * t.x0[axis] + t.alpha * t.x1[axis];
                targets[[r, axis]] = t.x1[axis] - t.x0[axis];
            }
            inputs[[r, d]] = t.alpha;
        }
        Ok(self.loss_and_grads_arrays(inputs.view(), targets.view(), loss))
    }

    /// Same as [`Self::loss_and_grads`] on prepared input/target matrices.
    pub fn loss_and_grads_arrays(
        &self,
        inputs: ArrayView2<f64>,
        targets: ArrayView2<f64>,
        loss: LossKind,
    ) -> (f64, Gradients) {
        let n = inputs.nrows() as f64;
        let last = self.layers.len() - 1;
        // Forward, keeping each layer's input and pre-activation.
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut pre_acts = Vec::with_capacity(self.layers.len());
        let mut h = inputs.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.weights.t());
            z += &layer.bias;
            let next = if k < last {
                let act = self.activation;
                z.mapv(|v| act.apply(v))
            } else {
                z.clone()
            };
            layer_inputs.push(h);
            pre_acts.push(z);
            h = next;
        }

        let err = &h - &targets;
        let (value, mut delta) = match loss {
            LossKind::L2 => (
                err.iter().map(|e| e * e).sum::<f64>() / n,
                err.mapv(|e| 2.0 * e / n),
            ),
            LossKind::L1 => (
                err.iter().map(|e| e.abs()).sum::<f64>() / n,
                err.mapv(|e| {
                    if e > 0.0 {
                        1.0 / n
                    } else if e < 0.0 {
                        -1.0 / n
                    } else {
                        0.0
                    }
                }),
            ),
        };

        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let gw = delta.t().dot(&layer_inputs[k]);
            let gb = delta.sum_axis(Axis(0));
            grads.push(Layer { weights: gw, bias: gb });
            if k > 0 {
                let mut dh = delta.dot(&layer.weights);
                let act = self.activation;
                Zip::from(&mut dh)
                    .and(&pre_acts[k - 1])
                    .for_each(|g, &z| *g *= act.derivative(z));
                delta = dh;
            }
        }
        grads.reverse();
        (value, Gradients { layers: grads })
    }
}
