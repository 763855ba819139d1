//! Binary weight files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      9 bytes  "IADB-MLP\0"
//! version    u8       1
//! activation u8       0 = relu, 1 = gelu
//! count      u32      number of layer sizes
//! sizes      count × u32
//! per layer  weights (out × in, row-major) then biases, as f64
//! ```

use std::path::Path;

use ndarray::{Array1, Array2};
use thiserror::Error;

use super::mlp::{Activation, Layer, Mlp};

pub const MAGIC: &[u8; 9] = b"IADB-MLP\0";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("weight file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed weight file at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], WeightsError> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!(
                "truncated while reading {what}: need {n} bytes, {} left",
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn fail(&self, reason: String) -> WeightsError {
        WeightsError::Parse {
            offset: self.pos,
            reason,
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8, WeightsError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32, WeightsError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>, WeightsError> {
        let raw = self.take(n * 8, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn to_bytes(net: &Mlp) -> Vec<u8> {
    let sizes = net.layer_sizes();
    let mut out = Vec::with_capacity(16 + 4 * sizes.len() + 8 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.push(net.activation().code());
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for s in &sizes {
        out.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    for layer in net.layers() {
        for v in layer.weights.iter().chain(layer.bias.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<Mlp, WeightsError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(WeightsError::Parse {
            offset: 0,
            reason: "bad magic".into(),
        });
    }
    let version = r.u8("version")?;
    if version != FORMAT_VERSION {
        r.pos -= 1;
        return Err(r.fail(format!("unsupported version {version}")));
    }
    let code = r.u8("activation")?;
    let activation = Activation::from_code(code).ok_or_else(|| {
        r.pos -= 1;
        r.fail(format!("unknown activation code {code}"))
    })?;
    let count = r.u32("size count")? as usize;
    if count < 2 {
        return Err(r.fail(format!("need at least 2 layer sizes, got {count}")));
    }
    let mut sizes = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let s = r.u32("layer size")? as usize;
        if s == 0 {
            r.pos -= 4;
            return Err(r.fail("zero layer size".into()));
        }
        sizes.push(s);
    }
    if sizes[0] != sizes[count - 1] + 1 {
        return Err(r.fail(format!(
            "input size {} must equal output size {} + 1",
            sizes[0],
            sizes[count - 1]
        )));
    }
    let mut layers = Vec::with_capacity(count - 1);
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights = r.f64s(fan_in * fan_out, "weights")?;
        let bias = r.f64s(fan_out, "biases")?;
        layers.push(Layer {
            weights: Array2::from_shape_vec((fan_out, fan_in), weights).expect("shape"),
            bias: Array1::from_vec(bias),
        });
    }
    if r.pos != bytes.len() {
        return Err(r.fail(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Mlp::from_layers(layers, activation).map_err(|e| WeightsError::Parse {
        offset: 0,
        reason: e.to_string(),
    })
}

pub fn save_weights(net: &Mlp, path: &Path) -> Result<(), WeightsError> {
    std::fs::write(path, to_bytes(net))?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<Mlp, WeightsError> {
    from_bytes(&std::fs::read(path)?)
}
