use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Initial value of every log standard deviation.
pub const INITIAL_LOG_STD: f64 = -1.0;
/// The output layer starts this much smaller than fan-in scaling.
const OUTPUT_LAYER_SCALE: f64 = 0.01;
/// Standardisation never divides by less than this.
const MIN_SCALE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl MlpShape {
    pub fn new(input_dim: usize, hidden: &[usize], output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: hidden.to_vec(),
            output_dim,
        }
    }

    /// `(fan_in, fan_out)` of each dense layer.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Offsets of each layer's weight block (row-major `out x in`) and bias.
    pub(crate) fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.layers()
            .into_iter()
            .map(|(i, o)| {
                let w = off;
                off += i * o;
                let b = off;
                off += o;
                (w, b)
            })
            .collect()
    }

    pub(crate) fn log_std_offset(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn num_params(&self) -> usize {
        self.log_std_offset() + self.output_dim
    }

    /// Tensor names and shapes in storage order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (l, (i, o)) in self.layers().into_iter().enumerate() {
            out.push((format!("layer{l}.weight"), vec![o, i]));
            out.push((format!("layer{l}.bias"), vec![o]));
        }
        out.push(("log_std".into(), vec![self.output_dim]));
        out
    }
}

/// Frozen per-dimension input standardisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Mean and standard deviation of a set of rows.
    pub fn fit<R: AsRef<[f64]>>(dim: usize, rows: impl IntoIterator<Item = R>) -> Self {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for row in rows {
            n += 1;
            for (k, &x) in row.as_ref().iter().enumerate() {
                let d = x - mean[k];
                mean[k] += d / n as f64;
                m2[k] += d * (x - mean[k]);
            }
        }
        let scale = m2
            .iter()
            .map(|&s| {
                if n > 1 {
                    (s / n as f64).sqrt().max(MIN_SCALE)
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, raw: &[f64], out: &mut [f64]) {
        for (k, (o, x)) in out.iter_mut().zip(raw).enumerate() {
            *o = (x - self.mean[k]) / self.scale[k];
        }
    }
}

/// Flat parameter vector of a Gaussian MLP policy plus its frozen input
/// standardisation.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    shape: MlpShape,
    values: Vec<f64>,
    standardizer: Standardizer,
}

impl PolicyParams {
    /// Fan-in uniform initialisation with a shrunken output layer.
    pub fn init<R: Rng>(shape: MlpShape, standardizer: Standardizer, rng: &mut R) -> Result<Self> {
        if standardizer.dim() != shape.input_dim {
            return Err(Error::DimensionMismatch {
                context: "standardizer",
                expected: shape.input_dim,
                got: standardizer.dim(),
            });
        }
        let layers = shape.layers();
        let last = layers.len() - 1;
        let mut values = Vec::with_capacity(shape.num_params());
        for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let gain = if l == last { OUTPUT_LAYER_SCALE } else { 1.0 };
            for _ in 0..fan_in * fan_out {
                values.push(gain * rng.random_range(-bound..bound));
            }
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        values.extend(std::iter::repeat_n(INITIAL_LOG_STD, shape.output_dim));
        Ok(Self {
            shape,
            values,
            standardizer,
        })
    }

    /// Assemble from raw parts, validating sizes and finiteness.
    pub fn from_parts(shape: MlpShape, values: Vec<f64>, standardizer: Standardizer) -> Result<Self> {
        if values.len() != shape.num_params() {
            return Err(Error::DimensionMismatch {
                context: "policy parameters",
                expected: shape.num_params(),
                got: values.len(),
            });
        }
        if standardizer.dim() != shape.input_dim || standardizer.scale.len() != shape.input_dim {
            return Err(Error::DimensionMismatch {
                context: "standardizer",
                expected: shape.input_dim,
                got: standardizer.dim(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("non-finite policy parameter".into()));
        }
        Ok(Self {
            shape,
            values,
            standardizer,
        })
    }

    pub fn shape(&self) -> &MlpShape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }

    pub fn output_dim(&self) -> usize {
        self.shape.output_dim
    }

    /// Dimension of each of the two concatenated inputs.
    pub fn state_dim(&self) -> usize {
        self.shape.input_dim / 2
    }

    pub fn log_std(&self) -> &[f64] {
        &self.values[self.shape.log_std_offset()..]
    }

    /// Replace the parameters, keeping log-stds inside their box.
    pub fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                context: "policy parameters",
                expected: self.values.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("non-finite policy parameter".into()));
        }
        self.values = values;
        self.project();
        Ok(())
    }

    /// `self + step`, projected.
    pub fn stepped(&self, step: &[f64], scale: f64) -> Result<Self> {
        let mut next = self.clone();
        let values = self.values.iter().zip(step).map(|(v, s)| v + scale * s).collect();
        next.set_values(values)?;
        Ok(next)
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn project(&mut self) {
        let off = self.shape.log_std_offset();
        for v in &mut self.values[off..] {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    /// SHA-256 over the parameters and standardisation, little-endian.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in self
            .values
            .iter()
            .chain(&self.standardizer.mean)
            .chain(&self.standardizer.scale)
        {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}
