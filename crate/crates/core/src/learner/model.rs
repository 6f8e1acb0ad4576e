//! Parameter vectors and the feed-forward binary classifier they encode.
//!
//! Parameters are stored flat, layer by layer: the `in x out` weight matrix
//! (row-major over inputs) followed by the `out` biases. Hidden units use
//! `tanh`; the single output unit is a logit fed to a sigmoid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.1;

/// Flat, finite, real-valued model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("parameter vector must be non-empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("parameter {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Little-endian IEEE-754 bytes of every entry, in order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.0.len() * 8);
        for v in &self.0 {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Network shape. `Logistic` is a single linear unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    #[default]
    Logistic,
    Mlp { hidden: Vec<usize> },
}

impl Architecture {
    /// Layer widths from input to the single output.
    pub fn layer_sizes(&self, input_dim: usize) -> Vec<usize> {
        let mut sizes = vec![input_dim];
        if let Architecture::Mlp { hidden } = self {
            sizes.extend(hidden.iter().copied());
        }
        sizes.push(1);
        sizes
    }

    pub fn param_count(&self, input_dim: usize) -> usize {
        self.layer_sizes(input_dim)
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if let Architecture::Mlp { hidden } = self {
            if hidden.contains(&0) {
                return Err(Error::config("mlp hidden layer widths must be positive"));
            }
        }
        Ok(())
    }
}

/// Draws initial parameters uniformly from `[-INIT_SCALE, INIT_SCALE]`.
pub fn init_params(arch: &Architecture, input_dim: usize, seed: u64) -> Result<ParamVector> {
    if input_dim == 0 {
        return Err(Error::config("input_dim must be at least 1"));
    }
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..arch.param_count(input_dim))
        .map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
        .collect();
    Ok(ParamVector(values))
}

/// A parameter vector interpreted against a concrete architecture.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Network<'a> {
    sizes: &'a [usize],
    params: &'a [f64],
}

impl<'a> Network<'a> {
    pub(crate) fn new(sizes: &'a [usize], params: &'a [f64]) -> Self {
        Self { sizes, params }
    }

    /// Output logit for one example.
    pub(crate) fn logit(&self, x: &[f64]) -> f64 {
        let mut act = x.to_vec();
        let mut offset = 0;
        let layers = self.sizes.len() - 1;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let mut next = b.to_vec();
            for (i, a) in act.iter().enumerate() {
                let row = &w[i * n_out..(i + 1) * n_out];
                for (z, wij) in next.iter_mut().zip(row) {
                    *z += a * wij;
                }
            }
            if l + 1 < layers {
                next.iter_mut().for_each(|z| *z = z.tanh());
            }
            act = next;
        }
        act[0]
    }

    /// Adds the gradient of the binary cross-entropy of one example to
    /// `grad` and returns that example's loss.
    pub(crate) fn accumulate_gradient(&self, x: &[f64], label: f64, grad: &mut [f64]) -> f64 {
        let layers = self.sizes.len() - 1;
        // Forward pass keeping every layer's activation.
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            offsets.push(offset);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let mut next = b.to_vec();
            for (i, a) in acts[l].iter().enumerate() {
                let row = &w[i * n_out..(i + 1) * n_out];
                for (z, wij) in next.iter_mut().zip(row) {
                    *z += a * wij;
                }
            }
            if l + 1 < layers {
                next.iter_mut().for_each(|z| *z = z.tanh());
            }
            acts.push(next);
        }
        let z = acts[layers][0];
        let loss = bce_with_logit(z, label);

        // dL/dz for the output logit.
        let mut delta = vec![sigmoid(z) - label];
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &acts[l];
            for (i, a) in input.iter().enumerate() {
                for (j, d) in delta.iter().enumerate() {
                    grad[off + i * n_out + j] += a * d;
                }
            }
            for (j, d) in delta.iter().enumerate() {
                grad[off + n_in * n_out + j] += d;
            }
            if l > 0 {
                let w = &self.params[off..off + n_in * n_out];
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = (0..n_out).map(|j| w[i * n_out + j] * delta[j]).sum();
                        back * (1.0 - input[i] * input[i])
                    })
                    .collect();
            }
        }
        loss
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `-[y log σ(z) + (1-y) log(1-σ(z))]`.
pub(crate) fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}
