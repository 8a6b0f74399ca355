//! Multilayer perceptron mapping input features to an unconstrained latent
//! encoding. ReLU between layers, nothing after the last one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};

pub const DEFAULT_HEAD_L2: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub latent_dim: usize,
    /// Coefficient of the squared-weight penalty on the final layer.
    pub head_l2: f64,
    pub init_seed: u64,
}

impl EncoderConfig {
    pub fn new(input_dim: usize, hidden_layers: Vec<usize>, latent_dim: usize) -> Self {
        EncoderConfig {
            input_dim,
            hidden_layers,
            latent_dim,
            head_l2: DEFAULT_HEAD_L2,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.latent_dim == 0 || self.hidden_layers.contains(&0) {
            return Err(Error::Config(format!(
                "encoder dimensions must be positive: input {}, hidden {:?}, latent {}",
                self.input_dim, self.hidden_layers, self.latent_dim
            )));
        }
        if !(self.head_l2 >= 0.0 && self.head_l2.is_finite()) {
            return Err(Error::Config(format!("head_l2 must be >= 0, got {}", self.head_l2)));
        }
        Ok(())
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_layers.len() + 2);
        w.push(self.input_dim);
        w.extend(&self.hidden_layers);
        w.push(self.latent_dim);
        w
    }
}

/// One affine layer, `x · weight + bias` with `weight` stored `fan_in × fan_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    config: EncoderConfig,
    layers: Vec<Linear>,
}

/// Tape handles produced by [`Encoder::forward_on_tape`].
#[derive(Clone, Debug)]
pub struct EncoderVars {
    pub output: Var,
    /// Weight and bias handles, in [`Encoder::params_mut`] order.
    pub params: Vec<Var>,
}

impl Encoder {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init(config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let widths = config.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                Linear {
                    weight: Tensor::matrix(fan_in, fan_out, data).expect("positive dims"),
                    bias: Tensor::zeros(&[fan_out]),
                }
            })
            .collect();
        Ok(Encoder { config, layers })
    }

    /// Builds an encoder from explicit layers; shapes must chain.
    pub fn from_layers(head_l2: f64, layers: Vec<Linear>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Config("encoder needs at least one layer".into()))?;
        let input_dim = first.weight.rows();
        let mut prev = input_dim;
        for (i, l) in layers.iter().enumerate() {
            if !l.weight.is_matrix() || l.weight.rows() != prev || l.bias.len() != l.weight.cols() {
                return Err(Error::Config(format!("layer {i} does not chain: weight {:?}, bias {:?}", l.weight.shape(), l.bias.shape())));
            }
            prev = l.weight.cols();
        }
        let hidden_layers = layers[..layers.len() - 1].iter().map(|l| l.weight.cols()).collect();
        let config = EncoderConfig {
            input_dim,
            hidden_layers,
            latent_dim: prev,
            head_l2,
            init_seed: 0,
        };
        config.validate()?;
        Ok(Encoder { config, layers })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn head(&self) -> &Linear {
        self.layers.last().expect("encoder has at least one layer")
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.all_finite() && l.bias.all_finite())
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if !x.is_matrix() || x.cols() != self.config.input_dim {
            return Err(Error::shape(
                "encoder forward",
                format!("expected m×{}, got {:?}", self.config.input_dim, x.shape()),
            ));
        }
        Ok(())
    }

    /// Tape-free evaluation.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            h = tensor::add_row_vector(&tensor::matmul(&h, &l.weight)?, &l.bias)?;
            if i < last {
                h = tensor::relu(&h);
            }
        }
        Ok(h)
    }

    pub fn forward_on_tape(&self, tape: &mut Tape, x: &Tensor) -> Result<EncoderVars> {
        self.check_input(x)?;
        let mut h = tape.constant(x.clone())?;
        let mut params = Vec::with_capacity(self.layers.len() * 2);
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let w = tape.param(l.weight.clone())?;
            let b = tape.param(l.bias.clone())?;
            params.push(w);
            params.push(b);
            let xw = tape.matmul(h, w)?;
            h = tape.add_row_vector(xw, b)?;
            if i < last {
                h = tape.relu(h)?;
            }
        }
        Ok(EncoderVars { output: h, params })
    }

    /// `head_l2 × Σ w²` over the final layer's weights.
    pub fn l2_penalty(&self) -> f64 {
        self.config.head_l2 * self.head().weight.sq_norm()
    }

    /// Tape version of [`Encoder::l2_penalty`]; `head_weight` is the final
    /// weight handle from [`EncoderVars::params`].
    pub fn l2_penalty_on_tape(&self, tape: &mut Tape, head_weight: Var) -> Result<Var> {
        let sq = tape.mul(head_weight, head_weight)?;
        let s = tape.sum(sq)?;
        tape.scale(s, self.config.head_l2)
    }

    /// Handle of the final weight matrix within `vars.params`.
    pub fn head_weight_var(vars: &EncoderVars) -> Var {
        vars.params[vars.params.len() - 2]
    }
}
