use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::heads::HeadKind;
use super::tensor::Matrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Core {
    /// Encoder, one LSTM layer, decoder.
    Lstm,
    /// Feedforward over the last `context` inputs, zero-padded: encoder plus two hidden layers.
    Context { context: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub width: usize,
    pub input_dim: usize,
    pub head: HeadKind,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_core")]
    pub core: Core,
}

fn default_activation() -> Activation {
    Activation::Relu
}

fn default_core() -> Core {
    Core::Lstm
}

impl ArchitectureConfig {
    pub fn lstm(width: usize, input_dim: usize, head: HeadKind) -> Self {
        Self {
            width,
            input_dim,
            head,
            activation: Activation::Relu,
            core: Core::Lstm,
        }
    }

    pub fn context(width: usize, input_dim: usize, head: HeadKind, context: usize) -> Self {
        Self {
            width,
            input_dim,
            head,
            activation: Activation::Relu,
            core: Core::Context { context },
        }
    }

    pub fn output_dim(&self) -> usize {
        self.head.output_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.input_dim == 0 {
            return Err(Error::config(
                "network width and input dimension must be positive",
            ));
        }
        if let Core::Context { context: 0 } = self.core {
            return Err(Error::config("context width must be at least 1"));
        }
        Ok(())
    }

    /// Parameter names and (rows, cols), weights stored as (fan_out, fan_in).
    pub fn layout(&self) -> Vec<(&'static str, usize, usize)> {
        let (n, i, o) = (self.width, self.input_dim, self.output_dim());
        match self.core {
            Core::Lstm => vec![
                ("enc.w", n, i),
                ("enc.b", 1, n),
                ("lstm.wx", 4 * n, n),
                ("lstm.wh", 4 * n, n),
                ("lstm.b", 1, 4 * n),
                ("dec.w", n, n),
                ("dec.b", 1, n),
                ("out.w", o, n),
                ("out.b", 1, o),
            ],
            Core::Context { context } => vec![
                ("enc.w", n, context * i),
                ("enc.b", 1, n),
                ("h1.w", n, n),
                ("h1.b", 1, n),
                ("h2.w", n, n),
                ("h2.b", 1, n),
                ("out.w", o, n),
                ("out.b", 1, o),
            ],
        }
    }
}

/// Named parameter tensors in a fixed order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub tensors: Vec<Matrix>,
}

impl ParamSet {
    pub fn zeros(layout: &[(&str, usize, usize)]) -> Self {
        Self {
            names: layout.iter().map(|(n, _, _)| n.to_string()).collect(),
            tensors: layout
                .iter()
                .map(|&(_, r, c)| Matrix::zeros(r, c))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Matrix::zeros(t.rows, t.cols))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(move |i| &mut self.tensors[i])
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fill(&mut self, v: f64) {
        for t in &mut self.tensors {
            t.fill(v);
        }
    }

    pub fn iter_values(&self) -> impl Iterator<Item = &f64> {
        self.tensors.iter().flat_map(|t| t.data.iter())
    }

    pub fn iter_values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.tensors.iter_mut().flat_map(|t| t.data.iter_mut())
    }

    pub fn add_assign(&mut self, other: &ParamSet) {
        for (a, b) in self.iter_values_mut().zip(other.iter_values()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.iter_values_mut() {
            *v *= s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.iter_values().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.iter_values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn check_layout(&self, layout: &[(&str, usize, usize)]) -> Result<()> {
        let ok = self.names.len() == layout.len()
            && self
                .names
                .iter()
                .zip(&self.tensors)
                .zip(layout)
                .all(|((n, t), (ln, r, c))| n == ln && t.rows == *r && t.cols == *c);
        if ok {
            Ok(())
        } else {
            Err(Error::contract(
                "parameter shapes do not match the architecture",
            ))
        }
    }
}

/// Standard deviation of a standard normal truncated to `[-2, 2]`.
pub fn truncated_normal_std() -> f64 {
    // Var = 1 - 2·2·φ(2) / (2Φ(2) - 1)
    let phi2 = (-2.0f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mass = 0.954_499_736_103_641_6;
    (1.0 - 4.0 * phi2 / mass).sqrt()
}

pub fn sample_truncated_normal<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 2.0 {
            return z * sigma;
        }
    }
}

/// Weights from a normal truncated at ±2σ with σ = 1/√fan_in; biases zero.
pub fn init_params<R: Rng + ?Sized>(arch: &ArchitectureConfig, rng: &mut R) -> ParamSet {
    let layout = arch.layout();
    let mut p = ParamSet::zeros(&layout);
    for (t, (name, _, cols)) in p.tensors.iter_mut().zip(&layout) {
        if name.ends_with(".w") || name.ends_with(".wx") || name.ends_with(".wh") {
            let sigma = 1.0 / (*cols as f64).sqrt();
            for v in &mut t.data {
                *v = sample_truncated_normal(rng, sigma);
            }
        }
    }
    p
}
