//! The learned state map φ: a ReLU regressor between whitened PCA coordinates.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::neural_core::network::{mlp_backward, mlp_forward};
use crate::neural_core::{
    sample_truncated_normal, Activation, AdamConfig, AdamState, Matrix, ParamSet,
};
use crate::seeding::{rng_from, Stream};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// φ maps meta-learner states into the Bayes-optimal state space.
    RnnToOpt,
    OptToRnn,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::RnnToOpt => "rnn2opt",
            Direction::OptToRnn => "opt2rnn",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub hidden: usize,
    pub hidden_layers: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl EmbeddingConfig {
    pub fn prediction() -> Self {
        Self {
            hidden: 64,
            hidden_layers: 3,
            learning_rate: 1e-3,
            batch_size: 200,
            max_epochs: 200,
            patience: 10,
            validation_fraction: 0.1,
            seed: 0,
        }
    }

    pub fn bandit() -> Self {
        Self {
            hidden: 256,
            ..Self::prediction()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationMap {
    pub direction: Direction,
    pub input_dim: usize,
    pub output_dim: usize,
    pub params: ParamSet,
    /// Training mini-batch loss after every optimizer step.
    pub train_loss: Vec<f64>,
    /// Validation loss after every epoch.
    pub validation_loss: Vec<f64>,
}

fn layout(cfg: &EmbeddingConfig, i: usize, o: usize) -> Vec<(String, usize, usize)> {
    let mut dims = vec![i];
    dims.extend(std::iter::repeat_n(cfg.hidden, cfg.hidden_layers));
    dims.push(o);
    let mut out = Vec::new();
    for (l, w) in dims.windows(2).enumerate() {
        out.push((format!("l{l}.w"), w[1], w[0]));
        out.push((format!("l{l}.b"), 1, w[1]));
    }
    out
}

fn mse(pred: &Matrix, target: &Matrix) -> f64 {
    pred.data
        .iter()
        .zip(&target.data)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / pred.data.len().max(1) as f64
}

impl SimulationMap {
    fn layers(&self) -> usize {
        self.params.tensors.len() / 2
    }

    pub fn apply_batch(&self, x: &Matrix) -> Matrix {
        mlp_forward(&self.params, 0, self.layers(), x, Activation::Relu)
            .pop()
            .expect("at least one layer")
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_batch(&Matrix::from_vec(1, x.len(), x.to_vec()))
            .data
    }

    /// Fits φ on per-episode sequences of (source, target) coordinates.
    /// The last `validation_fraction` of episodes are held out for early stopping.
    pub fn fit(
        direction: Direction,
        source: &[Vec<Vec<f64>>],
        target: &[Vec<Vec<f64>>],
        cfg: &EmbeddingConfig,
    ) -> Result<Self> {
        if source.len() != target.len() || source.is_empty() {
            return Err(Error::contract(
                "φ needs matched, non-empty source and target episodes",
            ));
        }
        let n_val = ((source.len() as f64 * cfg.validation_fraction).round() as usize)
            .min(source.len() - 1);
        let n_train = source.len() - n_val;
        let flatten =
            |eps: &[Vec<Vec<f64>>]| -> Vec<Vec<f64>> { eps.iter().flatten().cloned().collect() };
        let (xs, ys) = (flatten(&source[..n_train]), flatten(&target[..n_train]));
        let (xv, yv) = (flatten(&source[n_train..]), flatten(&target[n_train..]));
        if xs.len() != ys.len() || xv.len() != yv.len() {
            return Err(Error::contract(
                "source and target episodes differ in length",
            ));
        }
        let (i, o) = (xs[0].len(), ys[0].len());
        let lay = layout(cfg, i, o);
        let lay_ref: Vec<(&str, usize, usize)> =
            lay.iter().map(|(n, r, c)| (n.as_str(), *r, *c)).collect();
        let mut params = ParamSet::zeros(&lay_ref);
        let mut rng = rng_from(&[cfg.seed, Stream::Init as u64]);
        for (t, (name, _, cols)) in params.tensors.iter_mut().zip(&lay) {
            if name.ends_with(".w") {
                let sigma = 1.0 / (*cols as f64).sqrt();
                t.data
                    .iter_mut()
                    .for_each(|v| *v = sample_truncated_normal(&mut rng, sigma));
            }
        }
        let mut map = Self {
            direction,
            input_dim: i,
            output_dim: o,
            params,
            train_loss: vec![],
            validation_loss: vec![],
        };
        let layers = map.layers();
        let mut opt = AdamState::new(AdamConfig::with_lr(cfg.learning_rate), &map.params);
        let val_x = Matrix::from_rows(&xv);
        let val_y = Matrix::from_rows(&yv);
        let mut best = (f64::INFINITY, map.params.clone());
        let mut stale = 0;
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut shuffle = rng_from(&[cfg.seed, Stream::Shuffle as u64]);
        for _epoch in 0..cfg.max_epochs {
            order.shuffle(&mut shuffle);
            for chunk in order.chunks(cfg.batch_size) {
                let bx =
                    Matrix::from_rows(&chunk.iter().map(|&k| xs[k].clone()).collect::<Vec<_>>());
                let by =
                    Matrix::from_rows(&chunk.iter().map(|&k| ys[k].clone()).collect::<Vec<_>>());
                let outs = mlp_forward(&map.params, 0, layers, &bx, Activation::Relu);
                let pred = outs.last().expect("layers");
                let loss = mse(pred, &by);
                if !loss.is_finite() {
                    return Err(Error::numeric(format!(
                        "φ training diverged after {} steps",
                        map.train_loss.len()
                    )));
                }
                map.train_loss.push(loss);
                let scale = 2.0 / pred.data.len() as f64;
                let dy = Matrix::from_vec(
                    pred.rows,
                    pred.cols,
                    pred.data
                        .iter()
                        .zip(&by.data)
                        .map(|(a, b)| scale * (a - b))
                        .collect(),
                );
                let mut grads = map.params.zeros_like();
                mlp_backward(
                    &map.params,
                    0,
                    &bx,
                    &outs,
                    &dy,
                    Activation::Relu,
                    &mut grads,
                    false,
                );
                opt.update(&mut map.params, &grads);
            }
            let val = if val_x.rows > 0 {
                mse(&map.apply_batch(&val_x), &val_y)
            } else {
                *map.train_loss.last().unwrap_or(&0.0)
            };
            map.validation_loss.push(val);
            if val < best.0 {
                best = (val, map.params.clone());
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
        map.params = best.1;
        Ok(map)
    }
}
