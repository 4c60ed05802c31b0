//! Output heads: how a readout vector becomes a distribution, and the loss gradients w.r.t. it.

use serde::{Deserialize, Serialize};

use crate::bayes_agent::PredictiveDistribution;
use crate::task_env::{Decision, Family, TaskKind, TaskSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// One logit; P(x = 1) = σ(y).
    BernoulliLogp,
    CategoricalLogits,
    /// Normal(y0, 1 / exp(y1)).
    GaussianMeanLogprec,
    /// Lomax(exp(y0), exp(y1)).
    ExponentialLogalphaLogbeta,
    /// Two action logits followed by a state value.
    ActionLogitsPlusValue,
}

impl HeadKind {
    pub fn output_dim(self) -> usize {
        match self {
            HeadKind::BernoulliLogp => 1,
            HeadKind::CategoricalLogits | HeadKind::ActionLogitsPlusValue => 3,
            HeadKind::GaussianMeanLogprec | HeadKind::ExponentialLogalphaLogbeta => 2,
        }
    }

    pub fn for_task(spec: &TaskSpec) -> Self {
        match (spec.kind, spec.family) {
            (TaskKind::Bandit, _) => HeadKind::ActionLogitsPlusValue,
            (_, Family::Bernoulli) => HeadKind::BernoulliLogp,
            (_, Family::Categorical3) => HeadKind::CategoricalLogits,
            (_, Family::Gaussian) => HeadKind::GaussianMeanLogprec,
            (_, Family::Exponential) => HeadKind::ExponentialLogalphaLogbeta,
        }
    }

    pub fn decode(self, y: &[f64]) -> Result<Decision> {
        if y.len() != self.output_dim() {
            return Err(Error::contract(format!(
                "{self:?} head got output of length {}",
                y.len()
            )));
        }
        Ok(match self {
            HeadKind::BernoulliLogp => {
                Decision::Predict(PredictiveDistribution::Bernoulli { p: sigmoid(y[0]) })
            }
            HeadKind::CategoricalLogits => {
                let p = softmax3([y[0], y[1], y[2]]);
                Decision::Predict(PredictiveDistribution::Categorical { p })
            }
            HeadKind::GaussianMeanLogprec => Decision::Predict(PredictiveDistribution::Normal {
                mean: y[0],
                variance: (-y[1]).exp(),
            }),
            HeadKind::ExponentialLogalphaLogbeta => {
                Decision::Predict(PredictiveDistribution::Lomax {
                    alpha: y[0].exp(),
                    beta: y[1].exp(),
                })
            }
            HeadKind::ActionLogitsPlusValue => Decision::Act {
                probs: softmax2([y[0], y[1]]),
            },
        })
    }

    /// `-log π(x)` under the head's predictive distribution, writing `∂/∂y` into `grad`.
    pub fn log_loss(self, y: &[f64], x: f64, grad: &mut [f64]) -> Result<f64> {
        match self {
            HeadKind::BernoulliLogp => {
                let z = y[0];
                grad[0] = sigmoid(z) - x;
                // x·softplus(-z) + (1-x)·softplus(z)
                Ok(x * softplus(-z) + (1.0 - x) * softplus(z))
            }
            HeadKind::CategoricalLogits => {
                let k = x as usize;
                let lse = logsumexp(&y[..3]);
                for j in 0..3 {
                    grad[j] = (y[j] - lse).exp() - if j == k { 1.0 } else { 0.0 };
                }
                Ok(lse - y[k])
            }
            HeadKind::GaussianMeanLogprec => {
                let (mu, lp) = (y[0], y[1]);
                let lam = lp.exp();
                let r = x - mu;
                grad[0] = -lam * r;
                grad[1] = -0.5 + 0.5 * lam * r * r;
                Ok(0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * lp + 0.5 * lam * r * r)
            }
            HeadKind::ExponentialLogalphaLogbeta => {
                let (a, b) = (y[0].exp(), y[1].exp());
                let (lb, lbx) = (y[1], (b + x).ln());
                grad[0] = -1.0 - a * (lb - lbx);
                grad[1] = -(a - (a + 1.0) * b / (b + x));
                Ok(-(y[0] + a * lb - (a + 1.0) * lbx))
            }
            HeadKind::ActionLogitsPlusValue => {
                Err(Error::config("the action head has no log-loss"))
            }
        }
    }
}

/// Actor-critic loss weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct A2cWeights {
    pub entropy: f64,
    pub value: f64,
}

impl Default for A2cWeights {
    fn default() -> Self {
        Self {
            entropy: 0.003,
            value: 0.48,
        }
    }
}

/// Per-step actor-critic terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct A2cTerms {
    pub policy: f64,
    pub entropy: f64,
    pub value: f64,
}

impl A2cTerms {
    pub fn total(&self, w: A2cWeights) -> f64 {
        self.policy - w.entropy * self.entropy + w.value * self.value
    }
}

/// Surrogate loss `-A·log π(a) - c_H·H(π) + c_V·½(G - V)²` for one step of the
/// action head, with advantage `A` and return `G` held constant. Writes `∂/∂y`.
pub fn a2c_loss(
    y: &[f64],
    action: usize,
    advantage: f64,
    ret: f64,
    w: A2cWeights,
    grad: &mut [f64],
) -> A2cTerms {
    let lse = logsumexp(&y[..2]);
    let logp = [y[0] - lse, y[1] - lse];
    let p = [logp[0].exp(), logp[1].exp()];
    let entropy = -(p[0] * logp[0] + p[1] * logp[1]);
    for j in 0..2 {
        let onehot = if j == action { 1.0 } else { 0.0 };
        grad[j] = -advantage * (onehot - p[j]) + w.entropy * p[j] * (logp[j] + entropy);
    }
    let v = y[2];
    grad[2] = -w.value * (ret - v);
    A2cTerms {
        policy: -advantage * logp[action],
        entropy,
        value: 0.5 * (ret - v).powi(2),
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn logsumexp(y: &[f64]) -> f64 {
    let m = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + y.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax2(y: [f64; 2]) -> [f64; 2] {
    let p0 = sigmoid(y[0] - y[1]);
    [p0, 1.0 - p0]
}

pub fn softmax3(y: [f64; 3]) -> [f64; 3] {
    let lse = logsumexp(&y);
    [(y[0] - lse).exp(), (y[1] - lse).exp(), (y[2] - lse).exp()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(head: HeadKind, y: &[f64], x: f64) {
        let mut g = vec![0.0; y.len()];
        let l0 = head.log_loss(y, x, &mut g).unwrap();
        let d = head.decode(y).unwrap();
        let want = -d.predictive().unwrap().log_density(x).unwrap();
        assert!((l0 - want).abs() < 1e-12, "{head:?}: {l0} vs {want}");
        for j in 0..y.len() {
            let h = 1e-6;
            let (mut yp, mut ym) = (y.to_vec(), y.to_vec());
            yp[j] += h;
            ym[j] -= h;
            let mut s = vec![0.0; y.len()];
            let fd = (head.log_loss(&yp, x, &mut s).unwrap()
                - head.log_loss(&ym, x, &mut s).unwrap())
                / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7, "{head:?}[{j}]: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn log_loss_gradients() {
        fd_check(HeadKind::BernoulliLogp, &[0.3], 1.0);
        fd_check(HeadKind::BernoulliLogp, &[-1.2], 0.0);
        fd_check(HeadKind::CategoricalLogits, &[0.1, -0.4, 0.8], 2.0);
        fd_check(HeadKind::GaussianMeanLogprec, &[0.5, 0.2], -0.3);
        fd_check(HeadKind::ExponentialLogalphaLogbeta, &[0.4, -0.1], 1.7);
    }

    #[test]
    fn zero_logit_is_uniform_prediction() {
        let mut g = [0.0];
        let l = HeadKind::BernoulliLogp
            .log_loss(&[0.0], 1.0, &mut g)
            .unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn a2c_gradient_and_uniform_entropy() {
        let w = A2cWeights::default();
        let y = [0.2, -0.5, 0.3];
        let mut g = [0.0; 3];
        let t = a2c_loss(&y, 1, 0.7, 1.4, w, &mut g);
        for j in 0..3 {
            let h = 1e-6;
            let (mut yp, mut ym) = (y, y);
            yp[j] += h;
            ym[j] -= h;
            let mut s = [0.0; 3];
            let fd = (a2c_loss(&yp, 1, 0.7, 1.4, w, &mut s).total(w)
                - a2c_loss(&ym, 1, 0.7, 1.4, w, &mut s).total(w))
                / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-8);
        }
        assert!(t.value > 0.0);
        let u = a2c_loss(&[0.0, 0.0, 0.0], 0, 0.0, 0.0, w, &mut g);
        assert!((u.entropy - 2f64.ln()).abs() < 1e-15);
    }
}
