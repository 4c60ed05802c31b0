//! Truncated backpropagation through time over one unroll window.

use super::heads::{a2c_loss, A2cTerms, A2cWeights};
use super::network::{Network, StepCache};
use super::params::ParamSet;
use super::tensor::Matrix;
use crate::{Error, Result};

/// Per-step targets for a window, indexed `[t][episode]`.
pub enum WindowLoss<'a> {
    /// `Σ_t -log π_t(x_t)` with `x_t` the observation revealed after step `t`'s prediction.
    LogLoss { targets: &'a [Vec<f64>] },
    /// Actor-critic surrogate with advantages and returns held constant.
    A2c {
        actions: &'a [Vec<usize>],
        advantages: &'a [Vec<f64>],
        returns: &'a [Vec<f64>],
        weights: A2cWeights,
    },
}

#[derive(Clone, Debug)]
pub struct WindowResult {
    /// Batch-mean of the per-episode summed loss.
    pub loss: f64,
    pub grads: ParamSet,
    pub outputs: Vec<Matrix>,
    pub final_state: Matrix,
    pub a2c: A2cTerms,
}

/// Runs the window forward, caching activations.
pub fn forward_window(
    net: &Network,
    inputs: &[Matrix],
    state: &Matrix,
) -> Result<(Vec<Matrix>, Vec<StepCache>, Matrix)> {
    let mut s = state.clone();
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (y, next, cache) = net.forward(x, &s)?;
        outputs.push(y);
        caches.push(cache);
        s = next;
    }
    Ok((outputs, caches, s))
}

/// Loss value and `∂loss/∂y_t` for every step, scaled by `1 / B`.
pub fn output_gradients(
    net: &Network,
    outputs: &[Matrix],
    loss: &WindowLoss,
    episode_seeds: &[u64],
) -> Result<(f64, Vec<Matrix>, A2cTerms)> {
    let head = net.arch.head;
    let b = outputs.first().map_or(0, |y| y.rows);
    let scale = 1.0 / b.max(1) as f64;
    let mut total = 0.0;
    let mut terms = A2cTerms::default();
    let mut dys = Vec::with_capacity(outputs.len());
    for (t, y) in outputs.iter().enumerate() {
        let mut dy = Matrix::zeros(y.rows, y.cols);
        for r in 0..b {
            let l = match loss {
                WindowLoss::LogLoss { targets } => {
                    head.log_loss(y.row(r), targets[t][r], dy.row_mut(r))?
                }
                WindowLoss::A2c {
                    actions,
                    advantages,
                    returns,
                    weights,
                } => {
                    let k = a2c_loss(
                        y.row(r),
                        actions[t][r],
                        advantages[t][r],
                        returns[t][r],
                        *weights,
                        dy.row_mut(r),
                    );
                    terms.policy += k.policy * scale;
                    terms.entropy += k.entropy * scale;
                    terms.value += k.value * scale;
                    k.total(*weights)
                }
            };
            if !l.is_finite() || dy.row(r).iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    loss: l,
                    episode_seed: episode_seeds.get(r).copied().unwrap_or(0),
                });
            }
            total += l * scale;
        }
        for v in &mut dy.data {
            *v *= scale;
        }
        dys.push(dy);
    }
    Ok((total, dys, terms))
}

/// Exact gradients of the window loss; the incoming state is a constant.
pub fn bptt_gradients(
    net: &Network,
    inputs: &[Matrix],
    state: &Matrix,
    loss: &WindowLoss,
    episode_seeds: &[u64],
) -> Result<WindowResult> {
    let (outputs, caches, final_state) = forward_window(net, inputs, state)?;
    let (loss, dys, a2c) = output_gradients(net, &outputs, loss, episode_seeds)?;
    let mut grads = net.params.zeros_like();
    net.backward(&caches, &dys, &mut grads)?;
    Ok(WindowResult {
        loss,
        grads,
        outputs,
        final_state,
        a2c,
    })
}
