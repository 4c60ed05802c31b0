use serde::{Deserialize, Serialize};

use super::params::ParamSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: ParamSet,
    pub v: ParamSet,
    pub step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, like: &ParamSet) -> Self {
        Self {
            config,
            m: like.zeros_like(),
            v: like.zeros_like(),
            step: 0,
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn update(&mut self, params: &mut ParamSet, grads: &ParamSet) {
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - beta1.powf(self.step as f64);
        let bc2 = 1.0 - beta2.powf(self.step as f64);
        let it = params
            .iter_values_mut()
            .zip(grads.iter_values())
            .zip(self.m.iter_values_mut().zip(self.v.iter_values_mut()));
        for ((w, &g), (m, v)) in it {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *w -= learning_rate * mhat / (vhat.sqrt() + epsilon);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    ElementWise,
    GlobalNorm,
}

/// Clamps every entry to `[-magnitude, magnitude]`, or rescales to a global norm of at most `magnitude`.
pub fn clip_gradients(g: &mut ParamSet, magnitude: f64, mode: ClipMode) {
    match mode {
        ClipMode::ElementWise => {
            for v in g.iter_values_mut() {
                *v = v.clamp(-magnitude, magnitude);
            }
        }
        ClipMode::GlobalNorm => {
            let n = g.norm();
            if n > magnitude {
                g.scale(magnitude / n);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> ParamSet {
        let mut p = ParamSet::zeros(&[("w", 1, 1)]);
        p.tensors[0].data[0] = v;
        p
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar(0.0);
        let mut opt = AdamState::new(AdamConfig::with_lr(0.1), &p);
        opt.update(&mut p, &scalar(1.0));
        assert!((p.tensors[0].data[0] + 0.1).abs() < 1e-7);
        let mut q = scalar(0.5);
        let mut fresh = AdamState::new(AdamConfig::with_lr(0.1), &q);
        fresh.update(&mut q, &scalar(0.0));
        assert_eq!(q.tensors[0].data[0], 0.5);
        assert_eq!(fresh.step, 1);
    }

    #[test]
    fn clipping() {
        let mut g = ParamSet::zeros(&[("w", 1, 3)]);
        g.tensors[0].data = vec![3.7, -0.5, 0.2];
        clip_gradients(&mut g, 1.0, ClipMode::ElementWise);
        assert_eq!(g.tensors[0].data, vec![1.0, -0.5, 0.2]);
        let once = g.clone();
        clip_gradients(&mut g, 1.0, ClipMode::ElementWise);
        assert_eq!(g, once);
        clip_gradients(&mut g, 0.5, ClipMode::GlobalNorm);
        assert!((g.norm() - 0.5).abs() < 1e-12);
    }
}
